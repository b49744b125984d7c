#pragma once

// Fixed-grid surrogate thermal plant: explicit 3-D conduction on cubic cells,
// a Gaussian volumetric laser source, and the two process sensors (transverse
// melt-pool area and the lookahead surface temperature).
//
// Coordinates: x/y in mm on the top surface, z <= 0 into the material. Cell
// (i, j, k) has its center at (origin_x + (i + 1/2) h, origin_y + (j + 1/2) h,
// -(k + 1/2) h); k = 0 is the surface layer.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meltpool/scan_plan.hpp"

namespace meltpool {

/// Constant effective properties (no latent heat).
struct MaterialParams {
  double density = 8440.0;       // kg/m^3
  double specific_heat = 620.0;  // J/(kg K)
  double conductivity = 20.0;    // W/(m K)
  double melt_temp = 1563.0;     // K
  double ambient_temp = 353.0;   // K

  double diffusivity() const { return conductivity / (density * specific_heat); }
  double volumetric_heat_capacity() const { return density * specific_heat; }
  void validate() const;
};

struct LaserParams {
  double absorptivity = 0.4;
  double beam_radius_um = 50.0;
  double penetration_depth_um = 3.0;

  void validate() const;
};

enum class BoundaryMode {
  ambient_sides,  // sides and bottom held at ambient, top adiabatic
  insulated,      // every face adiabatic
};

enum class MeltRegion {
  beam_pool,    // molten set connected to the surface under the beam
  whole_plane,  // every molten point of the cut plane
};

struct SimConfig {
  double cell_size_um = 20.0;
  double margin_x_mm = 1.0;  // beyond the first/last track end
  double margin_y_mm = 0.65;
  double depth_mm = 0.8;
  BoundaryMode boundary = BoundaryMode::ambient_sides;
  double stability_factor = 0.9;  // substep <= factor * h^2 / (6 alpha)
  MeltRegion melt_region = MeltRegion::beam_pool;

  double power_lower = 0.0, power_upper = 350.0;
  double speed_lower = 400.0, speed_upper = 1200.0;

  void validate() const;
};

class ThermalField {
 public:
  ThermalField() = default;
  ThermalField(int nx, int ny, int nz, double cell_size_um, double origin_x_mm, double origin_y_mm,
               double initial_temp);

  /// Grid covering every track of `plan` plus the configured margins.
  static ThermalField fit_to_plan(const ScanPlan& plan, const SimConfig& sim, double initial_temp);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  std::size_t cell_count() const { return temps_.size(); }
  double cell_size_um() const { return cell_um_; }
  double cell_size_mm() const { return cell_um_ * 1e-3; }
  double cell_size_m() const { return cell_um_ * 1e-6; }
  double origin_x_mm() const { return origin_x_; }
  double origin_y_mm() const { return origin_y_; }
  double extent_x_mm() const { return nx_ * cell_size_mm(); }
  double extent_y_mm() const { return ny_ * cell_size_mm(); }
  double extent_z_mm() const { return nz_ * cell_size_mm(); }

  double x_center_mm(int i) const { return origin_x_ + (i + 0.5) * cell_size_mm(); }
  double y_center_mm(int j) const { return origin_y_ + (j + 0.5) * cell_size_mm(); }
  double z_center_mm(int k) const { return -(k + 0.5) * cell_size_mm(); }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(ny_) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(nx_) +
           static_cast<std::size_t>(i);
  }
  double& at(int i, int j, int k) { return temps_[index(i, j, k)]; }
  double at(int i, int j, int k) const { return temps_[index(i, j, k)]; }

  std::vector<double>& temps() { return temps_; }
  const std::vector<double>& temps() const { return temps_; }

  bool contains_xy(double x_mm, double y_mm) const;
  double max_temp() const;
  double min_temp() const;
  /// Sum of rho c_p T V over all cells (J).
  double enthalpy(const MaterialParams& material) const;

  /// Raw little-endian float64 dump plus a JSON sidecar with dimensions.
  void write_snapshot(const std::string& bin_path, const std::string& sidecar_path) const;

 private:
  int nx_ = 0, ny_ = 0, nz_ = 0;
  double cell_um_ = 40.0;
  double origin_x_ = 0.0, origin_y_ = 0.0;
  std::vector<double> temps_;
};

struct BeamState {
  double x_mm = 0.0, y_mm = 0.0;
  double dir_x = 1.0, dir_y = 0.0;
  double power_w = 0.0;
  double speed_mm_s = 800.0;

  void validate() const;
};

/// Gaussian volumetric source (W/m^3) at offsets dx, dy, dz (m) from the beam
/// center on the surface; zero above the surface.
double heat_source_eval(double dx_m, double dy_m, double dz_m, double power_w, const LaserParams& laser);

/// Cell-averaged source (W/m^3) for a beam at (x_mm, y_mm), written into
/// `out` (resized and zero-filled). Cells are integrated analytically with erf,
/// so the sum over a domain containing the beam footprint is a * p.
void deposit_source(const ThermalField& field, double x_mm, double y_mm, double power_w, const LaserParams& laser,
                    std::vector<double>& out);

/// Stateful stepping helper that owns scratch buffers; one per plant.
class ThermalStepper {
 public:
  ThermalStepper(MaterialParams material, LaserParams laser, SimConfig sim);

  /// Advances `field` by dt (s) and moves the beam by v dt along its direction.
  /// Returns the energy (J) deposited by the source during the step.
  double step(ThermalField& field, BeamState& beam, double dt_s);

  int substeps_for(const ThermalField& field, double dt_s) const;

  const MaterialParams& material() const { return material_; }
  const LaserParams& laser() const { return laser_; }
  const SimConfig& sim() const { return sim_; }

 private:
  MaterialParams material_;
  LaserParams laser_;
  SimConfig sim_;
  std::vector<double> scratch_;
  std::vector<double> source_;
};

/// Value-returning convenience wrapper over ThermalStepper::step.
ThermalField thermal_step(const ThermalField& field, BeamState& beam, double dt_s, const MaterialParams& material,
                          const LaserParams& laser, const SimConfig& sim = {});

/// Molten area (mm^2) in the vertical plane through the beam center normal to
/// the scan direction (tracks run along x, so this is the y-z plane at x_beam).
/// With `beam_pool`, molten patches not connected to the surface under the beam
/// are ignored.
double melt_area(const ThermalField& field, const BeamState& beam, double melt_temp,
                 MeltRegion region = MeltRegion::beam_pool);

struct LookaheadSample {
  double temp_k = 0.0;
  double x_mm = 0.0, y_mm = 0.0;
  bool clamped = false;
};

/// Surface temperature at the beam position advanced by v dt + r_s.
LookaheadSample lookahead_temp(const ThermalField& field, const BeamState& beam, double dt_s,
                               const LaserParams& laser);

struct StepRecord {
  int step = 0;
  double time_s = 0.0;
  double x_mm = 0.0, y_mm = 0.0;
  double power_w = 0.0;
  double speed_mm_s = 0.0;
  double melt_area_mm2 = 0.0;
  double lookahead_temp_k = 0.0;
  int track = 0;
  int track_step = 0;
  bool lookahead_clamped = false;
};

struct StepObservation {
  int step = 0;
  double time_s = 0.0;
  double melt_area_mm2 = 0.0;
  double lookahead_temp_k = 0.0;
  int track = 0;
  int track_step = 0;
  double planned_power_w = 0.0;
  double planned_speed_mm_s = 0.0;
};

struct ControlCommand {
  double power_w = 0.0;
  double speed_mm_s = 0.0;
};

using ScanController = std::function<ControlCommand(const StepObservation&)>;

struct ScanResult {
  std::vector<StepRecord> records;
  bool aborted = false;
  std::string error;
  ThermalField final_field;
};

/// Steps the plant at the plan's sample period over every track. With a
/// controller, its command (clamped to the SimConfig bounds) replaces the plan
/// waveforms. A throwing controller stops the scan; the partial log is kept.
ScanResult run_scan(const ScanPlan& plan, const ScanController& controller, const SimConfig& sim,
                    const MaterialParams& material = {}, const LaserParams& laser = {});

void to_json(nlohmann::json& j, const MaterialParams& m);
void from_json(const nlohmann::json& j, MaterialParams& m);
void to_json(nlohmann::json& j, const LaserParams& l);
void from_json(const nlohmann::json& j, LaserParams& l);
void to_json(nlohmann::json& j, const SimConfig& s);
void from_json(const nlohmann::json& j, SimConfig& s);

}  // namespace meltpool
