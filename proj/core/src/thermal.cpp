#include "meltpool/thermal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace meltpool {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;

// Integral of exp(-3 (s / w)^2) over s in [lo, hi].
double gaussian_segment(double lo, double hi, double w) {
  const double scale = w * std::sqrt(std::numbers::pi) / (2.0 * kSqrt3);
  return scale * (std::erf(kSqrt3 * hi / w) - std::erf(kSqrt3 * lo / w));
}

// Area fraction of the unit square where the bilinear-edge interpolant is >= 0.
// Corners are given counter-clockwise from (0,0). Walks the perimeter and keeps
// inside corners plus edge crossings, then applies the shoelace formula.
double square_fraction(double f00, double f10, double f11, double f01) {
  const double f[4] = {f00, f10, f11, f01};
  const double px[4] = {0.0, 1.0, 1.0, 0.0};
  const double py[4] = {0.0, 0.0, 1.0, 1.0};
  int inside = 0;
  for (double v : f) inside += v >= 0.0 ? 1 : 0;
  if (inside == 0) return 0.0;
  if (inside == 4) return 1.0;

  double vx[8], vy[8];
  int n = 0;
  for (int e = 0; e < 4; ++e) {
    const int a = e, b = (e + 1) % 4;
    if (f[a] >= 0.0) {
      vx[n] = px[a];
      vy[n] = py[a];
      ++n;
    }
    if ((f[a] >= 0.0) != (f[b] >= 0.0)) {
      const double t = f[a] / (f[a] - f[b]);
      vx[n] = px[a] + t * (px[b] - px[a]);
      vy[n] = py[a] + t * (py[b] - py[a]);
      ++n;
    }
  }
  double twice = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    twice += vx[i] * vy[j] - vx[j] * vy[i];
  }
  return 0.5 * std::abs(twice);
}

// Length fraction of the unit segment where the linear interpolant is >= 0.
double segment_fraction(double f0, double f1) {
  if (f0 >= 0.0 && f1 >= 0.0) return 1.0;
  if (f0 < 0.0 && f1 < 0.0) return 0.0;
  const double t = f0 / (f0 - f1);
  return f0 >= 0.0 ? t : 1.0 - t;
}

}  // namespace

void MaterialParams::validate() const {
  if (!(density > 0.0 && specific_heat > 0.0 && conductivity > 0.0 && melt_temp > 0.0 && ambient_temp > 0.0))
    throw std::invalid_argument("material parameters must be strictly positive");
  if (!(melt_temp > ambient_temp)) throw std::invalid_argument("melt temperature must exceed ambient");
}

void LaserParams::validate() const {
  if (!(absorptivity > 0.0 && absorptivity <= 1.0)) throw std::invalid_argument("absorptivity must be in (0, 1]");
  if (!(beam_radius_um > 0.0)) throw std::invalid_argument("beam radius must be > 0");
  if (!(penetration_depth_um > 0.0)) throw std::invalid_argument("penetration depth must be > 0");
}

void SimConfig::validate() const {
  if (!(cell_size_um > 0.0)) throw std::invalid_argument("cell size must be > 0");
  if (!(margin_x_mm >= 0.0 && margin_y_mm >= 0.0)) throw std::invalid_argument("margins must be >= 0");
  if (!(depth_mm > 0.0)) throw std::invalid_argument("depth must be > 0");
  if (!(stability_factor > 0.0 && stability_factor <= 1.0))
    throw std::invalid_argument("stability factor must be in (0, 1]");
  if (!(power_lower <= power_upper) || !(speed_lower <= speed_upper) || !(speed_lower > 0.0))
    throw std::invalid_argument("invalid actuator bounds");
}

void BeamState::validate() const {
  if (std::abs(std::hypot(dir_x, dir_y) - 1.0) > 1e-9) throw std::invalid_argument("beam direction must be unit");
  if (!(power_w >= 0.0)) throw std::invalid_argument("beam power must be >= 0");
  if (!(speed_mm_s > 0.0)) throw std::invalid_argument("beam speed must be > 0");
}

ThermalField::ThermalField(int nx, int ny, int nz, double cell_size_um, double origin_x_mm, double origin_y_mm,
                           double initial_temp)
    : nx_(nx), ny_(ny), nz_(nz), cell_um_(cell_size_um), origin_x_(origin_x_mm), origin_y_(origin_y_mm) {
  if (nx < 2 || ny < 2 || nz < 2) throw std::invalid_argument("thermal grid needs at least 2 cells per axis");
  if (!(cell_size_um > 0.0)) throw std::invalid_argument("cell size must be > 0");
  temps_.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz),
                initial_temp);
}

ThermalField ThermalField::fit_to_plan(const ScanPlan& plan, const SimConfig& sim, double initial_temp) {
  plan.validate();
  sim.validate();
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& t : plan.tracks) {
    xmin = std::min({xmin, t.x0, t.x1});
    xmax = std::max({xmax, t.x0, t.x1});
    ymin = std::min({ymin, t.y0, t.y1});
    ymax = std::max({ymax, t.y0, t.y1});
  }
  const double h = sim.cell_size_um * 1e-3;
  const double wx = (xmax - xmin) + 2.0 * sim.margin_x_mm;
  const double wy = (ymax - ymin) + 2.0 * sim.margin_y_mm;
  const int nx = std::max(2, static_cast<int>(std::ceil(wx / h - 1e-9)));
  const int ny = std::max(2, static_cast<int>(std::ceil(wy / h - 1e-9)));
  const int nz = std::max(2, static_cast<int>(std::ceil(sim.depth_mm / h - 1e-9)));
  const double cx = 0.5 * (xmin + xmax);
  const double cy = 0.5 * (ymin + ymax);
  return ThermalField(nx, ny, nz, sim.cell_size_um, cx - 0.5 * nx * h, cy - 0.5 * ny * h, initial_temp);
}

bool ThermalField::contains_xy(double x_mm, double y_mm) const {
  return x_mm >= origin_x_ && x_mm <= origin_x_ + extent_x_mm() && y_mm >= origin_y_ &&
         y_mm <= origin_y_ + extent_y_mm();
}

double ThermalField::max_temp() const { return *std::max_element(temps_.begin(), temps_.end()); }
double ThermalField::min_temp() const { return *std::min_element(temps_.begin(), temps_.end()); }

double ThermalField::enthalpy(const MaterialParams& material) const {
  const double h = cell_size_m();
  double sum = 0.0;
  for (double t : temps_) sum += t;
  return sum * material.volumetric_heat_capacity() * h * h * h;
}

void ThermalField::write_snapshot(const std::string& bin_path, const std::string& sidecar_path) const {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open snapshot file " + bin_path);
  for (double t : temps_) {
    auto bits = std::bit_cast<std::uint64_t>(t);
    if constexpr (std::endian::native == std::endian::big) {
      std::uint64_t swapped = 0;
      for (int b = 0; b < 8; ++b) swapped |= ((bits >> (8 * b)) & 0xffULL) << (8 * (7 - b));
      bits = swapped;
    }
    char buf[8];
    std::memcpy(buf, &bits, 8);
    bin.write(buf, 8);
  }
  nlohmann::json side = {{"schema_version", 1},
                         {"dtype", "float64-le"},
                         {"order", "x-fastest, then y, then z (k = 0 is the top layer)"},
                         {"nx", nx_},
                         {"ny", ny_},
                         {"nz", nz_},
                         {"cell_size_um", cell_um_},
                         {"origin_mm", {origin_x_, origin_y_}}};
  std::ofstream js(sidecar_path);
  if (!js) throw std::runtime_error("cannot open sidecar file " + sidecar_path);
  js << side.dump(2) << '\n';
}

double heat_source_eval(double dx_m, double dy_m, double dz_m, double power_w, const LaserParams& laser) {
  if (dz_m > 0.0) return 0.0;
  const double r = laser.beam_radius_um * 1e-6;
  const double c = laser.penetration_depth_um * 1e-6;
  const double pi = std::numbers::pi;
  const double peak = 6.0 * kSqrt3 * laser.absorptivity * power_w / (r * r * c * pi * std::sqrt(pi));
  const double q = (dx_m / r) * (dx_m / r) + (dy_m / r) * (dy_m / r) + (dz_m / c) * (dz_m / c);
  return peak * std::exp(-3.0 * q);
}

void deposit_source(const ThermalField& field, double x_mm, double y_mm, double power_w, const LaserParams& laser,
                    std::vector<double>& out) {
  out.assign(field.cell_count(), 0.0);
  if (power_w <= 0.0) return;

  const double h = field.cell_size_m();
  const double r = laser.beam_radius_um * 1e-6;
  const double c = laser.penetration_depth_um * 1e-6;
  const double pi = std::numbers::pi;
  const double peak = 6.0 * kSqrt3 * laser.absorptivity * power_w / (r * r * c * pi * std::sqrt(pi));

  const double bx = (x_mm - field.origin_x_mm()) * 1e-3;
  const double by = (y_mm - field.origin_y_mm()) * 1e-3;
  const double reach = 5.0 * r + h;
  const int i0 = std::max(0, static_cast<int>(std::floor((bx - reach) / h)));
  const int i1 = std::min(field.nx() - 1, static_cast<int>(std::ceil((bx + reach) / h)));
  const int j0 = std::max(0, static_cast<int>(std::floor((by - reach) / h)));
  const int j1 = std::min(field.ny() - 1, static_cast<int>(std::ceil((by + reach) / h)));
  const int k1 = std::min(field.nz() - 1, static_cast<int>(std::ceil(6.0 * c / h)));
  if (i0 > i1 || j0 > j1) return;

  std::vector<double> ix(static_cast<std::size_t>(i1 - i0 + 1));
  std::vector<double> iy(static_cast<std::size_t>(j1 - j0 + 1));
  std::vector<double> iz(static_cast<std::size_t>(k1 + 1));
  for (int i = i0; i <= i1; ++i) ix[static_cast<std::size_t>(i - i0)] = gaussian_segment(i * h - bx, (i + 1) * h - bx, r);
  for (int j = j0; j <= j1; ++j) iy[static_cast<std::size_t>(j - j0)] = gaussian_segment(j * h - by, (j + 1) * h - by, r);
  for (int k = 0; k <= k1; ++k) iz[static_cast<std::size_t>(k)] = gaussian_segment(-(k + 1) * h, -k * h, c);

  const double inv_volume = 1.0 / (h * h * h);
  for (int k = 0; k <= k1; ++k) {
    const double fz = iz[static_cast<std::size_t>(k)];
    if (fz == 0.0) continue;
    for (int j = j0; j <= j1; ++j) {
      const double fyz = fz * iy[static_cast<std::size_t>(j - j0)];
      for (int i = i0; i <= i1; ++i)
        out[field.index(i, j, k)] = peak * inv_volume * fyz * ix[static_cast<std::size_t>(i - i0)];
    }
  }
}

ThermalStepper::ThermalStepper(MaterialParams material, LaserParams laser, SimConfig sim)
    : material_(material), laser_(laser), sim_(sim) {
  material_.validate();
  laser_.validate();
  sim_.validate();
}

int ThermalStepper::substeps_for(const ThermalField& field, double dt_s) const {
  const double h = field.cell_size_m();
  const double limit = sim_.stability_factor * h * h / (6.0 * material_.diffusivity());
  return std::max(1, static_cast<int>(std::ceil(dt_s / limit - 1e-12)));
}

double ThermalStepper::step(ThermalField& field, BeamState& beam, double dt_s) {
  if (!(dt_s > 0.0)) throw std::invalid_argument("time step must be > 0");
  beam.validate();
  if (!field.contains_xy(beam.x_mm, beam.y_mm)) throw std::out_of_range("beam is outside the thermal domain");

  const int nsub = substeps_for(field, dt_s);
  const double dt = dt_s / nsub;
  const double h = field.cell_size_m();
  const double rate = material_.diffusivity() * dt / (h * h);
  const double src_coef = dt / material_.volumetric_heat_capacity();
  const double amb = material_.ambient_temp;
  const bool fixed_sides = sim_.boundary == BoundaryMode::ambient_sides;
  const int nx = field.nx(), ny = field.ny(), nz = field.nz();
  const std::size_t sx = 1, sy = static_cast<std::size_t>(nx), sz = static_cast<std::size_t>(nx) * ny;

  auto& temps = field.temps();
  scratch_.resize(temps.size());
  double energy = 0.0;
  const double travel = beam.speed_mm_s * dt;

  for (int s = 0; s < nsub; ++s) {
    const double bx = beam.x_mm + beam.dir_x * travel * (s + 0.5);
    const double by = beam.y_mm + beam.dir_y * travel * (s + 0.5);
    deposit_source(field, bx, by, beam.power_w, laser_, source_);

    const double* t = temps.data();
    double* out = scratch_.data();
    const double* q = source_.data();
    double deposited = 0.0;
    for (int k = 0; k < nz; ++k) {
      for (int j = 0; j < ny; ++j) {
        const std::size_t row = field.index(0, j, k);
        for (int i = 0; i < nx; ++i) {
          const std::size_t id = row + static_cast<std::size_t>(i);
          const double c = t[id];
          const double side_ghost = fixed_sides ? amb : c;
          const double xm = i > 0 ? t[id - sx] : side_ghost;
          const double xp = i + 1 < nx ? t[id + sx] : side_ghost;
          const double ym = j > 0 ? t[id - sy] : side_ghost;
          const double yp = j + 1 < ny ? t[id + sy] : side_ghost;
          const double zu = k > 0 ? t[id - sz] : c;  // adiabatic top surface
          const double zd = k + 1 < nz ? t[id + sz] : side_ghost;
          out[id] = c + rate * (((((xm + xp) + ym) + yp) + zu) + zd - 6.0 * c) + src_coef * q[id];
          deposited += q[id];
        }
      }
    }
    temps.swap(scratch_);
    energy += deposited * h * h * h * dt;
  }

  for (double v : temps) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite temperature after thermal step");
  }
  beam.x_mm += beam.dir_x * beam.speed_mm_s * dt_s;
  beam.y_mm += beam.dir_y * beam.speed_mm_s * dt_s;
  return energy;
}

ThermalField thermal_step(const ThermalField& field, BeamState& beam, double dt_s, const MaterialParams& material,
                          const LaserParams& laser, const SimConfig& sim) {
  ThermalField next = field;
  ThermalStepper stepper(material, laser, sim);
  stepper.step(next, beam, dt_s);
  return next;
}

double melt_area(const ThermalField& field, const BeamState& beam, double melt_temp, MeltRegion region) {
  if (!field.contains_xy(beam.x_mm, beam.y_mm)) throw std::out_of_range("beam is outside the thermal domain");
  const double h = field.cell_size_mm();
  const int nx = field.nx(), ny = field.ny(), nz = field.nz();

  // Cut plane x = x_beam, linear between the two bracketing cell-center slices.
  const double u = (beam.x_mm - field.origin_x_mm()) / h - 0.5;
  int i0 = static_cast<int>(std::floor(u));
  i0 = std::clamp(i0, 0, nx - 2);
  const double w = std::clamp(u - i0, 0.0, 1.0);

  std::vector<double> plane(static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz));
  auto p = [&](int j, int k) -> double& {
    return plane[static_cast<std::size_t>(k) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(j)];
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      p(j, k) = (1.0 - w) * field.at(i0, j, k) + w * field.at(i0 + 1, j, k) - melt_temp;

  if (region == MeltRegion::beam_pool) {
    // Keep the 4-connected molten set seeded at the surface under the beam;
    // other molten patches (e.g. the tail of a previous track) are mirrored
    // below the melt line so they drop out of the interpolation.
    const double vj = (beam.y_mm - field.origin_y_mm()) / h - 0.5;
    const int jn = std::clamp(static_cast<int>(std::lround(vj)), 0, ny - 1);
    const int jf = std::clamp(static_cast<int>(std::floor(vj)), 0, ny - 1);
    const int jc = std::clamp(jf + 1, 0, ny - 1);
    std::vector<char> keep(plane.size(), 0);
    std::vector<int> stack;
    for (int js : {jn, jf, jc}) {
      if (p(js, 0) >= 0.0 && !keep[static_cast<std::size_t>(js)]) {
        keep[static_cast<std::size_t>(js)] = 1;
        stack.push_back(js);
      }
    }
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int j = idx % ny, k = idx / ny;
      const int nb[4][2] = {{j - 1, k}, {j + 1, k}, {j, k - 1}, {j, k + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[0] >= ny || q[1] < 0 || q[1] >= nz) continue;
        const int n = q[1] * ny + q[0];
        if (keep[static_cast<std::size_t>(n)] || p(q[0], q[1]) < 0.0) continue;
        keep[static_cast<std::size_t>(n)] = 1;
        stack.push_back(n);
      }
    }
    for (std::size_t n = 0; n < plane.size(); ++n)
      if (!keep[n] && plane[n] >= 0.0) plane[n] = -std::max(plane[n], 1e-9);
  }

  double area_cells = 0.0;
  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      const double a = p(j, k), b = p(j + 1, k), c = p(j + 1, k + 1), d = p(j, k + 1);
      if (a < 0.0 && b < 0.0 && c < 0.0 && d < 0.0) continue;
      area_cells += square_fraction(a, b, c, d);
    }
  }
  // Half-cell strip between the top cell centers and the adiabatic surface:
  // zero normal gradient, so the molten width is that of the top row.
  for (int j = 0; j + 1 < ny; ++j) area_cells += 0.5 * segment_fraction(p(j, 0), p(j + 1, 0));
  return area_cells * h * h;
}

LookaheadSample lookahead_temp(const ThermalField& field, const BeamState& beam, double dt_s,
                               const LaserParams& laser) {
  const double ahead = beam.speed_mm_s * dt_s + laser.beam_radius_um * 1e-3;
  LookaheadSample s;
  s.x_mm = beam.x_mm + beam.dir_x * ahead;
  s.y_mm = beam.y_mm + beam.dir_y * ahead;
  s.clamped = !field.contains_xy(s.x_mm, s.y_mm);

  const double h = field.cell_size_mm();
  const double u = std::clamp((s.x_mm - field.origin_x_mm()) / h - 0.5, 0.0, field.nx() - 1.0);
  const double v = std::clamp((s.y_mm - field.origin_y_mm()) / h - 0.5, 0.0, field.ny() - 1.0);
  const int i0 = std::min(static_cast<int>(std::floor(u)), field.nx() - 2);
  const int j0 = std::min(static_cast<int>(std::floor(v)), field.ny() - 2);
  const double wu = u - i0, wv = v - j0;
  // The top layer center equals the surface value under the adiabatic mirror,
  // so the vertical interpolation weight collapses onto layer 0.
  const double t00 = field.at(i0, j0, 0), t10 = field.at(i0 + 1, j0, 0);
  const double t01 = field.at(i0, j0 + 1, 0), t11 = field.at(i0 + 1, j0 + 1, 0);
  s.temp_k = (1.0 - wv) * ((1.0 - wu) * t00 + wu * t10) + wv * ((1.0 - wu) * t01 + wu * t11);
  return s;
}

ScanResult run_scan(const ScanPlan& plan, const ScanController& controller, const SimConfig& sim,
                    const MaterialParams& material, const LaserParams& laser) {
  plan.validate();
  ThermalStepper stepper(material, laser, sim);
  ScanResult result;
  result.final_field = ThermalField::fit_to_plan(plan, sim, material.ambient_temp);
  ThermalField& field = result.final_field;

  const double dt = plan.sample_period_s;
  int k = 0;
  for (std::size_t ti = 0; ti < plan.tracks.size(); ++ti) {
    const Track& track = plan.tracks[ti];
    const double len = track.length();
    BeamState beam;
    beam.x_mm = track.x0;
    beam.y_mm = track.y0;
    beam.dir_x = (track.x1 - track.x0) / len;
    beam.dir_y = (track.y1 - track.y0) / len;
    double travelled = 0.0;
    int track_step = 0;
    while (travelled < len - 1e-9) {
      const double t = k * dt;
      const double plan_p = plan.power.eval(t);
      const double plan_v = plan.speed.eval(t);
      beam.speed_mm_s = plan_v;

      StepRecord rec;
      rec.step = k;
      rec.time_s = t;
      rec.x_mm = beam.x_mm;
      rec.y_mm = beam.y_mm;
      rec.track = static_cast<int>(ti);
      rec.track_step = track_step;
      rec.melt_area_mm2 = melt_area(field, beam, material.melt_temp, sim.melt_region);
      const LookaheadSample la = lookahead_temp(field, beam, dt, laser);
      rec.lookahead_temp_k = la.temp_k;
      rec.lookahead_clamped = la.clamped;

      ControlCommand cmd{plan_p, plan_v};
      if (controller) {
        StepObservation obs{k, t, rec.melt_area_mm2, rec.lookahead_temp_k, rec.track, track_step, plan_p, plan_v};
        try {
          cmd = controller(obs);
        } catch (const std::exception& e) {
          result.aborted = true;
          result.error = std::string("controller failed at step ") + std::to_string(k) + ": " + e.what();
          return result;
        }
        cmd.power_w = std::clamp(cmd.power_w, sim.power_lower, sim.power_upper);
        cmd.speed_mm_s = std::clamp(cmd.speed_mm_s, sim.speed_lower, sim.speed_upper);
      }
      rec.power_w = cmd.power_w;
      rec.speed_mm_s = cmd.speed_mm_s;
      result.records.push_back(rec);

      beam.power_w = cmd.power_w;
      beam.speed_mm_s = cmd.speed_mm_s;
      try {
        stepper.step(field, beam, dt);
      } catch (const std::exception& e) {
        result.aborted = true;
        result.error = std::string("plant step failed at step ") + std::to_string(k) + ": " + e.what();
        return result;
      }
      travelled += cmd.speed_mm_s * dt;
      ++k;
      ++track_step;
    }
  }
  return result;
}

void to_json(nlohmann::json& j, const MaterialParams& m) {
  j = {{"density", m.density},
       {"specific_heat", m.specific_heat},
       {"conductivity", m.conductivity},
       {"melt_temp", m.melt_temp},
       {"ambient_temp", m.ambient_temp}};
}

void from_json(const nlohmann::json& j, MaterialParams& m) {
  const MaterialParams d;
  m.density = j.value("density", d.density);
  m.specific_heat = j.value("specific_heat", d.specific_heat);
  m.conductivity = j.value("conductivity", d.conductivity);
  m.melt_temp = j.value("melt_temp", d.melt_temp);
  m.ambient_temp = j.value("ambient_temp", d.ambient_temp);
  m.validate();
}

void to_json(nlohmann::json& j, const LaserParams& l) {
  j = {{"absorptivity", l.absorptivity},
       {"beam_radius_um", l.beam_radius_um},
       {"penetration_depth_um", l.penetration_depth_um}};
}

void from_json(const nlohmann::json& j, LaserParams& l) {
  const LaserParams d;
  l.absorptivity = j.value("absorptivity", d.absorptivity);
  l.beam_radius_um = j.value("beam_radius_um", d.beam_radius_um);
  l.penetration_depth_um = j.value("penetration_depth_um", d.penetration_depth_um);
  l.validate();
}

void to_json(nlohmann::json& j, const SimConfig& s) {
  j = {{"cell_size_um", s.cell_size_um},
       {"margin_x_mm", s.margin_x_mm},
       {"margin_y_mm", s.margin_y_mm},
       {"depth_mm", s.depth_mm},
       {"boundary", s.boundary == BoundaryMode::ambient_sides ? "ambient_sides" : "insulated"},
       {"stability_factor", s.stability_factor},
       {"melt_region", s.melt_region == MeltRegion::beam_pool ? "beam_pool" : "whole_plane"},
       {"power_bounds", {s.power_lower, s.power_upper}},
       {"speed_bounds", {s.speed_lower, s.speed_upper}}};
}

void from_json(const nlohmann::json& j, SimConfig& s) {
  const SimConfig d;
  s.cell_size_um = j.value("cell_size_um", d.cell_size_um);
  s.margin_x_mm = j.value("margin_x_mm", d.margin_x_mm);
  s.margin_y_mm = j.value("margin_y_mm", d.margin_y_mm);
  s.depth_mm = j.value("depth_mm", d.depth_mm);
  const auto b = j.value("boundary", std::string("ambient_sides"));
  if (b == "ambient_sides") {
    s.boundary = BoundaryMode::ambient_sides;
  } else if (b == "insulated") {
    s.boundary = BoundaryMode::insulated;
  } else {
    throw std::invalid_argument("unknown boundary mode: " + b);
  }
  s.stability_factor = j.value("stability_factor", d.stability_factor);
  const auto mr = j.value("melt_region", std::string("beam_pool"));
  if (mr == "beam_pool") {
    s.melt_region = MeltRegion::beam_pool;
  } else if (mr == "whole_plane") {
    s.melt_region = MeltRegion::whole_plane;
  } else {
    throw std::invalid_argument("unknown melt region: " + mr);
  }
  if (j.contains("power_bounds")) {
    const auto v = j.at("power_bounds").get<std::vector<double>>();
    s.power_lower = v.at(0);
    s.power_upper = v.at(1);
  }
  if (j.contains("speed_bounds")) {
    const auto v = j.at("speed_bounds").get<std::vector<double>>();
    s.speed_lower = v.at(0);
    s.speed_upper = v.at(1);
  }
  s.validate();
}

}  // namespace meltpool
