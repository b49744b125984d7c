#pragma once

// Experiment orchestration: data generation, training, open- and closed-loop
// runs on the surrogate plant, metrics, and plot-data emission.

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "meltpool/csv.hpp"
#include "meltpool/dynamics.hpp"
#include "meltpool/mpc.hpp"
#include "meltpool/scan_plan.hpp"
#include "meltpool/thermal.hpp"

namespace meltpool {

struct HarnessConfig {
  int tracks = 4;
  double track_length_mm = 10.0;
  double hatch_mm = 0.1;
  bool bidirectional = true;
  double open_loop_power = 250.0;
  double speed = 800.0;
  double sample_period_s = 50e-6;
  double startup_window_s = 1e-3;  // excluded from steady-state metrics per track
  bool record_solve_time = false;  // wall-clock times make CSVs non-reproducible

  void validate() const;
};

/// Constant-power multi-track test plan (4 x 10 mm by default).
ScanPlan make_track_test(const HarnessConfig& cfg);

struct RunRow {
  StepRecord plant;
  double cmd_power = 0.0;
  double mpc_power = 0.0;  // QP share of cmd_power, before feedforward
  double ff_term = 0.0;
  std::string solver_status = "none";
  int solver_iters = 0;
  double solve_time_s = 0.0;
};

struct Metrics {
  double overshoot_pct = 0.0;
  double undershoot_pct = 0.0;
  double rmse_pct = 0.0;
  std::size_t steady_samples = 0;
};

/// Sample masks; an empty mask selects every sample.
struct MetricWindows {
  std::vector<bool> extremes;  // samples considered for overshoot/undershoot
  std::vector<bool> steady;    // samples entering the RMSE
};

/// Overshoot = (max - x_ref)/x_ref, undershoot = (x_ref - min)/x_ref, both in
/// percent and floored at 0; RMSE over the steady mask in percent of x_ref.
Metrics compute_metrics(const std::vector<double>& series, double x_ref, const MetricWindows& windows = {});

/// Steady mask drops the first `startup_window_s` of every track; the extreme
/// mask drops it only for the first track (cold start).
MetricWindows startup_windows(const std::vector<StepRecord>& records, double sample_period_s,
                              double startup_window_s);

/// Largest overshoot (%) inside the start-up window of tracks 2..n.
double transition_overshoot_pct(const std::vector<StepRecord>& records, double x_ref, double sample_period_s,
                                 double startup_window_s);

/// Least-squares slope (W/s) of applied power against time per track,
/// outside the start-up window.
std::vector<double> power_slopes(const std::vector<StepRecord>& records, double sample_period_s,
                                 double startup_window_s);

struct RunReport {
  std::string csv_path;
  bool closed_loop = false;
  double x_ref = 0.0;
  Metrics metrics;
  double transition_overshoot_pct = 0.0;
  std::vector<double> power_slopes;
  double median_solve_s = 0.0, p95_solve_s = 0.0, max_solve_s = 0.0;
  std::vector<double> solve_times_s;
  int non_converged_steps = 0;
  nlohmann::json config;
  std::vector<RunRow> rows;
  bool aborted = false;
  std::string error;

  std::vector<StepRecord> records() const;
};

struct PlantSetup {
  SimConfig sim;
  MaterialParams material;
  LaserParams laser;
};

/// Closed loop with the MPC. Writes the run CSV when `csv_path` is non-empty,
/// also for aborted runs.
RunReport run_closed_loop(const ScanPlan& plan, std::shared_ptr<const DynModel> model, const MpcConfig& cfg,
                          const PlantSetup& plant, const HarnessConfig& harness, const std::string& csv_path = {});

/// Plan waveforms only; metrics against `x_ref`.
RunReport run_open_loop(const ScanPlan& plan, double x_ref, const PlantSetup& plant, const HarnessConfig& harness,
                        const std::string& csv_path = {});

/// Fills metrics, slopes and timing stats from `rows`.
void finalize_report(RunReport& report, double sample_period_s, const HarnessConfig& harness);

extern const std::vector<std::string> kRunExtraColumns;
CsvTable run_table(const std::vector<RunRow>& rows);
std::vector<RunRow> run_rows_from_table(const CsvTable& table);

/// "area", "power", "temp" (time series from the run) or "scatter" (pairs).
std::string plot_series(const std::vector<RunRow>& rows, const std::string& what);
std::string plot_scatter(const std::vector<std::pair<double, double>>& pairs);
/// Writes <dir>/<what>.dat and returns the path.
std::string emit_plotdata(const RunReport& report, const std::string& what, const std::string& dir);

struct CaseLog {
  int case_id = 0;
  ScanPlan plan;
  std::vector<StepRecord> records;
};

CaseLog generate_case(int case_id, const DatagenDefaults& defaults, const PlantSetup& plant);

struct TrainingSplit {
  std::vector<DynSample> train;
  std::vector<DynSample> validation;
  std::size_t total = 0;
};

TrainingSplit split_case_samples(const std::vector<CaseLog>& logs, std::size_t train_count, std::uint64_t seed,
                                 bool keep_transitions = true);

struct RolloutStats {
  std::vector<double> actual;
  std::vector<double> predicted;
  double mae_pct = 0.0;  // mean |predicted - actual| over mean actual, in percent
};

/// Free-runs the model from the first recorded area using the recorded
/// temperatures and inputs of `log`.
RolloutStats rollout_against_log(const DynModel& model, const std::vector<StepRecord>& log);

double median_of(std::vector<double> v);
double percentile_of(std::vector<double> v, double p);

void to_json(nlohmann::json& j, const HarnessConfig& c);
void from_json(const nlohmann::json& j, HarnessConfig& c);

}  // namespace meltpool
