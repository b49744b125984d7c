#include "meltpool/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace meltpool {

void HarnessConfig::validate() const {
  if (tracks < 1) throw std::invalid_argument("HarnessConfig: tracks must be >= 1");
  if (!(track_length_mm > 0.0)) throw std::invalid_argument("HarnessConfig: track length must be > 0");
  if (tracks > 1 && !(hatch_mm > 0.0)) throw std::invalid_argument("HarnessConfig: hatch must be > 0");
  if (!(speed > 0.0)) throw std::invalid_argument("HarnessConfig: speed must be > 0");
  if (!(sample_period_s > 0.0)) throw std::invalid_argument("HarnessConfig: sample period must be > 0");
  if (!(startup_window_s >= 0.0)) throw std::invalid_argument("HarnessConfig: start-up window must be >= 0");
}

ScanPlan make_track_test(const HarnessConfig& cfg) {
  cfg.validate();
  ScanPlan plan;
  plan.name = "track-test";
  plan.tracks = raster_tracks(cfg.tracks, cfg.track_length_mm, cfg.hatch_mm, cfg.bidirectional);
  plan.hatch_mm = cfg.hatch_mm;
  plan.bidirectional = cfg.bidirectional;
  plan.power = Waveform::constant(cfg.open_loop_power, 0.0, std::max(350.0, cfg.open_loop_power));
  plan.speed = Waveform::constant(cfg.speed, std::min(400.0, cfg.speed), std::max(1200.0, cfg.speed));
  plan.sample_period_s = cfg.sample_period_s;
  return plan;
}

Metrics compute_metrics(const std::vector<double>& series, double x_ref, const MetricWindows& windows) {
  if (series.empty()) throw std::invalid_argument("compute_metrics: empty series");
  if (!(x_ref > 0.0)) throw std::invalid_argument("compute_metrics: x_ref must be > 0");
  auto selected = [&](const std::vector<bool>& mask, std::size_t i) { return mask.empty() || mask.at(i); };
  double hi = -INFINITY, lo = INFINITY, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (selected(windows.extremes, i)) {
      hi = std::max(hi, series[i]);
      lo = std::min(lo, series[i]);
    }
    if (selected(windows.steady, i)) {
      const double e = series[i] - x_ref;
      sq += e * e;
      ++n;
    }
  }
  Metrics m;
  if (std::isfinite(hi)) {
    m.overshoot_pct = std::max(0.0, (hi - x_ref) / x_ref * 100.0);
    m.undershoot_pct = std::max(0.0, (x_ref - lo) / x_ref * 100.0);
  }
  m.steady_samples = n;
  m.rmse_pct = n ? std::sqrt(sq / static_cast<double>(n)) / x_ref * 100.0 : 0.0;
  return m;
}

namespace {

bool in_startup(const StepRecord& r, double dt, double window) {
  // track_step * dt < window, with a little slack against rounding
  return r.track_step * dt < window - 1e-12;
}

}  // namespace

MetricWindows startup_windows(const std::vector<StepRecord>& records, double dt, double window) {
  MetricWindows w;
  w.extremes.resize(records.size());
  w.steady.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool start = in_startup(records[i], dt, window);
    w.steady[i] = !start;
    w.extremes[i] = !(start && records[i].track == records.front().track);
  }
  return w;
}

double transition_overshoot_pct(const std::vector<StepRecord>& records, double x_ref, double dt, double window) {
  if (records.empty()) throw std::invalid_argument("transition_overshoot_pct: empty log");
  double peak = -INFINITY;
  for (const auto& r : records)
    if (r.track != records.front().track && in_startup(r, dt, window)) peak = std::max(peak, r.melt_area_mm2);
  if (!std::isfinite(peak)) return 0.0;
  return std::max(0.0, (peak - x_ref) / x_ref * 100.0);
}

std::vector<double> power_slopes(const std::vector<StepRecord>& records, double dt, double window) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < records.size()) {
    const int track = records[i].track;
    double st = 0, sp = 0, stt = 0, stp = 0;
    std::size_t n = 0;
    for (; i < records.size() && records[i].track == track; ++i) {
      const auto& r = records[i];
      if (in_startup(r, dt, window)) continue;
      st += r.time_s;
      sp += r.power_w;
      stt += r.time_s * r.time_s;
      stp += r.time_s * r.power_w;
      ++n;
    }
    double slope = 0.0;
    if (n >= 2) {
      const double dn = static_cast<double>(n);
      const double den = dn * stt - st * st;
      if (den > 0.0) slope = (dn * stp - st * sp) / den;
    }
    out.push_back(slope);
  }
  return out;
}

std::vector<StepRecord> RunReport::records() const {
  std::vector<StepRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.plant);
  return out;
}

double median_of(std::vector<double> v) { return percentile_of(std::move(v), 50.0); }

double percentile_of(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void finalize_report(RunReport& report, double dt, const HarnessConfig& harness) {
  const auto recs = report.records();
  if (recs.empty()) return;
  std::vector<double> area;
  area.reserve(recs.size());
  for (const auto& r : recs) area.push_back(r.melt_area_mm2);
  report.metrics = compute_metrics(area, report.x_ref, startup_windows(recs, dt, harness.startup_window_s));
  report.transition_overshoot_pct = transition_overshoot_pct(recs, report.x_ref, dt, harness.startup_window_s);
  report.power_slopes = power_slopes(recs, dt, harness.startup_window_s);
  if (!report.solve_times_s.empty()) {
    report.median_solve_s = median_of(report.solve_times_s);
    report.p95_solve_s = percentile_of(report.solve_times_s, 95.0);
    report.max_solve_s = *std::max_element(report.solve_times_s.begin(), report.solve_times_s.end());
  }
}

const std::vector<std::string> kRunExtraColumns = {"cmd_power_W", "mpc_power_W", "ff_term_W", "solver_status", "solver_iters",
                                                   "solve_time_s"};

CsvTable run_table(const std::vector<RunRow>& rows) {
  std::vector<StepRecord> recs;
  recs.reserve(rows.size());
  for (const auto& r : rows) recs.push_back(r.plant);
  CsvTable t = scan_log_table(recs);
  t.header.insert(t.header.end(), kRunExtraColumns.begin(), kRunExtraColumns.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    auto& f = t.rows[i];
    f.push_back(format_number(r.cmd_power));
    f.push_back(format_number(r.mpc_power));
    f.push_back(format_number(r.ff_term));
    f.push_back(r.solver_status);
    f.push_back(std::to_string(r.solver_iters));
    f.push_back(format_number(r.solve_time_s));
  }
  return t;
}

std::vector<RunRow> run_rows_from_table(const CsvTable& table) {
  const auto recs = scan_log_from_table(table);
  std::vector<RunRow> rows(recs.size());
  const bool extra = table.has_column("cmd_power_W");
  for (std::size_t i = 0; i < recs.size(); ++i) {
    rows[i].plant = recs[i];
    if (!extra) {
      rows[i].cmd_power = recs[i].power_w;
      rows[i].mpc_power = recs[i].power_w;
      continue;
    }
    const auto& f = table.rows[i];
    rows[i].cmd_power = parse_number(f[table.column("cmd_power_W")]);
    rows[i].mpc_power = parse_number(f[table.column("mpc_power_W")]);
    rows[i].ff_term = parse_number(f[table.column("ff_term_W")]);
    rows[i].solver_status = f[table.column("solver_status")];
    rows[i].solver_iters = static_cast<int>(parse_number(f[table.column("solver_iters")]));
    rows[i].solve_time_s = parse_number(f[table.column("solve_time_s")]);
  }
  return rows;
}

namespace {

void write_report_csv(const RunReport& report) {
  if (report.csv_path.empty()) return;
  const auto parent = std::filesystem::path(report.csv_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_csv_file(report.csv_path, run_table(report.rows));
}

}  // namespace

RunReport run_closed_loop(const ScanPlan& plan, std::shared_ptr<const DynModel> model, const MpcConfig& cfg,
                          const PlantSetup& plant, const HarnessConfig& harness, const std::string& csv_path) {
  harness.validate();
  cfg.validate();
  RunReport report;
  report.closed_loop = true;
  report.csv_path = csv_path;
  report.x_ref = cfg.x_ref;
  nlohmann::json jcfg = cfg;
  report.config = {{"mpc", jcfg}, {"harness", harness}, {"sim", plant.sim},
                   {"material", plant.material}, {"laser", plant.laser}};

  MpcController controller(std::move(model), cfg);
  std::vector<ControlOutput> outputs;
  ScanController cb = [&](const StepObservation& obs) {
    const ControlOutput out = controller.step(obs.melt_area_mm2, obs.lookahead_temp_k);
    outputs.push_back(out);
    return ControlCommand{out.power, out.speed};
  };
  ScanResult scan = run_scan(plan, cb, plant.sim, plant.material, plant.laser);
  report.aborted = scan.aborted;
  report.error = scan.error;
  report.rows.resize(scan.records.size());
  for (std::size_t i = 0; i < scan.records.size(); ++i) {
    RunRow& row = report.rows[i];
    row.plant = scan.records[i];
    if (i < outputs.size()) {
      const auto& o = outputs[i];
      row.cmd_power = o.power;
      row.mpc_power = o.mpc_power;
      row.ff_term = o.ff_term;
      row.solver_status = to_string(o.status);
      row.solver_iters = o.iterations;
      row.solve_time_s = harness.record_solve_time ? o.solve_time_s : 0.0;
      if (o.status != QpStatus::converged) ++report.non_converged_steps;
    }
  }
  report.solve_times_s.reserve(outputs.size());
  for (const auto& o : outputs) report.solve_times_s.push_back(o.solve_time_s);
  finalize_report(report, plan.sample_period_s, harness);
  write_report_csv(report);
  return report;
}

RunReport run_open_loop(const ScanPlan& plan, double x_ref, const PlantSetup& plant, const HarnessConfig& harness,
                        const std::string& csv_path) {
  harness.validate();
  if (!(x_ref > 0.0)) throw std::invalid_argument("run_open_loop: x_ref must be > 0");
  RunReport report;
  report.csv_path = csv_path;
  report.x_ref = x_ref;
  report.config = {{"plan", plan}, {"harness", harness}, {"sim", plant.sim},
                   {"material", plant.material}, {"laser", plant.laser}};
  ScanResult scan = run_scan(plan, nullptr, plant.sim, plant.material, plant.laser);
  report.aborted = scan.aborted;
  report.error = scan.error;
  report.rows.resize(scan.records.size());
  for (std::size_t i = 0; i < scan.records.size(); ++i) {
    report.rows[i].plant = scan.records[i];
    report.rows[i].cmd_power = scan.records[i].power_w;
    report.rows[i].mpc_power = scan.records[i].power_w;
  }
  finalize_report(report, plan.sample_period_s, harness);
  write_report_csv(report);
  return report;
}

std::string plot_series(const std::vector<RunRow>& rows, const std::string& what) {
  std::ostringstream out;
  if (what == "area") {
    out << "# time_s melt_area_mm2\n";
    for (const auto& r : rows) out << format_number(r.plant.time_s) << ' ' << format_number(r.plant.melt_area_mm2) << '\n';
  } else if (what == "power") {
    out << "# time_s power_W cmd_power_W\n";
    for (const auto& r : rows)
      out << format_number(r.plant.time_s) << ' ' << format_number(r.plant.power_w) << ' '
          << format_number(r.cmd_power) << '\n';
  } else if (what == "temp") {
    out << "# time_s lookahead_T_K\n";
    for (const auto& r : rows)
      out << format_number(r.plant.time_s) << ' ' << format_number(r.plant.lookahead_temp_k) << '\n';
  } else {
    throw std::invalid_argument("unknown plot series '" + what + "'");
  }
  return out.str();
}

std::string plot_scatter(const std::vector<std::pair<double, double>>& pairs) {
  std::ostringstream out;
  out << "# actual_mm2 predicted_mm2\n";
  for (const auto& [a, p] : pairs) out << format_number(a) << ' ' << format_number(p) << '\n';
  return out.str();
}

std::string emit_plotdata(const RunReport& report, const std::string& what, const std::string& dir) {
  const std::string text = plot_series(report.rows, what);
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / (what + ".dat")).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  return path;
}

CaseLog generate_case(int case_id, const DatagenDefaults& defaults, const PlantSetup& plant) {
  CaseLog log;
  log.case_id = case_id;
  log.plan = make_case(case_id, defaults);
  ScanResult scan = run_scan(log.plan, nullptr, plant.sim, plant.material, plant.laser);
  if (scan.aborted) throw std::runtime_error("case " + std::to_string(case_id) + ": " + scan.error);
  log.records = std::move(scan.records);
  return log;
}

TrainingSplit split_case_samples(const std::vector<CaseLog>& logs, std::size_t train_count, std::uint64_t seed,
                                 bool keep_transitions) {
  std::vector<DynSample> pool;
  for (const auto& log : logs) {
    auto s = build_samples(log.records, keep_transitions);
    pool.insert(pool.end(), s.begin(), s.end());
  }
  TrainingSplit split;
  split.total = pool.size();
  auto [train, valid] = subsample_split(pool, train_count, seed);
  split.train = std::move(train);
  split.validation = std::move(valid);
  return split;
}

RolloutStats rollout_against_log(const DynModel& model, const std::vector<StepRecord>& log) {
  if (log.size() < 2) throw std::invalid_argument("rollout_against_log: need at least 2 records");
  std::vector<double> temps;
  std::vector<Eigen::Vector2d> inputs;
  for (std::size_t k = 0; k + 1 < log.size(); ++k) {
    temps.push_back(log[k].lookahead_temp_k);
    inputs.emplace_back(log[k].power_w, log[k].speed_mm_s);
  }
  RolloutStats st;
  const auto xs = rollout(model, log.front().melt_area_mm2, temps, inputs);
  double err = 0.0, sum = 0.0;
  for (std::size_t k = 1; k < log.size(); ++k) {
    st.actual.push_back(log[k].melt_area_mm2);
    st.predicted.push_back(xs[k]);
    err += std::abs(xs[k] - log[k].melt_area_mm2);
    sum += log[k].melt_area_mm2;
  }
  st.mae_pct = sum > 0.0 ? 100.0 * err / sum : 0.0;
  return st;
}

void to_json(nlohmann::json& j, const HarnessConfig& c) {
  j = {{"tracks", c.tracks},
       {"track_length_mm", c.track_length_mm},
       {"hatch_mm", c.hatch_mm},
       {"bidirectional", c.bidirectional},
       {"open_loop_power", c.open_loop_power},
       {"speed", c.speed},
       {"sample_period_s", c.sample_period_s},
       {"startup_window_s", c.startup_window_s},
       {"record_solve_time", c.record_solve_time}};
}

void from_json(const nlohmann::json& j, HarnessConfig& c) {
  const HarnessConfig d;
  c.tracks = j.value("tracks", d.tracks);
  c.track_length_mm = j.value("track_length_mm", d.track_length_mm);
  c.hatch_mm = j.value("hatch_mm", d.hatch_mm);
  c.bidirectional = j.value("bidirectional", d.bidirectional);
  c.open_loop_power = j.value("open_loop_power", d.open_loop_power);
  c.speed = j.value("speed", d.speed);
  c.sample_period_s = j.value("sample_period_s", d.sample_period_s);
  c.startup_window_s = j.value("startup_window_s", d.startup_window_s);
  c.record_solve_time = j.value("record_solve_time", d.record_solve_time);
  c.validate();
}

}  // namespace meltpool
