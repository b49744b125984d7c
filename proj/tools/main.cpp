// meltpool: data generation, training, validation, open/closed-loop runs and
// the co-simulation server from one binary.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "meltpool/config.hpp"
#include "meltpool/cosim.hpp"
#include "meltpool/csv.hpp"
#include "meltpool/dynamics.hpp"
#include "meltpool/harness.hpp"

namespace fs = std::filesystem;
using namespace meltpool;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig cfg;
  if (!g.config_path.empty()) cfg = load_experiment_config(g.config_path);
  if (g.seed) cfg.apply_seed(*g.seed);
  cfg.validate();
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

fs::path case_csv(const fs::path& dir, int id) { return dir / ("case" + std::to_string(id) + ".csv"); }

std::vector<CaseLog> load_cases(const ExperimentConfig& cfg, const fs::path& dir) {
  std::vector<CaseLog> logs;
  for (int id = 1; id <= kTrainingCaseCount; ++id) {
    CaseLog log;
    log.case_id = id;
    log.plan = make_case(id, cfg.datagen);
    const auto path = case_csv(dir, id);
    if (!fs::exists(path)) throw std::runtime_error(path.string() + " is missing; run `meltpool datagen` first");
    log.records = read_scan_log(path.string());
    logs.push_back(std::move(log));
  }
  return logs;
}

std::shared_ptr<const DynModel> load_model(const fs::path& path) {
  return std::make_shared<const DynModel>(DynModel::from_json(read_json(path)));
}

json metrics_json(const RunReport& r) {
  return {{"overshoot_pct", r.metrics.overshoot_pct},
          {"undershoot_pct", r.metrics.undershoot_pct},
          {"rmse_pct", r.metrics.rmse_pct},
          {"steady_samples", r.metrics.steady_samples},
          {"transition_overshoot_pct", r.transition_overshoot_pct},
          {"power_slopes_W_per_s", r.power_slopes},
          {"x_ref", r.x_ref},
          {"steps", r.rows.size()},
          {"aborted", r.aborted},
          {"error", r.error}};
}

int cmd_datagen(const Globals& g) {
  const auto cfg = load(g);
  const fs::path dir = fs::path(g.out_dir) / "datagen";
  fs::create_directories(dir);
  std::size_t total = 0;
  for (int id = 1; id <= kTrainingCaseCount; ++id) {
    const CaseLog log = generate_case(id, cfg.datagen, cfg.plant());
    write_json(dir / ("case" + std::to_string(id) + ".plan.json"), json(log.plan));
    write_scan_log(case_csv(dir, id).string(), log.records);
    total += log.records.size();
    std::printf("case %d: %zu records\n", id, log.records.size());
  }
  std::printf("%zu records in %s\n", total, dir.c_str());
  return 0;
}

int cmd_train(const Globals& g) {
  const auto cfg = load(g);
  const fs::path out(g.out_dir);
  const auto logs = load_cases(cfg, out / "datagen");
  const auto split = split_case_samples(logs, cfg.training.train_count, cfg.training.split_seed,
                                        cfg.training.keep_transitions);
  gp::OptimizationResult opt;
  const DynModel model = train_dynamics(split.train, cfg.training.dynamics, cfg.datagen.sample_period_s, &opt);
  write_json(out / "model.json", model.to_json());
  const auto& hp = opt.hyperparams;
  json report = {{"samples_total", split.total},
                 {"samples_train", split.train.size()},
                 {"samples_validation", split.validation.size()},
                 {"log_marginal", opt.log_marginal},
                 {"initial_log_marginal", opt.initial_log_marginal},
                 {"grad_max_norm", opt.grad_max_norm},
                 {"converged", opt.converged},
                 {"iterations", opt.iterations},
                 {"sigma_f", hp.sigma_f},
                 {"sigma_n", hp.sigma_n},
                 {"lengthscales", std::vector<double>(hp.lengthscales.data(), hp.lengthscales.data() + hp.dim())}};
  write_json(out / "train_report.json", report);
  std::printf("trained on %zu of %zu samples, log marginal %.6g\n", split.train.size(), split.total,
              opt.log_marginal);
  return 0;
}

int cmd_validate(const Globals& g) {
  const auto cfg = load(g);
  const fs::path out(g.out_dir);
  const auto logs = load_cases(cfg, out / "datagen");
  const auto split = split_case_samples(logs, cfg.training.train_count, cfg.training.split_seed,
                                        cfg.training.keep_transitions);
  const auto model = load_model(out / "model.json");
  const auto stats = validate_model(*model, split.validation);
  const auto roll = rollout_against_log(*model, logs[1].records);
  {
    fs::create_directories(out / "plots");
    std::ofstream f(out / "plots" / "scatter.dat", std::ios::binary);
    f << plot_scatter(stats.pairs);
    std::ofstream r(out / "plots" / "rollout_case2.dat", std::ios::binary);
    r << "# step actual_mm2 predicted_mm2\n";
    for (std::size_t k = 0; k < roll.actual.size(); ++k)
      r << k + 1 << ' ' << format_number(roll.actual[k]) << ' ' << format_number(roll.predicted[k]) << '\n';
  }
  json report = {{"r2", stats.r2},
                 {"mae_pct", stats.mae_pct},
                 {"rmse_mm2", stats.rmse},
                 {"validation_samples", stats.count},
                 {"rollout_case2_mae_pct", roll.mae_pct}};
  write_json(out / "validation.json", report);
  std::printf("R2 %.4f  MAE %.2f %%  rollout(case 2) MAE %.2f %%\n", stats.r2, stats.mae_pct, roll.mae_pct);
  return 0;
}

void emit_all_plots(const RunReport& report, const fs::path& dir) {
  for (const char* what : {"area", "power", "temp"}) emit_plotdata(report, what, dir.string());
}

int cmd_simulate(const Globals& g) {
  const auto cfg = load(g);
  const fs::path out(g.out_dir);
  const auto plan = make_track_test(cfg.harness);
  const auto report = run_open_loop(plan, cfg.mpc.x_ref, cfg.plant(), cfg.harness, (out / "open_loop.csv").string());
  emit_all_plots(report, out / "plots" / "open_loop");
  write_json(out / "open_loop_report.json", metrics_json(report));
  std::printf("open loop: %zu steps, transition overshoot %.1f %%\n", report.rows.size(),
              report.transition_overshoot_pct);
  return report.aborted ? 1 : 0;
}

int cmd_control(const Globals& g) {
  const auto cfg = load(g);
  const fs::path out(g.out_dir);
  const auto model = load_model(out / "model.json");
  const auto plan = make_track_test(cfg.harness);
  const auto report =
      run_closed_loop(plan, model, cfg.mpc, cfg.plant(), cfg.harness, (out / "closed_loop.csv").string());
  emit_all_plots(report, out / "plots" / "closed_loop");
  json j = metrics_json(report);
  j["median_solve_s"] = report.median_solve_s;
  j["p95_solve_s"] = report.p95_solve_s;
  j["max_solve_s"] = report.max_solve_s;
  j["non_converged_steps"] = report.non_converged_steps;
  j["config"] = report.config;
  write_json(out / "closed_loop_report.json", j);
  std::printf("closed loop: %zu steps, RMSE %.2f %%, transition overshoot %.1f %%, median solve %.3f ms\n",
              report.rows.size(), report.metrics.rmse_pct, report.transition_overshoot_pct,
              report.median_solve_s * 1e3);
  if (report.aborted) std::fprintf(stderr, "run aborted: %s\n", report.error.c_str());
  return report.aborted ? 1 : 0;
}

int cmd_metrics(const Globals& g, const std::string& csv, std::optional<double> x_ref) {
  const auto cfg = load(g);
  RunReport report;
  report.rows = run_rows_from_table(read_csv_file(csv));
  report.x_ref = x_ref.value_or(cfg.mpc.x_ref);
  finalize_report(report, cfg.harness.sample_period_s, cfg.harness);
  std::cout << metrics_json(report).dump(2) << '\n';
  return 0;
}

int cmd_cosim(const Globals& g, int port, bool print_hash) {
  const auto cfg = load(g);
  if (print_hash) {
    std::cout << config_hash(cfg.mpc) << '\n';
    return 0;
  }
  const auto model = load_model(fs::path(g.out_dir) / "model.json");
  CosimSummary s;
  if (port >= 0) {
    s = cosim_serve_tcp(port, model, cfg.mpc, [](int p) { std::fprintf(stderr, "listening on 127.0.0.1:%d\n", p); });
  } else {
    s = cosim_serve_stream(std::cin, std::cout, model, cfg.mpc);
  }
  std::fprintf(stderr, "session: %d observations, %d errors%s%s\n", s.observations, s.errors,
               s.refusal.empty() ? "" : ", refused: ", s.refusal.c_str());
  return s.refusal.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"melt-pool learning control toolkit"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "experiment configuration (JSON)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "override every seed in the configuration");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();

  auto* datagen = app.add_subcommand("datagen", "simulate the nine training cases");
  auto* train = app.add_subcommand("train", "fit the dynamics model");
  auto* validate = app.add_subcommand("validate", "score the model on held-out samples");
  auto* simulate = app.add_subcommand("simulate", "open-loop track test");
  auto* control = app.add_subcommand("control", "closed-loop track test");
  auto* metrics = app.add_subcommand("metrics", "metrics of a run CSV");
  std::string metrics_csv;
  std::optional<double> metrics_ref;
  metrics->add_option("csv", metrics_csv, "run CSV")->required()->check(CLI::ExistingFile);
  metrics->add_option("--x-ref", metrics_ref, "set point (mm^2)");
  auto* cosim = app.add_subcommand("cosim", "serve the controller over NDJSON");
  int port = -1;
  bool print_hash = false;
  cosim->add_option("--port", port, "TCP port on 127.0.0.1 (default: stdin/stdout)");
  cosim->add_flag("--print-hash", print_hash, "print the config hash expected in hello and exit");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;

  try {
    if (*datagen) return cmd_datagen(g);
    if (*train) return cmd_train(g);
    if (*validate) return cmd_validate(g);
    if (*simulate) return cmd_simulate(g);
    if (*control) return cmd_control(g);
    if (*metrics) return cmd_metrics(g, metrics_csv, metrics_ref);
    if (*cosim) return cmd_cosim(g, port, print_hash);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
