#include "meltpool/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace meltpool {

using Eigen::Vector4d;

std::vector<DynSample> build_samples(const std::vector<StepRecord>& log, bool keep_transitions) {
  std::vector<DynSample> out;
  if (log.size() < 2) return out;
  const double period = log[1].time_s - log[0].time_s;
  if (!(period > 0.0)) throw std::invalid_argument("build_samples: records are not time-ordered");
  const double tol = 1e-9 * period + 1e-15;
  out.reserve(log.size() - 1);
  for (std::size_t i = 0; i + 1 < log.size(); ++i) {
    const auto& a = log[i];
    const auto& b = log[i + 1];
    const double d = b.time_s - a.time_s;
    if (!(d > 0.0)) throw std::invalid_argument("build_samples: records are not time-ordered at " + std::to_string(i));
    if (std::abs(d - period) > tol) throw std::invalid_argument("build_samples: mixed sample periods at " + std::to_string(i));
    const bool transition = a.track != b.track;
    if (transition && !keep_transitions) continue;
    out.push_back({a.melt_area_mm2, a.lookahead_temp_k, a.power_w, a.speed_mm_s, b.melt_area_mm2, transition});
  }
  return out;
}

namespace {

Vector4d sample_input(const DynSample& s) { return {s.area, s.temp, s.power, s.speed}; }

}  // namespace

Normalizer Normalizer::fit(const std::vector<DynSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("Normalizer::fit: no samples");
  const double m = static_cast<double>(samples.size());
  Vector4d mean = Vector4d::Zero();
  double tmean = 0.0;
  for (const auto& s : samples) {
    mean += sample_input(s);
    tmean += s.next_area;
  }
  mean /= m;
  tmean /= m;
  Vector4d var = Vector4d::Zero();
  double tvar = 0.0;
  for (const auto& s : samples) {
    var += (sample_input(s) - mean).array().square().matrix();
    tvar += (s.next_area - tmean) * (s.next_area - tmean);
  }
  var /= m;
  tvar /= m;

  static const char* names[] = {"area", "temp", "power", "speed"};
  Normalizer n;
  for (int i = 0; i < kDynInputDim; ++i) {
    const double sd = std::sqrt(var[i]);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean[i]))))
      throw std::invalid_argument(std::string("Normalizer::fit: zero spread in input '") + names[i] + "'");
    n.input_mean[i] = mean[i];
    n.input_std[i] = sd;
  }
  const double tsd = std::sqrt(tvar);
  if (!(tsd > 1e-12 * std::max(1.0, std::abs(tmean))))
    throw std::invalid_argument("Normalizer::fit: zero spread in target");
  n.target_mean = tmean;
  n.target_std = tsd;
  return n;
}

Vector4d Normalizer::normalize_input(const Vector4d& z) const {
  Vector4d u;
  for (int i = 0; i < kDynInputDim; ++i) u[i] = (z[i] - input_mean[i]) / input_std[i];
  return u;
}

Vector4d Normalizer::denormalize_input(const Vector4d& u) const {
  Vector4d z;
  for (int i = 0; i < kDynInputDim; ++i) z[i] = u[i] * input_std[i] + input_mean[i];
  return z;
}

void Normalizer::validate() const {
  for (int i = 0; i < kDynInputDim; ++i) {
    if (!std::isfinite(input_mean[i]) || !(input_std[i] > 0.0) || !std::isfinite(input_std[i]))
      throw std::invalid_argument("Normalizer: bad input statistics");
  }
  if (!std::isfinite(target_mean) || !(target_std > 0.0) || !std::isfinite(target_std))
    throw std::invalid_argument("Normalizer: bad target statistics");
}

DynModel::DynModel(gp::TrainedGP gp, Normalizer normalizer, double sample_period_s)
    : gp_(std::move(gp)), norm_(normalizer), dt_(sample_period_s) {
  if (gp_.input_dim() != kDynInputDim) throw std::invalid_argument("DynModel: GP input dimension must be 4");
  if (!(dt_ > 0.0)) throw std::invalid_argument("DynModel: sample period must be > 0");
  norm_.validate();
}

double DynModel::predict_raw(double area, double temp, double power, double speed) const {
  const Vector4d z{area, temp, power, speed};
  if (!z.allFinite()) throw std::invalid_argument("DynModel: non-finite input");
  return norm_.denormalize_target(gp_.predict_mean(norm_.normalize_input(z)));
}

double DynModel::predict_next(double area, double temp, double power, double speed) const {
  return std::max(0.0, predict_raw(area, temp, power, speed));
}

Linearization DynModel::linearize(double area, double temp, double power, double speed) const {
  const Vector4d z{area, temp, power, speed};
  if (!z.allFinite()) throw std::invalid_argument("DynModel: non-finite input");
  const Vector4d u = norm_.normalize_input(z);
  const Eigen::VectorXd g = gp_.predict_mean_grad(u);
  Linearization lin;
  lin.a_d = norm_.target_std * g[0] / norm_.input_std[0];
  lin.b_d[0] = norm_.target_std * g[2] / norm_.input_std[2];
  lin.b_d[1] = norm_.target_std * g[3] / norm_.input_std[3];
  lin.area = area;
  lin.temp = temp;
  lin.power = power;
  lin.speed = speed;
  lin.predicted = predict_next(area, temp, power, speed);
  lin.c_d = lin.predicted - lin.a_d * area - lin.b_d[0] * power - lin.b_d[1] * speed;
  return lin;
}

nlohmann::json DynModel::to_json() const {
  nlohmann::json j;
  j["format"] = "meltpool.dynmodel";
  j["version"] = 1;
  j["sample_period_s"] = dt_;
  j["normalizer"] = {{"input_mean", norm_.input_mean},
                     {"input_std", norm_.input_std},
                     {"target_mean", norm_.target_mean},
                     {"target_std", norm_.target_std}};
  j["gp"] = gp_.to_json();
  return j;
}

DynModel DynModel::from_json(const nlohmann::json& doc) {
  if (doc.value("format", std::string{}) != "meltpool.dynmodel")
    throw std::invalid_argument("DynModel::from_json: not a dynamics model document");
  if (doc.value("version", 0) != 1) throw std::invalid_argument("DynModel::from_json: unsupported version");
  Normalizer n;
  const auto& jn = doc.at("normalizer");
  n.input_mean = jn.at("input_mean").get<std::array<double, kDynInputDim>>();
  n.input_std = jn.at("input_std").get<std::array<double, kDynInputDim>>();
  n.target_mean = jn.at("target_mean").get<double>();
  n.target_std = jn.at("target_std").get<double>();
  return DynModel(gp::TrainedGP::from_json(doc.at("gp")), n, doc.at("sample_period_s").get<double>());
}

DynModel train_dynamics(const std::vector<DynSample>& samples, const DynTrainConfig& config, double sample_period_s,
                        gp::OptimizationResult* report) {
  if (samples.size() < 2) throw std::invalid_argument("train_dynamics: need at least 2 samples");
  const Normalizer norm = Normalizer::fit(samples);
  gp::Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(samples.size()), kDynInputDim);
  data.targets.resize(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    data.inputs.row(r) = norm.normalize_input(sample_input(samples[i])).transpose();
    data.targets[r] = norm.normalize_target(samples[i].next_area);
  }
  gp::Hyperparams init;
  init.sigma_f = config.init_sigma_f;
  init.sigma_n = config.init_sigma_n;
  init.lengthscales = Eigen::VectorXd::Constant(kDynInputDim, config.init_lengthscale);
  auto opt = gp::optimize_hyperparams(data, init, config.optimizer);
  if (report) *report = opt;
  auto gp = gp::TrainedGP::fit(std::move(data), opt.hyperparams, config.optimizer.jitter);
  return DynModel(std::move(gp), norm, sample_period_s);
}

std::vector<double> rollout(const DynModel& model, double x0, const std::vector<double>& temps,
                            const std::vector<Eigen::Vector2d>& inputs) {
  if (temps.size() != inputs.size()) throw std::invalid_argument("rollout: temperature and input lengths differ");
  std::vector<double> xs;
  xs.reserve(inputs.size() + 1);
  xs.push_back(x0);
  for (std::size_t k = 0; k < inputs.size(); ++k)
    xs.push_back(model.predict_next(xs.back(), temps[k], inputs[k][0], inputs[k][1]));
  return xs;
}

ValidationStats validate_model(const DynModel& model, const std::vector<DynSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("validate_model: no samples");
  ValidationStats st;
  st.count = samples.size();
  double mean = 0.0;
  for (const auto& s : samples) mean += s.next_area;
  mean /= static_cast<double>(samples.size());
  double ss_res = 0.0, ss_tot = 0.0, abs_err = 0.0, abs_y = 0.0;
  st.pairs.reserve(samples.size());
  for (const auto& s : samples) {
    const double p = model.predict_next(s.area, s.temp, s.power, s.speed);
    const double e = p - s.next_area;
    ss_res += e * e;
    ss_tot += (s.next_area - mean) * (s.next_area - mean);
    abs_err += std::abs(e);
    abs_y += std::abs(s.next_area);
    st.pairs.emplace_back(s.next_area, p);
  }
  st.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  st.mae_pct = abs_y > 0.0 ? 100.0 * abs_err / abs_y : 0.0;
  st.rmse = std::sqrt(ss_res / static_cast<double>(samples.size()));
  return st;
}

void gp::to_json(nlohmann::json& j, const gp::OptimizerConfig& c) {
  j = {{"max_iterations", c.max_iterations}, {"tolerance", c.tolerance}, {"restarts", c.restarts},
       {"seed", c.seed},                     {"restart_spread", c.restart_spread},
       {"log_bound", c.log_bound},           {"jitter", c.jitter},
       {"min_sigma_n", c.min_sigma_n},       {"min_lengthscale", c.min_lengthscale},
       {"max_lengthscale", c.max_lengthscale}};
}

void gp::from_json(const nlohmann::json& j, gp::OptimizerConfig& c) {
  const gp::OptimizerConfig d = c;  // absent keys keep the current values
  c.max_iterations = j.value("max_iterations", d.max_iterations);
  c.tolerance = j.value("tolerance", d.tolerance);
  c.restarts = j.value("restarts", d.restarts);
  c.seed = j.value("seed", d.seed);
  c.restart_spread = j.value("restart_spread", d.restart_spread);
  c.log_bound = j.value("log_bound", d.log_bound);
  c.jitter = j.value("jitter", d.jitter);
  c.min_sigma_n = j.value("min_sigma_n", d.min_sigma_n);
  c.min_lengthscale = j.value("min_lengthscale", d.min_lengthscale);
  c.max_lengthscale = j.value("max_lengthscale", d.max_lengthscale);
}

void to_json(nlohmann::json& j, const DynTrainConfig& c) {
  j = {{"optimizer", c.optimizer},
       {"init_sigma_f", c.init_sigma_f},
       {"init_sigma_n", c.init_sigma_n},
       {"init_lengthscale", c.init_lengthscale}};
}

void from_json(const nlohmann::json& j, DynTrainConfig& c) {
  DynTrainConfig d;
  c.optimizer = d.optimizer;
  if (j.contains("optimizer")) gp::from_json(j.at("optimizer"), c.optimizer);
  c.init_sigma_f = j.value("init_sigma_f", d.init_sigma_f);
  c.init_sigma_n = j.value("init_sigma_n", d.init_sigma_n);
  c.init_lengthscale = j.value("init_lengthscale", d.init_lengthscale);
}

}  // namespace meltpool
