#pragma once

// One-step melt-pool dynamics x_{k+1} = f(x_k, T_k, p_k, v_k) learned by a GP
// over standardized inputs and targets.

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "meltpool/gp.hpp"
#include "meltpool/thermal.hpp"

namespace meltpool {

namespace gp {
void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
}  // namespace gp

struct DynSample {
  double area = 0.0;       // x_k, mm^2
  double temp = 0.0;       // T_k, K
  double power = 0.0;      // p_k, W
  double speed = 0.0;      // v_k, mm/s
  double next_area = 0.0;  // x_{k+1}, mm^2
  bool spans_transition = false;
};

/// One sample per consecutive record pair. Throws std::invalid_argument when
/// the log is not time-ordered or mixes sample periods. Pairs that cross a
/// track boundary are kept unless `keep_transitions` is false.
std::vector<DynSample> build_samples(const std::vector<StepRecord>& log, bool keep_transitions = true);

inline constexpr int kDynInputDim = 4;

struct Normalizer {
  std::array<double, kDynInputDim> input_mean{};
  std::array<double, kDynInputDim> input_std{};
  double target_mean = 0.0;
  double target_std = 1.0;

  /// Population statistics; throws when any column has zero spread.
  static Normalizer fit(const std::vector<DynSample>& samples);

  Eigen::Vector4d normalize_input(const Eigen::Vector4d& z) const;
  Eigen::Vector4d denormalize_input(const Eigen::Vector4d& u) const;
  double normalize_target(double y) const { return (y - target_mean) / target_std; }
  double denormalize_target(double u) const { return u * target_std + target_mean; }
  void validate() const;
};

struct Linearization {
  double a_d = 0.0;
  Eigen::Vector2d b_d = Eigen::Vector2d::Zero();  // d/dp, d/dv
  double c_d = 0.0;
  // expansion point
  double area = 0.0, temp = 0.0, power = 0.0, speed = 0.0;
  double predicted = 0.0;

  double apply(double x, double p, double v) const { return a_d * x + b_d[0] * p + b_d[1] * v + c_d; }
};

/// Optimizer defaults with a noise floor and a lower lengthscale bound (both
/// in standardized units): steady scans produce many near-identical samples.
inline gp::OptimizerConfig dyn_optimizer_defaults() {
  gp::OptimizerConfig c;
  c.min_sigma_n = 0.03;
  c.min_lengthscale = 0.5;
  return c;
}

struct DynTrainConfig {
  gp::OptimizerConfig optimizer = dyn_optimizer_defaults();
  // initial hyperparameters in normalized units
  double init_sigma_f = 1.0;
  double init_sigma_n = 0.1;
  double init_lengthscale = 1.0;
};

class DynModel {
 public:
  DynModel(gp::TrainedGP gp, Normalizer normalizer, double sample_period_s);

  /// Clamped below at zero.
  double predict_next(double area, double temp, double power, double speed) const;
  /// Denormalized GP mean before clamping.
  double predict_raw(double area, double temp, double power, double speed) const;
  Linearization linearize(double area, double temp, double power, double speed) const;

  const gp::TrainedGP& gp() const { return gp_; }
  const Normalizer& normalizer() const { return norm_; }
  double sample_period_s() const { return dt_; }

  nlohmann::json to_json() const;
  static DynModel from_json(const nlohmann::json& doc);

 private:
  gp::TrainedGP gp_;
  Normalizer norm_;
  double dt_;
};

DynModel train_dynamics(const std::vector<DynSample>& samples, const DynTrainConfig& config = {},
                        double sample_period_s = 50e-6, gp::OptimizationResult* report = nullptr);

/// Returns N + 1 areas starting at x0.
std::vector<double> rollout(const DynModel& model, double x0, const std::vector<double>& temps,
                            const std::vector<Eigen::Vector2d>& inputs);

struct ValidationStats {
  double r2 = 0.0;
  double mae_pct = 0.0;  // sum |pred - actual| / sum |actual| * 100
  double rmse = 0.0;
  std::size_t count = 0;
  std::vector<std::pair<double, double>> pairs;  // (actual, predicted)
};

ValidationStats validate_model(const DynModel& model, const std::vector<DynSample>& samples);

void to_json(nlohmann::json& j, const DynTrainConfig& c);
void from_json(const nlohmann::json& j, DynTrainConfig& c);

}  // namespace meltpool
