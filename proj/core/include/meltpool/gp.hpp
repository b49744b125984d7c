#pragma once

// Exact Gaussian-process regression with an ARD squared-exponential kernel.
//
// The kernel is k(x, x') = sigma_f^2 exp(-0.5 (x - x')^T L^{-1} (x - x')) with
// L = diag(l_1..l_n). Note that l_i enters linearly (it carries squared input
// units), so a distance d along axis i contributes d^2 / (2 l_i).

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace meltpool::gp {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstVecRef = Eigen::Ref<const VectorXd>;

/// Thrown when K_Y cannot be Cholesky-factored even after jitter escalation.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hyperparams {
  double sigma_f = 1.0;
  double sigma_n = 0.1;
  VectorXd lengthscales;

  Eigen::Index dim() const { return lengthscales.size(); }

  /// Throws std::invalid_argument if any invariant is violated or the
  /// dimension differs from `expected_dim` (pass -1 to skip that check).
  void validate(Eigen::Index expected_dim = -1) const;

  /// Packs (log sigma_f, log sigma_n, log l_1..log l_n).
  VectorXd to_log() const;
  static Hyperparams from_log(const ConstVecRef& theta);
};

struct Dataset {
  MatrixXd inputs;   // m x n
  VectorXd targets;  // m

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  void validate() const;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

double kernel_eval(const ConstVecRef& x, const ConstVecRef& x_prime, const Hyperparams& hp);

/// Covariance between every row of `a` and every row of `b`.
MatrixXd kernel_matrix(const MatrixXd& a, const MatrixXd& b, const Hyperparams& hp);

/// Immutable after construction; all members are safe for concurrent reads.
class TrainedGP {
 public:
  static constexpr double kMaxJitter = 1e-6;

  /// Factors K_Y = K(X,X) + sigma_n^2 I. `jitter` is only added to the diagonal
  /// when the plain factorization fails; it then escalates by 10x up to 1e-6.
  static TrainedGP fit(Dataset data, Hyperparams hp, double jitter = 1e-12);

  Prediction predict(const ConstVecRef& x_star) const;
  double predict_mean(const ConstVecRef& x_star) const;
  VectorXd predict_mean_grad(const ConstVecRef& x_star) const;
  double log_marginal() const;

  const Dataset& dataset() const { return data_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const MatrixXd& chol() const { return chol_; }
  const VectorXd& alpha() const { return alpha_; }
  /// Diagonal jitter actually applied (0 when the first factorization succeeded).
  double applied_jitter() const { return applied_jitter_; }
  Eigen::Index input_dim() const { return data_.dim(); }

  /// K(X,X) + sigma_n^2 I + applied_jitter I.
  MatrixXd noisy_covariance() const;

  nlohmann::json to_json() const;
  static TrainedGP from_json(const nlohmann::json& doc);

 private:
  TrainedGP() = default;
  void check_query(const ConstVecRef& x_star) const;

  Dataset data_;
  Hyperparams hp_;
  MatrixXd chol_;
  VectorXd alpha_;
  double applied_jitter_ = 0.0;
};

inline TrainedGP fit(Dataset data, Hyperparams hp, double jitter = 1e-12) {
  return TrainedGP::fit(std::move(data), std::move(hp), jitter);
}
inline Prediction predict(const TrainedGP& gp, const ConstVecRef& x_star) { return gp.predict(x_star); }
inline double log_marginal(const TrainedGP& gp) { return gp.log_marginal(); }
inline VectorXd predict_mean_grad(const TrainedGP& gp, const ConstVecRef& x_star) {
  return gp.predict_mean_grad(x_star);
}

/// Gradient of the log marginal likelihood with respect to
/// (log sigma_f, log sigma_n, log l_1..log l_n).
VectorXd log_marginal_grad(const Dataset& data, const Hyperparams& hp, double jitter = 1e-12);

/// Log marginal likelihood and its log-space gradient from one factorization.
struct MarginalEval {
  double value = 0.0;
  VectorXd grad;
};
MarginalEval log_marginal_with_grad(const Dataset& data, const Hyperparams& hp, double jitter = 1e-12);

struct OptimizerConfig {
  int max_iterations = 200;
  double tolerance = 1e-6;  // on the max-norm of the log-space gradient
  int restarts = 5;         // total starts, the first one is `init` itself
  std::uint64_t seed = 7;
  double restart_spread = 1.0;  // std-dev of log-space perturbation per restart
  double log_bound = 20.0;      // |log parameter| is clipped to this box
  // Optional tighter bounds (0 disables): a noise floor keeps near-duplicate
  // samples from driving K_Y singular.
  double min_sigma_n = 0.0;
  double min_lengthscale = 0.0;
  double max_lengthscale = 0.0;
  double jitter = 1e-12;
};

struct OptimizationResult {
  Hyperparams hyperparams;
  double log_marginal = 0.0;
  double initial_log_marginal = 0.0;
  double grad_max_norm = 0.0;
  int iterations = 0;  // of the winning start
  bool converged = false;
  int failed_starts = 0;
};

/// Multi-start quasi-Newton ascent on the log marginal likelihood in log-space,
/// with Armijo backtracking. Deterministic for a given config.seed.
OptimizationResult optimize_hyperparams(const Dataset& data, const Hyperparams& init,
                                        const OptimizerConfig& config = {});

}  // namespace meltpool::gp
