#include "meltpool/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace meltpool::gp {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

bool all_finite(const Eigen::Ref<const MatrixXd>& m) { return m.allFinite(); }

struct Factor {
  Eigen::LLT<MatrixXd> llt;
  double applied_jitter = 0.0;
};

MatrixXd noisy_kernel(const Dataset& data, const Hyperparams& hp) {
  MatrixXd k = kernel_matrix(data.inputs, data.inputs, hp);
  k.diagonal().array() += hp.sigma_n * hp.sigma_n;
  return k;
}

// Plain factorization first, then escalate diagonal jitter by decades.
Factor factor_with_jitter(const MatrixXd& k_y, double jitter) {
  Factor f;
  f.llt.compute(k_y);
  if (f.llt.info() == Eigen::Success) return f;

  double j = std::max(jitter, 1e-12);
  const auto n = k_y.rows();
  while (j <= TrainedGP::kMaxJitter * (1.0 + 1e-9)) {
    f.llt.compute(k_y + j * MatrixXd::Identity(n, n));
    if (f.llt.info() == Eigen::Success) {
      f.applied_jitter = j;
      return f;
    }
    j *= 10.0;
  }
  throw FactorizationError("K_Y is not positive definite after jitter escalation to 1e-6");
}

}  // namespace

void Hyperparams::validate(Eigen::Index expected_dim) const {
  if (!(sigma_f > 0.0) || !std::isfinite(sigma_f)) throw std::invalid_argument("sigma_f must be > 0");
  if (!(sigma_n >= 0.0) || !std::isfinite(sigma_n)) throw std::invalid_argument("sigma_n must be >= 0");
  if (lengthscales.size() == 0) throw std::invalid_argument("lengthscales must be non-empty");
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i) {
    if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i]))
      throw std::invalid_argument("every lengthscale must be > 0");
  }
  if (expected_dim >= 0 && lengthscales.size() != expected_dim)
    throw std::invalid_argument("lengthscale count does not match input dimension");
}

VectorXd Hyperparams::to_log() const {
  VectorXd theta(2 + lengthscales.size());
  theta[0] = std::log(sigma_f);
  theta[1] = sigma_n > 0.0 ? std::log(sigma_n) : -std::numeric_limits<double>::infinity();
  theta.tail(lengthscales.size()) = lengthscales.array().log();
  return theta;
}

Hyperparams Hyperparams::from_log(const ConstVecRef& theta) {
  if (theta.size() < 3) throw std::invalid_argument("log-parameter vector too short");
  Hyperparams hp;
  hp.sigma_f = std::exp(theta[0]);
  hp.sigma_n = std::exp(theta[1]);
  hp.lengthscales = theta.tail(theta.size() - 2).array().exp();
  return hp;
}

void Dataset::validate() const {
  if (inputs.rows() < 1) throw std::invalid_argument("dataset needs at least one observation");
  if (inputs.cols() < 1) throw std::invalid_argument("dataset inputs need at least one column");
  if (inputs.rows() != targets.size()) throw std::invalid_argument("input rows and target length differ");
  if (!all_finite(inputs) || !targets.allFinite()) throw std::invalid_argument("dataset contains non-finite values");
}

double kernel_eval(const ConstVecRef& x, const ConstVecRef& x_prime, const Hyperparams& hp) {
  if (x.size() != hp.dim() || x_prime.size() != hp.dim())
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  if (!x.allFinite() || !x_prime.allFinite()) throw std::invalid_argument("kernel_eval: non-finite input");
  const double q = ((x - x_prime).array().square() / hp.lengthscales.array()).sum();
  return hp.sigma_f * hp.sigma_f * std::exp(-0.5 * q);
}

MatrixXd kernel_matrix(const MatrixXd& a, const MatrixXd& b, const Hyperparams& hp) {
  if (a.cols() != hp.dim() || b.cols() != hp.dim())
    throw std::invalid_argument("kernel_matrix: dimension mismatch");
  const Eigen::ArrayXd inv_l = hp.lengthscales.array().inverse();
  const double sf2 = hp.sigma_f * hp.sigma_f;
  MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double q = ((a.row(i) - b.row(j)).array().square().transpose() * inv_l).sum();
      k(i, j) = sf2 * std::exp(-0.5 * q);
    }
  }
  return k;
}

TrainedGP TrainedGP::fit(Dataset data, Hyperparams hp, double jitter) {
  data.validate();
  hp.validate(data.dim());
  if (!(jitter >= 0.0)) throw std::invalid_argument("jitter must be >= 0");

  Factor f = factor_with_jitter(noisy_kernel(data, hp), jitter);

  TrainedGP gp;
  gp.chol_ = f.llt.matrixL();
  gp.alpha_ = f.llt.solve(data.targets);
  gp.applied_jitter_ = f.applied_jitter;
  gp.data_ = std::move(data);
  gp.hp_ = std::move(hp);
  return gp;
}

MatrixXd TrainedGP::noisy_covariance() const {
  MatrixXd k = noisy_kernel(data_, hp_);
  k.diagonal().array() += applied_jitter_;
  return k;
}

void TrainedGP::check_query(const ConstVecRef& x_star) const {
  if (x_star.size() != data_.dim()) throw std::invalid_argument("query dimension mismatch");
  if (!x_star.allFinite()) throw std::invalid_argument("query contains non-finite values");
}

Prediction TrainedGP::predict(const ConstVecRef& x_star) const {
  check_query(x_star);
  const VectorXd k_star = kernel_matrix(data_.inputs, x_star.transpose(), hp_).col(0);
  Prediction out;
  out.mean = k_star.dot(alpha_);
  const VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k_star);
  const double var = hp_.sigma_f * hp_.sigma_f - v.squaredNorm();
  out.variance = std::max(var, 0.0);
  return out;
}

double TrainedGP::predict_mean(const ConstVecRef& x_star) const {
  check_query(x_star);
  const Eigen::ArrayXd inv_l = hp_.lengthscales.array().inverse();
  const double sf2 = hp_.sigma_f * hp_.sigma_f;
  double mean = 0.0;
  for (Eigen::Index i = 0; i < data_.size(); ++i) {
    const double q = ((data_.inputs.row(i).transpose() - x_star).array().square() * inv_l).sum();
    mean += alpha_[i] * sf2 * std::exp(-0.5 * q);
  }
  return mean;
}

VectorXd TrainedGP::predict_mean_grad(const ConstVecRef& x_star) const {
  check_query(x_star);
  const Eigen::ArrayXd inv_l = hp_.lengthscales.array().inverse();
  const double sf2 = hp_.sigma_f * hp_.sigma_f;
  Eigen::ArrayXd grad = Eigen::ArrayXd::Zero(x_star.size());
  for (Eigen::Index i = 0; i < data_.size(); ++i) {
    const Eigen::ArrayXd d = data_.inputs.row(i).transpose().array() - x_star.array();
    const double k = sf2 * std::exp(-0.5 * (d.square() * inv_l).sum());
    grad += alpha_[i] * k * d * inv_l;
  }
  return grad.matrix();
}

double TrainedGP::log_marginal() const {
  const double m = static_cast<double>(data_.size());
  const double log_det = 2.0 * chol_.diagonal().array().log().sum();
  return -0.5 * data_.targets.dot(alpha_) - 0.5 * log_det - 0.5 * m * kLog2Pi;
}

nlohmann::json TrainedGP::to_json() const {
  nlohmann::json doc;
  doc["format"] = "meltpool.gp";
  doc["version"] = 1;
  doc["hyperparams"] = {
      {"sigma_f", hp_.sigma_f},
      {"sigma_n", hp_.sigma_n},
      {"lengthscales", std::vector<double>(hp_.lengthscales.data(),
                                           hp_.lengthscales.data() + hp_.lengthscales.size())}};
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < data_.size(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(data_.dim()));
    for (Eigen::Index j = 0; j < data_.dim(); ++j) r[static_cast<std::size_t>(j)] = data_.inputs(i, j);
    rows.push_back(r);
  }
  doc["inputs"] = rows;
  doc["targets"] = std::vector<double>(data_.targets.data(), data_.targets.data() + data_.targets.size());
  doc["jitter"] = applied_jitter_ > 0.0 ? applied_jitter_ : 1e-12;
  return doc;
}

TrainedGP TrainedGP::from_json(const nlohmann::json& doc) {
  if (doc.value("format", std::string{}) != "meltpool.gp")
    throw std::invalid_argument("not a meltpool.gp document");
  if (doc.value("version", 0) != 1) throw std::invalid_argument("unsupported gp document version");

  Hyperparams hp;
  const auto& h = doc.at("hyperparams");
  hp.sigma_f = h.at("sigma_f").get<double>();
  hp.sigma_n = h.at("sigma_n").get<double>();
  const auto ls = h.at("lengthscales").get<std::vector<double>>();
  hp.lengthscales = Eigen::Map<const VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));

  const auto rows = doc.at("inputs").get<std::vector<std::vector<double>>>();
  const auto targets = doc.at("targets").get<std::vector<double>>();
  Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(rows.size()), hp.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != hp.dim())
      throw std::invalid_argument("gp document row has wrong dimension");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  data.targets = Eigen::Map<const VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  return fit(std::move(data), std::move(hp), doc.value("jitter", 1e-12));
}

MarginalEval log_marginal_with_grad(const Dataset& data, const Hyperparams& hp, double jitter) {
  data.validate();
  hp.validate(data.dim());
  const auto m = data.size();
  const auto n = data.dim();

  const MatrixXd k_f = kernel_matrix(data.inputs, data.inputs, hp);
  MatrixXd k_y = k_f;
  k_y.diagonal().array() += hp.sigma_n * hp.sigma_n;
  const Factor f = factor_with_jitter(k_y, jitter);

  const VectorXd alpha = f.llt.solve(data.targets);
  const MatrixXd k_inv = f.llt.solve(MatrixXd::Identity(m, m));
  const MatrixXd w = alpha * alpha.transpose() - k_inv;

  MarginalEval out;
  const MatrixXd l = f.llt.matrixL();
  out.value = -0.5 * data.targets.dot(alpha) - l.diagonal().array().log().sum() -
              0.5 * static_cast<double>(m) * kLog2Pi;

  // dK/dlog(sigma_f) = 2 K_f ; dK/dlog(sigma_n) = 2 sigma_n^2 I ;
  // dK/dlog(l_j) = K_f .* D_j^2 / (2 l_j).
  out.grad.resize(2 + n);
  out.grad[0] = 0.5 * (w.array() * (2.0 * k_f.array())).sum();
  out.grad[1] = 0.5 * w.diagonal().sum() * 2.0 * hp.sigma_n * hp.sigma_n;
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0.0;
    const double inv2l = 0.5 / hp.lengthscales[j];
    for (Eigen::Index b = 0; b < m; ++b) {
      for (Eigen::Index a = 0; a < m; ++a) {
        const double d = data.inputs(a, j) - data.inputs(b, j);
        acc += w(a, b) * k_f(a, b) * d * d * inv2l;
      }
    }
    out.grad[2 + j] = 0.5 * acc;
  }
  return out;
}

VectorXd log_marginal_grad(const Dataset& data, const Hyperparams& hp, double jitter) {
  return log_marginal_with_grad(data, hp, jitter).grad;
}

namespace {

struct AscentOutcome {
  VectorXd theta;
  double value = -std::numeric_limits<double>::infinity();
  double grad_max = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

struct LogBox {
  VectorXd lo, hi;
  VectorXd clamp(const VectorXd& t) const { return t.cwiseMax(lo).cwiseMin(hi); }
};

LogBox make_box(Eigen::Index dim, const OptimizerConfig& cfg) {
  LogBox b{VectorXd::Constant(dim + 2, -cfg.log_bound), VectorXd::Constant(dim + 2, cfg.log_bound)};
  if (cfg.min_sigma_n > 0.0) b.lo[1] = std::max(b.lo[1], std::log(cfg.min_sigma_n));
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (cfg.min_lengthscale > 0.0) b.lo[2 + i] = std::max(b.lo[2 + i], std::log(cfg.min_lengthscale));
    if (cfg.max_lengthscale > 0.0) b.hi[2 + i] = std::min(b.hi[2 + i], std::log(cfg.max_lengthscale));
  }
  for (Eigen::Index i = 0; i < b.lo.size(); ++i)
    if (b.lo[i] > b.hi[i]) throw std::invalid_argument("optimizer bounds are empty");
  return b;
}

// Gradient components pinned against the box do not count toward convergence.
double projected_max(const VectorXd& theta, const VectorXd& grad, const LogBox& box) {
  double g = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] >= box.hi[i] && grad[i] > 0.0) continue;
    if (theta[i] <= box.lo[i] && grad[i] < 0.0) continue;
    g = std::max(g, std::abs(grad[i]));
  }
  return g;
}

AscentOutcome ascend(const Dataset& data, VectorXd theta, const OptimizerConfig& cfg) {
  const LogBox bound = make_box(data.dim(), cfg);
  theta = bound.clamp(theta);

  auto eval = [&](const VectorXd& t) { return log_marginal_with_grad(data, Hyperparams::from_log(t), cfg.jitter); };

  MarginalEval cur = eval(theta);
  const auto dim = theta.size();
  MatrixXd h_inv = MatrixXd::Identity(dim, dim);

  AscentOutcome out;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    out.iterations = it;
    const double gmax = projected_max(theta, cur.grad, bound);
    if (gmax <= cfg.tolerance) {
      out.converged = true;
      break;
    }
    VectorXd dir = h_inv * cur.grad;
    if (dir.dot(cur.grad) <= 0.0) {
      h_inv.setIdentity();
      dir = cur.grad;
    }
    // Cap the step so a single move never exceeds a few decades in any parameter.
    const double dmax = dir.cwiseAbs().maxCoeff();
    if (dmax > 3.0) dir *= 3.0 / dmax;

    const double slope = dir.dot(cur.grad);
    double step = 1.0;
    bool accepted = false;
    VectorXd next_theta;
    MarginalEval next;
    for (int bt = 0; bt < 40; ++bt) {
      next_theta = bound.clamp(theta + step * dir);
      try {
        next = eval(next_theta);
        if (std::isfinite(next.value) && next.value >= cur.value + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      } catch (const FactorizationError&) {
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Quasi-Newton direction failed; one retry along the raw gradient.
      if (!h_inv.isIdentity()) {
        h_inv.setIdentity();
        continue;
      }
      break;
    }

    const VectorXd s = next_theta - theta;
    const VectorXd y = cur.grad - next.grad;  // gradient of the negated objective
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const MatrixXd id = MatrixXd::Identity(dim, dim);
      h_inv = (id - rho * s * y.transpose()) * h_inv * (id - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    theta = next_theta;
    cur = std::move(next);
    out.iterations = it + 1;
  }
  out.theta = theta;
  out.value = cur.value;
  out.grad_max = projected_max(theta, cur.grad, bound);
  out.converged = out.converged || out.grad_max <= cfg.tolerance;
  return out;
}

}  // namespace

OptimizationResult optimize_hyperparams(const Dataset& data, const Hyperparams& init,
                                        const OptimizerConfig& config) {
  data.validate();
  init.validate(data.dim());
  if (config.restarts < 1) throw std::invalid_argument("restarts must be >= 1");

  Hyperparams start = init;
  // log sigma_n must be finite to optimize; a zero-noise init starts at a tiny floor.
  if (start.sigma_n <= 0.0) start.sigma_n = 1e-6 * start.sigma_f;

  OptimizationResult result;
  result.initial_log_marginal = -std::numeric_limits<double>::infinity();
  try {
    result.initial_log_marginal = TrainedGP::fit(data, init, config.jitter).log_marginal();
  } catch (const FactorizationError&) {
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, config.restart_spread);
  const VectorXd theta0 = start.to_log();

  AscentOutcome best;
  bool have_best = false;
  for (int r = 0; r < config.restarts; ++r) {
    VectorXd theta = theta0;
    if (r > 0) {
      for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += normal(rng);
    }
    try {
      AscentOutcome o = ascend(data, theta, config);
      if (!have_best || o.value > best.value) {
        best = std::move(o);
        have_best = true;
      }
    } catch (const FactorizationError&) {
      ++result.failed_starts;
    }
  }
  if (!have_best) throw FactorizationError("every optimizer start failed to factor K_Y");

  // Ascent contract: never return something worse than the initial point.
  if (best.value < result.initial_log_marginal) {
    result.hyperparams = init;
    result.log_marginal = result.initial_log_marginal;
    result.grad_max_norm = log_marginal_grad(data, init, config.jitter).cwiseAbs().maxCoeff();
    result.converged = false;
    return result;
  }
  result.hyperparams = Hyperparams::from_log(best.theta);
  result.log_marginal = best.value;
  result.grad_max_norm = best.grad_max;
  result.iterations = best.iterations;
  result.converged = best.converged;
  return result;
}

}  // namespace meltpool::gp
