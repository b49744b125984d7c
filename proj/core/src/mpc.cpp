#include "meltpool/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace meltpool {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct InputLimits {
  double lower, upper, rate_lower, rate_upper;
};

std::vector<InputLimits> input_limits(const MpcConfig& c) {
  std::vector<InputLimits> out{{c.p_lower, c.p_upper, c.dp_lower, c.dp_upper}};
  if (c.control_speed) out.push_back({c.v_lower, c.v_upper, c.dv_lower, c.dv_upper});
  return out;
}

// Intersection of the box with the rate window around `prev`; the box wins
// when the two do not overlap.
double clamp_input(double u, double prev, const InputLimits& lim) {
  double lo = std::max(lim.lower, prev + lim.rate_lower);
  double hi = std::min(lim.upper, prev + lim.rate_upper);
  if (lo > hi) {
    lo = lim.lower;
    hi = lim.upper;
  }
  return std::clamp(u, lo, hi);
}

}  // namespace

void MpcConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("MpcConfig: ") + what); };
  if (!(q >= 0.0) || !(qf >= 0.0)) fail("Q and Qf must be >= 0");
  if (!(r > 0.0)) fail("R must be > 0");
  if (horizon < 1) fail("horizon must be >= 1");
  if (!(x_lower <= x_upper)) fail("x bounds");
  if (!(p_lower <= p_upper)) fail("power bounds");
  if (!(v_lower <= v_upper)) fail("speed bounds");
  if (!(dp_lower <= dp_upper)) fail("power rate bounds");
  if (!(dv_lower <= dv_upper)) fail("speed rate bounds");
  if (!(slack_weight > 0.0)) fail("slack weight must be > 0");
  if (!(effective_area_scale() > 0.0)) fail("area scale (or x_ref) must be > 0");
  if (!(power_scale > 0.0) || !(speed_scale > 0.0)) fail("input scales must be > 0");
  if (!(speed > 0.0)) fail("speed must be > 0");
  for (double v : {q, r, qf, x_ref, x_lower, x_upper, p_lower, p_upper, v_lower, v_upper, dp_lower, dp_upper, dv_lower,
                   dv_upper, k_ff, k_d, t_ref, initial_power})
    if (!std::isfinite(v)) fail("non-finite field");
}

VectorXd MpcQp::inputs(const VectorXd& z) const { return input_offset + input_map * z.head(slack_offset()); }

VectorXd MpcQp::states(const VectorXd& z) const {
  return prediction_offset + prediction * z.head(slack_offset());
}

MpcQp build_qp(const Linearization& lin, double x0, const VectorXd& u_prev, const MpcConfig& cfg) {
  cfg.validate();
  const int nu = cfg.input_count();
  const int h = cfg.horizon;
  if (u_prev.size() != nu) throw std::invalid_argument("build_qp: u_prev size does not match the input count");
  const Eigen::Index nw = static_cast<Eigen::Index>(nu) * h;
  const Eigen::Index n = nw + h;
  const auto limits = input_limits(cfg);
  const bool moves = cfg.cost == CostMode::tracking;

  VectorXd scale(nu);
  scale[0] = cfg.power_scale;
  if (nu == 2) scale[1] = cfg.speed_scale;
  VectorXd bu(nu);
  bu[0] = lin.b_d[0];
  if (nu == 2) bu[1] = lin.b_d[1];
  // With speed fixed its contribution is part of the offset.
  const double c_eff = nu == 2 ? lin.c_d : lin.c_d + lin.b_d[1] * lin.speed;

  MpcQp out;
  out.horizon = h;
  out.nu = nu;
  out.u_prev = u_prev;

  out.input_map = MatrixXd::Zero(nw, nw);
  out.input_offset = VectorXd::Zero(nw);
  for (int i = 0; i < h; ++i) {
    for (int c = 0; c < nu; ++c) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * nu + c;
      if (moves) {
        out.input_offset[row] = u_prev[c];
        for (int j = 0; j <= i; ++j) out.input_map(row, static_cast<Eigen::Index>(j) * nu + c) = scale[c];
      } else {
        out.input_map(row, row) = scale[c];
      }
    }
  }

  // x_{i+1} = a x_i + bu . u_i + c over the stacked inputs.
  MatrixXd gamma = MatrixXd::Zero(h, nw);
  VectorXd offset(h);
  double prev_off = x0;
  for (int i = 0; i < h; ++i) {
    if (i > 0) gamma.row(i) = lin.a_d * gamma.row(i - 1);
    for (int c = 0; c < nu; ++c) gamma(i, static_cast<Eigen::Index>(i) * nu + c) += bu[c];
    offset[i] = lin.a_d * prev_off + c_eff;
    prev_off = offset[i];
  }
  out.prediction = gamma * out.input_map;
  out.prediction_offset = offset + gamma * out.input_offset;

  const double xs = cfg.effective_area_scale();
  const double target = moves ? cfg.x_ref : 0.0;
  VectorXd wq = VectorXd::Constant(h, cfg.q);
  wq[h - 1] = cfg.qf;
  const MatrixXd ps = out.prediction / xs;
  const VectorXd e0 = (out.prediction_offset.array() - target).matrix() / xs;

  QpProblem& qp = out.qp;
  qp.hessian = MatrixXd::Zero(n, n);
  qp.gradient = VectorXd::Zero(n);
  qp.hessian.topLeftCorner(nw, nw) = 2.0 * (ps.transpose() * wq.asDiagonal() * ps);
  qp.hessian.topLeftCorner(nw, nw).diagonal().array() += 2.0 * cfg.r;
  qp.hessian.bottomRightCorner(h, h).diagonal().setConstant(2.0 * cfg.slack_weight);
  qp.gradient.head(nw) = 2.0 * ps.transpose() * (wq.asDiagonal() * e0);
  // Exact symmetry for the factorization.
  qp.hessian = 0.5 * (qp.hessian + qp.hessian.transpose()).eval();

  // Rate rows are redundant when the box already implies them.
  std::vector<bool> keep_rate(nu);
  for (int c = 0; c < nu; ++c) {
    const auto& l = limits[c];
    const double span = l.upper - l.lower;
    keep_rate[c] = !(l.rate_upper >= span && l.rate_lower <= -span && u_prev[c] >= l.lower && u_prev[c] <= l.upper);
  }
  Eigen::Index rows = 2 * nw + 2 * h;
  for (int c = 0; c < nu; ++c)
    if (keep_rate[c]) rows += 2 * h;
  qp.a_ineq = MatrixXd::Zero(rows, n);
  qp.b_ineq = VectorXd::Zero(rows);
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < nw; ++k) {
    const auto& l = limits[static_cast<std::size_t>(k % nu)];
    qp.a_ineq.row(r).head(nw) = out.input_map.row(k);
    qp.b_ineq[r++] = l.upper - out.input_offset[k];
    qp.a_ineq.row(r).head(nw) = -out.input_map.row(k);
    qp.b_ineq[r++] = out.input_offset[k] - l.lower;
  }
  for (int c = 0; c < nu; ++c) {
    if (!keep_rate[c]) continue;
    for (int i = 0; i < h; ++i) {
      const Eigen::Index k = static_cast<Eigen::Index>(i) * nu + c;
      Eigen::RowVectorXd drow = out.input_map.row(k);
      double doff = out.input_offset[k];
      if (i == 0) {
        doff -= u_prev[c];
      } else {
        drow -= out.input_map.row(k - nu);
        doff -= out.input_offset[k - nu];
      }
      qp.a_ineq.row(r).head(nw) = drow;
      qp.b_ineq[r++] = limits[c].rate_upper - doff;
      qp.a_ineq.row(r).head(nw) = -drow;
      qp.b_ineq[r++] = doff - limits[c].rate_lower;
    }
  }
  for (int i = 0; i < h; ++i) {
    qp.a_ineq.row(r).head(nw) = out.prediction.row(i);
    qp.a_ineq(r, nw + i) = -xs;
    qp.b_ineq[r++] = cfg.x_upper - out.prediction_offset[i];
    qp.a_ineq.row(r).head(nw) = -out.prediction.row(i);
    qp.a_ineq(r, nw + i) = -xs;
    qp.b_ineq[r++] = out.prediction_offset[i] - cfg.x_lower;
  }

  // Hard input constraints: propagate the reachable interval.
  for (int c = 0; c < nu && out.feasible; ++c) {
    const auto& l = limits[c];
    double lo = u_prev[c], hi = u_prev[c];
    for (int i = 0; i < h; ++i) {
      lo = std::max(l.lower, lo + l.rate_lower);
      hi = std::min(l.upper, hi + l.rate_upper);
      if (lo > hi) {
        out.feasible = false;
        break;
      }
    }
  }

  qp.project = [=, input_map = out.input_map, input_offset = out.input_offset, pred = out.prediction,
                pred_off = out.prediction_offset](const VectorXd& z) {
    VectorXd u = input_offset + input_map * z.head(nw);
    VectorXd w(nw);
    for (int i = 0; i < h; ++i) {
      for (int c = 0; c < nu; ++c) {
        const Eigen::Index k = static_cast<Eigen::Index>(i) * nu + c;
        const double prev = i == 0 ? u_prev[c] : u[k - nu];
        u[k] = clamp_input(u[k], prev, limits[c]);
        w[k] = moves ? (u[k] - prev) / scale[c] : u[k] / scale[c];
      }
    }
    VectorXd out_z(n);
    out_z.head(nw) = w;
    const VectorXd x = pred_off + pred * w;
    for (int i = 0; i < h; ++i)
      out_z[nw + i] = std::max({0.0, (x[i] - cfg.x_upper) / xs, (cfg.x_lower - x[i]) / xs});
    return out_z;
  };
  return out;
}

double feedforward_term(double t_k, double t_prev, double t_ref, double k_ff, double k_d) {
  return k_ff * (t_ref - t_k) + k_d * (t_prev - t_k);
}

ControlOutput control_step(const DynModel& model, double x_k, double t_k, double t_prev, double p_prev,
                           double v_prev, const MpcConfig& cfg, double p_applied_prev) {
  if (std::isnan(p_applied_prev)) p_applied_prev = p_prev;
  const auto start = std::chrono::steady_clock::now();
  if (!std::isfinite(x_k) || !std::isfinite(t_k) || !std::isfinite(t_prev) || !std::isfinite(p_prev) ||
      !std::isfinite(v_prev))
    throw std::invalid_argument("control_step: non-finite state");
  const int nu = cfg.input_count();
  const auto limits = input_limits(cfg);
  const double v_lin = cfg.control_speed ? v_prev : cfg.speed;
  VectorXd u_prev(nu);
  u_prev[0] = p_prev;
  if (nu == 2) u_prev[1] = v_prev;

  const Linearization lin = model.linearize(x_k, t_k, p_prev, v_lin);
  const MpcQp mq = build_qp(lin, x_k, u_prev, cfg);

  ControlOutput out;
  VectorXd u0(nu);
  if (cfg.reset_without_pool && !(x_k > 0.0)) {
    // No pool under the beam (track start): nothing to regulate yet, restart
    // from the nominal command. Holding u_prev instead can lock in zero power.
    u0[0] = std::clamp(cfg.initial_power, limits[0].lower, limits[0].upper);
    if (nu == 2) u0[1] = std::clamp(cfg.speed, limits[1].lower, limits[1].upper);
  } else if (!mq.feasible) {
    out.status = QpStatus::infeasible_fallback;
    for (int c = 0; c < nu; ++c) u0[c] = std::clamp(u_prev[c], limits[c].lower, limits[c].upper);
  } else {
    const QpSolution sol = solve_qp(mq.qp, cfg.solver);
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.kkt_residual = sol.kkt_residual;
    u0 = mq.inputs(sol.z).head(nu);
  }
  out.mpc_power = u0[0];
  out.ff_term = feedforward_term(t_k, t_prev, cfg.t_ref, cfg.k_ff, cfg.k_d);
  out.power = clamp_input(u0[0] + out.ff_term, p_applied_prev, limits[0]);
  if (cfg.control_speed)
    out.speed = clamp_input(u0[1], v_prev, limits[1]);
  else
    out.speed = std::clamp(cfg.speed, cfg.v_lower, cfg.v_upper);
  out.solve_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

MpcController::MpcController(std::shared_ptr<const DynModel> model, MpcConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
  if (!model_) throw std::invalid_argument("MpcController: null model");
  cfg_.validate();
  reset();
}

void MpcController::reset() {
  p_prev_ = std::clamp(cfg_.initial_power, cfg_.p_lower, cfg_.p_upper);
  mpc_prev_ = p_prev_;
  v_prev_ = std::clamp(cfg_.speed, cfg_.v_lower, cfg_.v_upper);
  t_prev_ = 0.0;
  started_ = false;
}

ControlOutput MpcController::step(double x_k, double t_k) {
  if (!started_) {
    t_prev_ = t_k;
    started_ = true;
  }
  ControlOutput out = control_step(*model_, x_k, t_k, t_prev_, mpc_prev_, v_prev_, cfg_, p_prev_);
  mpc_prev_ = out.mpc_power;
  p_prev_ = out.power;
  v_prev_ = out.speed;
  t_prev_ = t_k;
  return out;
}

std::string to_string(CostMode m) { return m == CostMode::tracking ? "tracking" : "literal"; }

void to_json(nlohmann::json& j, const MpcConfig& c) {
  j = {{"q", c.q},
       {"r", c.r},
       {"qf", c.qf},
       {"horizon", c.horizon},
       {"x_ref", c.x_ref},
       {"x_lower", c.x_lower},
       {"x_upper", c.x_upper},
       {"p_lower", c.p_lower},
       {"p_upper", c.p_upper},
       {"v_lower", c.v_lower},
       {"v_upper", c.v_upper},
       {"dp_lower", c.dp_lower},
       {"dp_upper", c.dp_upper},
       {"dv_lower", c.dv_lower},
       {"dv_upper", c.dv_upper},
       {"control_speed", c.control_speed},
       {"speed", c.speed},
       {"initial_power", c.initial_power},
       {"k_ff", c.k_ff},
       {"k_d", c.k_d},
       {"t_ref", c.t_ref},
       {"slack_weight", c.slack_weight},
       {"area_scale", c.area_scale},
       {"power_scale", c.power_scale},
       {"speed_scale", c.speed_scale},
       {"reset_without_pool", c.reset_without_pool},
       {"cost", to_string(c.cost)},
       {"solver", {{"max_iterations", c.solver.max_iterations}, {"tolerance", c.solver.tolerance}}}};
}

void from_json(const nlohmann::json& j, MpcConfig& c) {
  const MpcConfig d;
  c.q = j.value("q", d.q);
  c.r = j.value("r", d.r);
  c.qf = j.value("qf", d.qf);
  c.horizon = j.value("horizon", d.horizon);
  c.x_ref = j.value("x_ref", d.x_ref);
  c.x_lower = j.value("x_lower", d.x_lower);
  c.x_upper = j.value("x_upper", d.x_upper);
  c.p_lower = j.value("p_lower", d.p_lower);
  c.p_upper = j.value("p_upper", d.p_upper);
  c.v_lower = j.value("v_lower", d.v_lower);
  c.v_upper = j.value("v_upper", d.v_upper);
  c.dp_lower = j.value("dp_lower", d.dp_lower);
  c.dp_upper = j.value("dp_upper", d.dp_upper);
  c.dv_lower = j.value("dv_lower", d.dv_lower);
  c.dv_upper = j.value("dv_upper", d.dv_upper);
  c.control_speed = j.value("control_speed", d.control_speed);
  c.speed = j.value("speed", d.speed);
  c.initial_power = j.value("initial_power", d.initial_power);
  c.k_ff = j.value("k_ff", d.k_ff);
  c.k_d = j.value("k_d", d.k_d);
  c.t_ref = j.value("t_ref", d.t_ref);
  c.slack_weight = j.value("slack_weight", d.slack_weight);
  c.area_scale = j.value("area_scale", d.area_scale);
  c.power_scale = j.value("power_scale", d.power_scale);
  c.speed_scale = j.value("speed_scale", d.speed_scale);
  c.reset_without_pool = j.value("reset_without_pool", d.reset_without_pool);
  const std::string cost = j.value("cost", std::string("tracking"));
  if (cost == "tracking")
    c.cost = CostMode::tracking;
  else if (cost == "literal")
    c.cost = CostMode::literal;
  else
    throw std::invalid_argument("MpcConfig: unknown cost mode '" + cost + "'");
  c.solver = d.solver;
  if (j.contains("solver")) {
    c.solver.max_iterations = j.at("solver").value("max_iterations", d.solver.max_iterations);
    c.solver.tolerance = j.at("solver").value("tolerance", d.solver.tolerance);
  }
  c.validate();
}

}  // namespace meltpool
