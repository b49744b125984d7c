#pragma once

// Successive-linearization MPC over the learned dynamics.
//
// Decisions are scaled input moves w_i = (u_i - u_{i-1}) / s_u (tracking cost)
// or scaled absolute inputs w_i = u_i / s_u (literal cost), followed by one
// state slack per horizon step. Areas enter the cost divided by area_scale so
// that Q, R, Qf keep their meaning whatever units the plant produces.

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "meltpool/dynamics.hpp"
#include "meltpool/qp.hpp"

namespace meltpool {

enum class CostMode { tracking, literal };

struct MpcConfig {
  double q = 1.0, r = 0.1, qf = 20.0;
  int horizon = 20;
  double x_ref = 0.0027;  // mm^2, nominal surrogate area at 250 W / 800 mm/s
  double x_lower = 0.0, x_upper = 0.5;
  double p_lower = 0.0, p_upper = 350.0;
  double v_lower = 400.0, v_upper = 1200.0;
  double dp_lower = -350.0, dp_upper = 350.0;
  double dv_lower = -400.0, dv_upper = 400.0;
  bool control_speed = false;
  double speed = 800.0;  // fixed speed when control_speed is off
  double initial_power = 250.0;
  double k_ff = 0.0, k_d = 0.0;  // W/K
  double t_ref = 353.0;          // K
  double slack_weight = 1e4;
  double area_scale = 0.0;  // 0 -> x_ref
  double power_scale = 350.0;
  double speed_scale = 1200.0;
  CostMode cost = CostMode::tracking;
  // A zero area reading carries no information about the pool (the beam has
  // just reached a new track); the MPC share restarts from initial_power (and
  // speed) instead of solving.
  bool reset_without_pool = false;
  QpSolverConfig solver;

  int input_count() const { return control_speed ? 2 : 1; }
  double effective_area_scale() const { return area_scale > 0.0 ? area_scale : x_ref; }
  void validate() const;
};

/// QP plus the bookkeeping needed to map decisions back to inputs and states.
struct MpcQp {
  QpProblem qp;
  int horizon = 0;
  int nu = 0;
  Eigen::VectorXd u_prev;       // nu
  Eigen::MatrixXd input_map;    // (nu H) x (nu H): stacked u = input_offset + input_map * w
  Eigen::VectorXd input_offset;  // nu H
  Eigen::MatrixXd prediction;   // H x (nu H): x_{1..H} = prediction_offset + prediction * w
  Eigen::VectorXd prediction_offset;
  bool feasible = true;  // hard input constraints admit a solution

  Eigen::Index slack_offset() const { return static_cast<Eigen::Index>(nu) * horizon; }
  Eigen::VectorXd inputs(const Eigen::VectorXd& z) const;  // stacked u_0..u_{H-1}
  Eigen::VectorXd states(const Eigen::VectorXd& z) const;  // x_1..x_H
};

/// `u_prev` holds (power) or (power, speed) depending on cfg.control_speed.
MpcQp build_qp(const Linearization& lin, double x0, const Eigen::VectorXd& u_prev, const MpcConfig& cfg);

double feedforward_term(double t_k, double t_prev, double t_ref, double k_ff, double k_d);

struct ControlOutput {
  double power = 0.0;
  double speed = 0.0;
  double mpc_power = 0.0;  // first QP input before feedforward and clamping
  double ff_term = 0.0;
  QpStatus status = QpStatus::converged;
  int iterations = 0;
  double kkt_residual = 0.0;
  double solve_time_s = 0.0;
};

/// `p_prev` is the previous MPC power, the QP's reference for moves and the
/// linearization point. The feedforward term is added on top of the QP output,
/// and the sum is clamped to the box and to the rate window around
/// `p_applied_prev` (defaults to `p_prev`).
ControlOutput control_step(const DynModel& model, double x_k, double t_k, double t_prev, double p_prev,
                           double v_prev, const MpcConfig& cfg,
                           double p_applied_prev = std::numeric_limits<double>::quiet_NaN());

/// Carries the previous MPC power, applied power, speed and T between steps.
/// The MPC never sees the feedforward share of the applied power.
class MpcController {
 public:
  MpcController(std::shared_ptr<const DynModel> model, MpcConfig cfg);

  ControlOutput step(double x_k, double t_k);
  void reset();

  double last_power() const { return p_prev_; }
  double last_speed() const { return v_prev_; }
  const MpcConfig& config() const { return cfg_; }
  const DynModel& model() const { return *model_; }

 private:
  std::shared_ptr<const DynModel> model_;
  MpcConfig cfg_;
  double p_prev_ = 0.0, mpc_prev_ = 0.0, v_prev_ = 0.0, t_prev_ = 0.0;
  bool started_ = false;
};

std::string to_string(CostMode m);
void to_json(nlohmann::json& j, const MpcConfig& c);
void from_json(const nlohmann::json& j, MpcConfig& c);

}  // namespace meltpool
