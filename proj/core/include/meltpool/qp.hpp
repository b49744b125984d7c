#pragma once

// Dense convex QP:  min 0.5 z'Hz + f'z  s.t.  A z <= b,  H positive definite.

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace meltpool {

enum class QpStatus { converged, max_iter, infeasible_fallback };

std::string to_string(QpStatus s);

struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd a_ineq;
  Eigen::VectorXd b_ineq;
  /// Optional map onto the feasible set, used when the solver stops early.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> project;

  Eigen::Index dim() const { return gradient.size(); }
  Eigen::Index constraint_count() const { return b_ineq.size(); }
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(hessian * z) + gradient.dot(z); }
  double max_violation(const Eigen::VectorXd& z) const;
  void validate() const;
};

struct QpSolverConfig {
  int max_iterations = 500;  // full sweeps over the dual variables
  double tolerance = 1e-6;   // on the KKT residual
};

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  QpStatus status = QpStatus::converged;
  int iterations = 0;
  double kkt_residual = 0.0;
  double objective = 0.0;
};

/// Hildreth's dual coordinate ascent. The unconstrained minimizer is returned
/// directly when it is feasible. The KKT residual is the max of primal
/// violation, stationarity and complementarity (dual feasibility holds by
/// construction).
QpSolution solve_qp(const QpProblem& qp, const QpSolverConfig& config = {});

/// Max-norm KKT residual of (z, lambda) for `qp`.
double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda);

}  // namespace meltpool
