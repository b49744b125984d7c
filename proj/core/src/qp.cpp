#include "meltpool/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace meltpool {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(QpStatus s) {
  switch (s) {
    case QpStatus::converged: return "converged";
    case QpStatus::max_iter: return "max-iter";
    case QpStatus::infeasible_fallback: return "infeasible-fallback";
  }
  return "unknown";
}

double QpProblem::max_violation(const VectorXd& z) const {
  if (b_ineq.size() == 0) return 0.0;
  return std::max(0.0, (a_ineq * z - b_ineq).maxCoeff());
}

void QpProblem::validate() const {
  const auto n = gradient.size();
  if (n == 0) throw std::invalid_argument("QpProblem: empty decision vector");
  if (hessian.rows() != n || hessian.cols() != n) throw std::invalid_argument("QpProblem: hessian shape");
  if (a_ineq.rows() != b_ineq.size() || (a_ineq.rows() > 0 && a_ineq.cols() != n))
    throw std::invalid_argument("QpProblem: constraint shape");
  if (!hessian.allFinite() || !gradient.allFinite() || !a_ineq.allFinite() || !b_ineq.allFinite())
    throw std::invalid_argument("QpProblem: non-finite data");
}

double kkt_residual(const QpProblem& qp, const VectorXd& z, const VectorXd& lambda) {
  VectorXd stat = qp.hessian * z + qp.gradient;
  double res = 0.0;
  if (qp.constraint_count() > 0) {
    stat += qp.a_ineq.transpose() * lambda;
    const VectorXd slack = qp.a_ineq * z - qp.b_ineq;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
      res = std::max(res, std::max(0.0, slack[i]));
      res = std::max(res, std::abs(lambda[i] * slack[i]));
      res = std::max(res, std::max(0.0, -lambda[i]));
    }
  }
  return std::max(res, stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0);
}


namespace {

// Goldfarb-Idnani dual active-set method for min 0.5 z'Hz + f'z, A z <= b.
// Finite termination; used when coordinate ascent stalls on a degenerate dual.
// Works on n_i = -A_i, c_i = -b_i (n_i' z >= c_i) with J = L^-T rotated so that
// J' N_active = [R; 0].
struct ActiveSetResult {
  bool ok = false;
  VectorXd z, lambda;
  int iterations = 0;
};

ActiveSetResult active_set_solve(const QpProblem& qp, const Eigen::LLT<MatrixXd>& llt, int max_steps) {
  const Eigen::Index n = qp.dim(), m = qp.constraint_count();
  ActiveSetResult res;
  MatrixXd j = llt.matrixU().solve(MatrixXd::Identity(n, n));  // U^-1 = L^-T
  MatrixXd r = MatrixXd::Zero(n, n);
  std::vector<Eigen::Index> active;
  VectorXd u(0);
  VectorXd z = -llt.solve(qp.gradient);
  VectorXd row_norm(m);
  for (Eigen::Index i = 0; i < m; ++i) row_norm[i] = std::max(qp.a_ineq.row(i).norm(), 1e-300);
  std::vector<char> is_active(static_cast<std::size_t>(m), 0);

  auto slack = [&](Eigen::Index i) { return qp.b_ineq[i] - qp.a_ineq.row(i).dot(z); };  // >= 0 when feasible

  auto drop = [&](Eigen::Index l) {
    const Eigen::Index q = static_cast<Eigen::Index>(active.size());
    is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(l)])] = 0;
    active.erase(active.begin() + l);
    for (Eigen::Index k = l; k + 1 < q; ++k) {
      r.col(k) = r.col(k + 1);
      u[k] = u[k + 1];
    }
    r.col(q - 1).setZero();
    u.conservativeResize(q - 1);
    for (Eigen::Index k = l; k + 1 < q; ++k) {
      const double a = r(k, k), b = r(k + 1, k);
      const double h = std::hypot(a, b);
      if (h == 0.0) continue;
      const double c = a / h, s = b / h;
      for (Eigen::Index col = k; col + 1 < q; ++col) {
        const double x0 = r(k, col), x1 = r(k + 1, col);
        r(k, col) = c * x0 + s * x1;
        r(k + 1, col) = -s * x0 + c * x1;
      }
      const VectorXd j0 = j.col(k), j1 = j.col(k + 1);
      j.col(k) = c * j0 + s * j1;
      j.col(k + 1) = -s * j0 + c * j1;
    }
  };

  int steps = 0;
  while (steps < max_steps) {
    // most violated constraint, normalized by its row norm
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (is_active[static_cast<std::size_t>(i)]) continue;
      const double v = slack(i) / row_norm[i];
      const double tol = 1e-12 * (1.0 + std::abs(qp.b_ineq[i]) / row_norm[i]);
      if (v < -tol && v < worst) {
        worst = v;
        p = i;
      }
    }
    if (p < 0) {
      res.ok = true;
      break;
    }
    const VectorXd np = -qp.a_ineq.row(p).transpose();
    VectorXd uplus(u.size() + 1);
    uplus.head(u.size()) = u;
    uplus[u.size()] = 0.0;

    bool added = false;
    while (!added && steps < max_steps) {
      ++steps;
      const Eigen::Index q = static_cast<Eigen::Index>(active.size());
      VectorXd d = j.transpose() * np;
      const VectorXd dir = j.rightCols(n - q) * d.tail(n - q);
      VectorXd rr(q);
      if (q > 0) rr = r.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

      double t1 = INFINITY;
      Eigen::Index l = -1;
      for (Eigen::Index k = 0; k < q; ++k) {
        if (rr[k] > 0.0 && uplus[k] / rr[k] < t1) {
          t1 = uplus[k] / rr[k];
          l = k;
        }
      }
      const double curv = dir.dot(np);
      const double t2 = (dir.norm() > 1e-14 * (1.0 + np.norm()) && curv > 0.0) ? -slack(p) / curv : INFINITY;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) return res;  // primal infeasible

      if (std::isfinite(t2)) z += t * dir;
      uplus.head(q) -= t * rr;
      uplus[q] += t;
      if (t == t2) {
        // add p: rotate d so that only its first q+1 entries survive
        for (Eigen::Index k = n - 1; k > q; --k) {
          const double a = d[k - 1], b = d[k];
          if (b == 0.0) continue;
          const double h = std::hypot(a, b);
          const double c = a / h, s = b / h;
          d[k - 1] = h;
          d[k] = 0.0;
          const VectorXd j0 = j.col(k - 1), j1 = j.col(k);
          j.col(k - 1) = c * j0 + s * j1;
          j.col(k) = -s * j0 + c * j1;
        }
        r.col(q).head(q + 1) = d.head(q + 1);
        active.push_back(p);
        is_active[static_cast<std::size_t>(p)] = 1;
        u = uplus;
        added = true;
      } else {
        // drop the blocking constraint and keep stepping towards p
        u = uplus.head(q);
        const double up = uplus[q];
        drop(l);
        uplus.resize(q);
        uplus.head(q - 1) = u;
        uplus[q - 1] = up;
      }
    }
    if (!added) return res;
  }
  res.iterations = steps;
  res.z = z;
  res.lambda = VectorXd::Zero(m);
  for (std::size_t k = 0; k < active.size(); ++k) res.lambda[active[k]] = std::max(0.0, u[static_cast<Eigen::Index>(k)]);
  return res;
}

}  // namespace

QpSolution solve_qp(const QpProblem& qp, const QpSolverConfig& config) {
  qp.validate();
  const Eigen::Index m = qp.constraint_count();
  Eigen::LLT<MatrixXd> llt(qp.hessian);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("solve_qp: hessian is not positive definite");

  QpSolution sol;
  const VectorXd z_free = -llt.solve(qp.gradient);
  sol.lambda = VectorXd::Zero(m);
  if (m == 0 || qp.max_violation(z_free) <= config.tolerance) {
    sol.z = z_free;
    sol.kkt_residual = kkt_residual(qp, sol.z, sol.lambda);
    sol.objective = qp.objective(sol.z);
    return sol;
  }

  // Dual: min 0.5 l'Pl + d'l, l >= 0, with P = A H^-1 A', d = b + A H^-1 f.
  // g = P l + d equals -(A z - b) for the primal iterate z = z_free - H^-1 A' l.
  const MatrixXd hinv_at = llt.solve(qp.a_ineq.transpose());
  const MatrixXd p = qp.a_ineq * hinv_at;
  VectorXd g = qp.b_ineq - qp.a_ineq * z_free;
  VectorXd& lam = sol.lambda;

  // The residual in dual terms: primal violation max(0, -g_i) and
  // complementarity |l_i g_i|; stationarity holds exactly for z(l).
  auto residual = [&] {
    double r = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) r = std::max({r, -g[i], std::abs(lam[i] * g[i])});
    return r;
  };

  int it = 0;
  double r = residual();
  while (r > config.tolerance && it < config.max_iterations) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double pii = p(i, i);
      if (!(pii > 0.0)) continue;
      const double next = std::max(0.0, lam[i] - g[i] / pii);
      const double delta = next - lam[i];
      if (delta != 0.0) {
        lam[i] = next;
        g.noalias() += p.col(i) * delta;
      }
    }
    ++it;
    r = residual();
  }
  sol.iterations = it;
  sol.z = z_free - hinv_at * lam;
  if (r > config.tolerance) {
    // Coordinate ascent can crawl on nearly dependent constraint rows; finish
    // with the exact dual active-set method.
    const auto exact = active_set_solve(qp, llt, 10 * static_cast<int>(m + qp.dim()));
    if (exact.ok && kkt_residual(qp, exact.z, exact.lambda) <= config.tolerance) {
      sol.z = exact.z;
      sol.lambda = exact.lambda;
      sol.iterations += exact.iterations;
      r = 0.0;
    }
  }
  if (r <= config.tolerance) {
    sol.status = QpStatus::converged;
  } else {
    sol.status = QpStatus::max_iter;
    if (qp.project) sol.z = qp.project(sol.z);
  }
  sol.kkt_residual = kkt_residual(qp, sol.z, sol.lambda);
  sol.objective = qp.objective(sol.z);
  return sol;
}

}  // namespace meltpool
