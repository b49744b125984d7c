#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "meltpool/mpc.hpp"
#include "meltpool/qp.hpp"
#include "oracles.hpp"

using namespace meltpool;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Qp, UnconstrainedMinimizer) {
  QpProblem qp;
  qp.hessian = MatrixXd::Identity(2, 2) * 2.0;
  qp.gradient = VectorXd::Constant(2, -4.0);
  qp.a_ineq.resize(0, 2);
  qp.b_ineq.resize(0);
  auto s = solve_qp(qp);
  EXPECT_NEAR(s.z[0], 2.0, 1e-14);
  EXPECT_EQ(s.status, QpStatus::converged);
  EXPECT_EQ(s.iterations, 0);
}

TEST(Qp, ScalarClampOracle) {
  // min 0.5 h z^2 + f z, lo <= z <= hi  ->  clamp(-f/h, lo, hi)
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5), uh(0.1, 10);
  for (int t = 0; t < 200; ++t) {
    const double h = uh(rng), f = u(rng);
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    QpProblem qp;
    qp.hessian = MatrixXd::Constant(1, 1, h);
    qp.gradient = VectorXd::Constant(1, f);
    qp.a_ineq.resize(2, 1);
    qp.a_ineq << 1, -1;
    qp.b_ineq.resize(2);
    qp.b_ineq << hi, -lo;
    auto s = solve_qp(qp);
    EXPECT_NEAR(s.z[0], std::clamp(-f / h, lo, hi), 1e-8);
    EXPECT_EQ(s.status, QpStatus::converged);
  }
}

TEST(Qp, MatchesBruteForceOnRandomProblems) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 4, m = 2 + t % 7;
    MatrixXd l = MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
    QpProblem qp;
    qp.hessian = l * l.transpose() + 0.1 * MatrixXd::Identity(n, n);
    qp.gradient = VectorXd::NullaryExpr(n, [&] { return 3 * u(rng); });
    qp.a_ineq = MatrixXd::NullaryExpr(m, n, [&] { return u(rng); });
    qp.b_ineq = VectorXd::NullaryExpr(m, [&] { return 0.2 + std::abs(u(rng)); });  // z = 0 is feasible
    const auto ref = testing_oracles::brute_force_qp(qp);
    auto s = solve_qp(qp, {5000, 1e-10});
    EXPECT_LE(qp.max_violation(s.z), 1e-8);
    EXPECT_NEAR(s.objective, ref.objective, 1e-6) << "trial " << t;
    EXPECT_LE(kkt_residual(qp, s.z, s.lambda), 1e-6);
  }
}

TEST(Qp, StalledAscentFinishedExactly) {
  // nearly collinear rows: one coordinate sweep is far from optimal
  MatrixXd l(2, 2);
  l << 1, 0.999, 0.999, 1;
  QpProblem qp;
  qp.hessian = l;
  qp.gradient = VectorXd::Constant(2, -10);
  qp.a_ineq = MatrixXd::Identity(2, 2);
  qp.b_ineq = VectorXd::Constant(2, 1.0);
  auto s = solve_qp(qp, {1, 1e-12});
  const auto ref = testing_oracles::brute_force_qp(qp);
  EXPECT_EQ(s.status, QpStatus::converged);
  EXPECT_NEAR(s.objective, ref.objective, 1e-9);
}

TEST(Qp, InfeasibleReturnsProjectedIterate) {
  QpProblem qp;
  qp.hessian = MatrixXd::Identity(1, 1);
  qp.gradient = VectorXd::Zero(1);
  qp.a_ineq.resize(2, 1);
  qp.a_ineq << 1, -1;
  qp.b_ineq.resize(2);
  qp.b_ineq << 1, -2;  // z <= 1 and z >= 2
  qp.project = [](const VectorXd&) { return VectorXd::Constant(1, 1.5); };
  auto s = solve_qp(qp, {50, 1e-9});
  EXPECT_EQ(s.status, QpStatus::max_iter);
  EXPECT_EQ(s.z[0], 1.5);
}

TEST(Qp, RejectsIndefiniteHessian) {
  QpProblem qp;
  qp.hessian = -MatrixXd::Identity(1, 1);
  qp.gradient = VectorXd::Zero(1);
  qp.a_ineq.resize(0, 1);
  qp.b_ineq.resize(0);
  EXPECT_THROW(solve_qp(qp), std::invalid_argument);
}

namespace {

Linearization lin_at(double a, double b, double c) {
  Linearization l;
  l.a_d = a;
  l.b_d = Eigen::Vector2d(b, -1e-6);
  l.c_d = c;
  l.speed = 800;
  return l;
}

}  // namespace

TEST(MpcQp, HorizonOneClosedForm) {
  // One move w (scaled by s): x1 = a x0 + b (u_prev + s w) + c_eff.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ua(0.1, 0.9), ub(2e-6, 1e-5), ux(0.0015, 0.0035), up(150, 300);
  for (int t = 0; t < 100; ++t) {
    MpcConfig cfg;
    cfg.horizon = 1;
    cfg.qf = 5.0;
    const auto lin = lin_at(ua(rng), ub(rng), 1e-4);
    const double x0 = ux(rng), p0 = up(rng);
    const double s = cfg.power_scale, xs = cfg.effective_area_scale();
    const double c_eff = lin.c_d + lin.b_d[1] * lin.speed;
    const double e0 = (lin.a_d * x0 + lin.b_d[0] * p0 + c_eff - cfg.x_ref) / xs;
    const double g = lin.b_d[0] * s / xs;
    double w = -cfg.qf * g * e0 / (cfg.qf * g * g + cfg.r);
    const double p = std::clamp(p0 + s * w, cfg.p_lower, cfg.p_upper);
    auto mq = build_qp(lin, x0, VectorXd::Constant(1, p0), cfg);
    auto sol = solve_qp(mq.qp);
    EXPECT_NEAR(mq.inputs(sol.z)[0], p, 1e-8 * std::max(1.0, p));
  }
}

TEST(MpcQp, BruteForceOnSmallHorizons) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ua(0.2, 0.95), ub(2e-6, 2e-5), ux(0.0, 0.006), up(0, 350);
  for (int t = 0; t < 60; ++t) {
    MpcConfig cfg;
    cfg.horizon = 1 + t % 3;
    cfg.dp_lower = -60;
    cfg.dp_upper = 60;
    cfg.x_upper = 0.004;
    cfg.x_lower = 0.001;
    if (t % 2) cfg.cost = CostMode::literal;
    auto mq = build_qp(lin_at(ua(rng), ub(rng), 2e-4), ux(rng), VectorXd::Constant(1, up(rng)), cfg);
    if (!mq.feasible) continue;
    const auto ref = testing_oracles::brute_force_qp(mq.qp);
    auto sol = solve_qp(mq.qp, {20000, 1e-10});
    EXPECT_LE(mq.qp.max_violation(sol.z), 1e-6);
    EXPECT_NEAR(mq.qp.objective(sol.z), ref.objective, 1e-6 * std::max(1.0, std::abs(ref.objective)))
        << t;
  }
}

TEST(MpcQp, PredictionOperatorMatchesRecursion) {
  MpcConfig cfg;
  cfg.horizon = 6;
  const auto lin = lin_at(0.6, 5e-6, 3e-4);
  auto mq = build_qp(lin, 0.002, VectorXd::Constant(1, 240.0), cfg);
  VectorXd z = VectorXd::Random(mq.qp.dim()) * 0.1;
  const VectorXd u = mq.inputs(z), x = mq.states(z);
  double xk = 0.002;
  for (int i = 0; i < cfg.horizon; ++i) {
    xk = lin.apply(xk, u[i], lin.speed);
    EXPECT_NEAR(x[i], xk, 1e-15);
  }
  // tracking mode: inputs are the running sum of scaled moves
  double acc = 240.0;
  for (int i = 0; i < cfg.horizon; ++i) {
    acc += cfg.power_scale * z[i];
    EXPECT_NEAR(u[i], acc, 1e-12);
  }
}

TEST(MpcQp, ZeroStateWeightHoldsPreviousInput) {
  MpcConfig cfg;
  cfg.q = 0;
  cfg.qf = 0;
  auto mq = build_qp(lin_at(0.5, 5e-6, 1e-3), 0.003, VectorXd::Constant(1, 222.0), cfg);
  auto sol = solve_qp(mq.qp);
  for (Eigen::Index i = 0; i < cfg.horizon; ++i) EXPECT_NEAR(mq.inputs(sol.z)[i], 222.0, 1e-9);
}

TEST(MpcQp, RedundantRateRowsDropped) {
  MpcConfig cfg;
  cfg.horizon = 4;
  auto wide = build_qp(lin_at(0.5, 5e-6, 1e-3), 0.003, VectorXd::Constant(1, 200.0), cfg);
  cfg.dp_upper = 50;
  auto tight = build_qp(lin_at(0.5, 5e-6, 1e-3), 0.003, VectorXd::Constant(1, 200.0), cfg);
  EXPECT_EQ(tight.qp.constraint_count(), wide.qp.constraint_count() + 2 * cfg.horizon);
}

TEST(MpcQp, InfeasibleRateWindowIsDetected) {
  MpcConfig cfg;
  cfg.horizon = 3;
  cfg.dp_lower = -10;
  cfg.dp_upper = 10;
  // previous power far above the box cannot come back in time
  auto mq = build_qp(lin_at(0.5, 5e-6, 1e-3), 0.003, VectorXd::Constant(1, 500.0), cfg);
  EXPECT_FALSE(mq.feasible);
}
