#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "meltpool/dynamics.hpp"

using namespace meltpool;

namespace {

// Smooth synthetic plant in physical units.
double synth(double x, double t, double p, double v) {
  return 0.4 * x + 1.2e-5 * p * (800.0 / v) + 2e-6 * (t - 353.0) + 1e-6 * std::sin(p / 40.0);
}

std::vector<DynSample> synth_samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.001, 0.004), ut(353, 700), up(100, 350), uv(500, 1100);
  std::vector<DynSample> out;
  for (int i = 0; i < n; ++i) {
    DynSample s{ux(rng), ut(rng), up(rng), uv(rng), 0.0, false};
    s.next_area = synth(s.area, s.temp, s.power, s.speed);
    out.push_back(s);
  }
  return out;
}

const DynModel& shared_model() {
  static const DynModel m = [] {
    DynTrainConfig cfg;
    cfg.optimizer.restarts = 2;
    return train_dynamics(synth_samples(120, 3), cfg);
  }();
  return m;
}

std::vector<StepRecord> log_of(int n, double dt) {
  std::vector<StepRecord> log;
  for (int k = 0; k < n; ++k) {
    StepRecord r;
    r.step = k;
    r.time_s = k * dt;
    r.melt_area_mm2 = 0.002 + 1e-4 * k;
    r.lookahead_temp_k = 353 + k;
    r.power_w = 250;
    r.speed_mm_s = 800;
    r.track = k < n / 2 ? 0 : 1;
    log.push_back(r);
  }
  return log;
}

}  // namespace

TEST(DynSamples, PairsConsecutiveRecords) {
  auto log = log_of(10, 50e-6);
  auto s = build_samples(log);
  ASSERT_EQ(s.size(), 9u);
  EXPECT_EQ(s[0].area, log[0].melt_area_mm2);
  EXPECT_EQ(s[0].next_area, log[1].melt_area_mm2);
  EXPECT_EQ(s[0].temp, log[0].lookahead_temp_k);
  EXPECT_TRUE(s[4].spans_transition);
  EXPECT_EQ(build_samples(log, false).size(), 8u);
}

TEST(DynSamples, RejectsDisorderAndMixedPeriods) {
  auto log = log_of(6, 50e-6);
  std::swap(log[2], log[3]);
  EXPECT_THROW(build_samples(log), std::invalid_argument);
  log = log_of(6, 50e-6);
  log[5].time_s += 25e-6;
  EXPECT_THROW(build_samples(log), std::invalid_argument);
}

TEST(Normalizer, StandardizesAndInverts) {
  auto s = synth_samples(50, 5);
  auto n = Normalizer::fit(s);
  Eigen::Vector4d mean = Eigen::Vector4d::Zero(), sq = Eigen::Vector4d::Zero();
  for (auto& d : s) {
    Eigen::Vector4d u = n.normalize_input({d.area, d.temp, d.power, d.speed});
    mean += u;
    sq += u.cwiseProduct(u);
  }
  mean /= s.size();
  sq /= s.size();
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(mean[i], 0.0, 1e-12);
    EXPECT_NEAR(sq[i], 1.0, 1e-12);  // population std
  }
  Eigen::Vector4d z(0.003, 500, 200, 900);
  EXPECT_LE((n.denormalize_input(n.normalize_input(z)) - z).norm(), 1e-12 * z.norm());
  EXPECT_NEAR(n.denormalize_target(n.normalize_target(0.0031)), 0.0031, 1e-15);

  auto flat = s;
  for (auto& d : flat) d.speed = 800;
  EXPECT_THROW(Normalizer::fit(flat), std::invalid_argument);
}

TEST(DynModel, LearnsSmoothPlant) {
  const auto& m = shared_model();
  auto test = synth_samples(200, 77);
  auto st = validate_model(m, test);
  EXPECT_GT(st.r2, 0.98);
  EXPECT_LT(st.mae_pct, 2.0);
}

TEST(DynModel, LinearizationMatchesFiniteDifferences) {
  const auto& m = shared_model();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(0.0015, 0.0035), ut(400, 650), up(150, 320), uv(600, 1000);
  for (int trial = 0; trial < 30; ++trial) {
    const double x = ux(rng), t = ut(rng), p = up(rng), v = uv(rng);
    const auto lin = m.linearize(x, t, p, v);
    const double hx = 1e-7, hp = 1e-3, hv = 1e-3;
    const double fx = (m.predict_raw(x + hx, t, p, v) - m.predict_raw(x - hx, t, p, v)) / (2 * hx);
    const double fp = (m.predict_raw(x, t, p + hp, v) - m.predict_raw(x, t, p - hp, v)) / (2 * hp);
    const double fv = (m.predict_raw(x, t, p, v + hv) - m.predict_raw(x, t, p, v - hv)) / (2 * hv);
    EXPECT_NEAR(lin.a_d, fx, 1e-4 * std::max(1.0, std::abs(fx)));
    EXPECT_NEAR(lin.b_d[0], fp, 1e-4 * std::max(1e-5, std::abs(fp)));
    EXPECT_NEAR(lin.b_d[1], fv, 1e-4 * std::max(1e-6, std::abs(fv)));
    // affine model is exact at the expansion point
    EXPECT_NEAR(lin.apply(x, p, v), m.predict_raw(x, t, p, v), 1e-15);
    EXPECT_NEAR(lin.predicted, m.predict_raw(x, t, p, v), 1e-15);
  }
}

TEST(DynModel, PredictionClampedAtZero) {
  const auto& m = shared_model();
  // far below the data the raw mean can dip negative; the prediction cannot
  for (double p : {0.0, 10.0, 50.0}) EXPECT_GE(m.predict_next(0.0, 353, p, 1200), 0.0);
}

TEST(DynModel, RolloutChainsOneStepPredictions) {
  const auto& m = shared_model();
  std::vector<double> temps{400, 410, 420, 430};
  std::vector<Eigen::Vector2d> inputs{{250, 800}, {260, 800}, {240, 820}, {250, 780}};
  auto xs = rollout(m, 0.0027, temps, inputs);
  ASSERT_EQ(xs.size(), 5u);
  EXPECT_EQ(xs[0], 0.0027);
  for (std::size_t k = 0; k < 4; ++k)
    EXPECT_EQ(xs[k + 1], m.predict_next(xs[k], temps[k], inputs[k][0], inputs[k][1]));
  temps.pop_back();
  EXPECT_THROW(rollout(m, 0.0027, temps, inputs), std::invalid_argument);
}

TEST(DynModel, JsonRoundTripIsExact) {
  const auto& m = shared_model();
  auto back = DynModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.predict_next(0.0025, 450, 230, 850), m.predict_next(0.0025, 450, 230, 850));
  EXPECT_EQ(back.sample_period_s(), m.sample_period_s());
  auto bad = m.to_json();
  bad["format"] = "something-else";
  EXPECT_THROW(DynModel::from_json(bad), std::exception);
}

TEST(Validation, StatsOnKnownPairs) {
  const auto& m = shared_model();
  std::vector<DynSample> s = synth_samples(10, 8);
  auto st = validate_model(m, s);
  double num = 0, den = 0, mean = 0;
  for (auto& d : s) mean += d.next_area / s.size();
  double ss_res = 0, ss_tot = 0;
  for (auto& d : s) {
    const double p = m.predict_next(d.area, d.temp, d.power, d.speed);
    num += std::abs(p - d.next_area);
    den += std::abs(d.next_area);
    ss_res += (p - d.next_area) * (p - d.next_area);
    ss_tot += (d.next_area - mean) * (d.next_area - mean);
  }
  EXPECT_NEAR(st.mae_pct, 100 * num / den, 1e-9);
  EXPECT_NEAR(st.r2, 1 - ss_res / ss_tot, 1e-9);
  EXPECT_EQ(st.count, 10u);
}
