#include <cmath>

#include <gtest/gtest.h>

#include "meltpool/harness.hpp"

using namespace meltpool;

namespace {

std::vector<StepRecord> two_tracks(const std::vector<double>& area, int per_track, const std::vector<double>& power) {
  std::vector<StepRecord> out;
  for (std::size_t i = 0; i < area.size(); ++i) {
    StepRecord r;
    r.step = static_cast<int>(i);
    r.time_s = i * 50e-6;
    r.track = static_cast<int>(i) / per_track;
    r.track_step = static_cast<int>(i) % per_track;
    r.melt_area_mm2 = area[i];
    r.power_w = power.empty() ? 250.0 : power[i];
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(Metrics, WorkedExample) {
  // x_ref = 1: max 1.3, min 0.8, residuals 0.3, -0.2, 0.1, 0
  auto m = compute_metrics({1.3, 0.8, 1.1, 1.0}, 1.0);
  EXPECT_NEAR(m.overshoot_pct, 30.0, 1e-12);
  EXPECT_NEAR(m.undershoot_pct, 20.0, 1e-12);
  EXPECT_NEAR(m.rmse_pct, 100.0 * std::sqrt((0.09 + 0.04 + 0.01) / 4.0), 1e-12);
  EXPECT_EQ(m.steady_samples, 4u);
}

TEST(Metrics, FloorsAtZeroAndHonoursMasks) {
  auto m = compute_metrics({0.9, 0.95}, 1.0);
  EXPECT_EQ(m.overshoot_pct, 0.0);
  MetricWindows w{{false, true, true}, {false, false, true}};
  auto n = compute_metrics({5.0, 1.2, 1.0}, 1.0, w);
  EXPECT_NEAR(n.overshoot_pct, 20.0, 1e-12);
  EXPECT_EQ(n.rmse_pct, 0.0);
  EXPECT_EQ(n.steady_samples, 1u);
  EXPECT_THROW(compute_metrics({}, 1.0), std::invalid_argument);
  EXPECT_THROW(compute_metrics({1.0}, 0.0), std::invalid_argument);
}

TEST(Metrics, StartupWindowsAndTransitionPeak) {
  // 10 samples per track, 0.2 ms window -> 4 start-up samples per track
  std::vector<double> area(20, 1.0);
  area[0] = 0.0;
  area[11] = 3.0;
  area[15] = 1.5;
  auto recs = two_tracks(area, 10, {});
  auto w = startup_windows(recs, 50e-6, 0.2e-3);
  EXPECT_FALSE(w.steady[3]);
  EXPECT_TRUE(w.steady[4]);
  EXPECT_FALSE(w.extremes[0]);
  EXPECT_TRUE(w.extremes[11]);
  EXPECT_FALSE(w.steady[11]);
  EXPECT_NEAR(transition_overshoot_pct(recs, 1.0, 50e-6, 0.2e-3), 200.0, 1e-12);
  auto m = compute_metrics(area, 1.0, w);
  EXPECT_NEAR(m.overshoot_pct, 200.0, 1e-12);
  EXPECT_NEAR(m.rmse_pct, 100.0 * std::sqrt(0.25 / 12.0), 1e-12);
}

TEST(Metrics, PowerSlopePerTrack) {
  std::vector<double> p;
  for (int i = 0; i < 20; ++i) p.push_back(i < 10 ? 100.0 + 50e-6 * i * 1000.0 : 300.0 - 50e-6 * i * 2000.0);
  auto recs = two_tracks(std::vector<double>(20, 1.0), 10, p);
  auto s = power_slopes(recs, 50e-6, 0.2e-3);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_NEAR(s[0], 1000.0, 1e-6);
  EXPECT_NEAR(s[1], -2000.0, 1e-6);
}

TEST(Stats, MedianAndPercentile) {
  EXPECT_EQ(median_of({3, 1, 2}), 2.0);
  EXPECT_EQ(median_of({4, 1, 2, 3}), 2.5);
  EXPECT_NEAR(percentile_of({1, 2, 3, 4, 5}, 95), 4.8, 1e-12);
}

TEST(TrackTest, PlanShape) {
  HarnessConfig h;
  auto plan = make_track_test(h);
  ASSERT_EQ(plan.tracks.size(), 4u);
  EXPECT_NEAR(plan.tracks[0].length(), 10.0, 1e-12);
  EXPECT_EQ(plan.tracks[1].direction(), -1.0);
  EXPECT_EQ(plan.power.eval(0.005), 250.0);
}

TEST(RunTable, RoundTrip) {
  std::vector<RunRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].plant.step = i;
    rows[i].plant.time_s = i * 50e-6;
    rows[i].plant.power_w = 200 + i;
    rows[i].cmd_power = 201 + i;
    rows[i].mpc_power = 190 + i;
    rows[i].ff_term = -1.0 / 3.0;
    rows[i].solver_status = "converged";
    rows[i].solver_iters = i;
  }
  auto back = run_rows_from_table(run_table(rows));
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[2].ff_term, rows[2].ff_term);
  EXPECT_EQ(back[2].solver_iters, 2);
  EXPECT_EQ(back[1].cmd_power, 202.0);
  EXPECT_EQ(back[1].mpc_power, 191.0);
}
