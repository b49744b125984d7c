#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "meltpool/mpc.hpp"

using namespace meltpool;

TEST(Feedforward, DirectAndDifferentialTerms) {
  EXPECT_DOUBLE_EQ(feedforward_term(453, 453, 353, 0.5, 2.0), -50.0);
  EXPECT_DOUBLE_EQ(feedforward_term(453, 403, 353, 0.0, 2.0), -100.0);
  EXPECT_DOUBLE_EQ(feedforward_term(353, 353, 353, 0.5, 2.0), 0.0);
}

TEST(MpcController, RegulatesSyntheticPlantToSetPoint) {
  auto model = fixtures::synthetic_model();
  MpcConfig cfg;
  cfg.x_ref = 0.0035;
  MpcController ctl(model, cfg);
  double x = 0.002;
  for (int k = 0; k < 80; ++k) {
    const auto out = ctl.step(x, 400.0);
    EXPECT_GE(out.power, cfg.p_lower);
    EXPECT_LE(out.power, cfg.p_upper);
    x = fixtures::synthetic_plant(x, 400.0, out.power, out.speed);
  }
  EXPECT_NEAR(x, cfg.x_ref, 0.02 * cfg.x_ref);
}

TEST(MpcController, RespectsRateLimitsEveryStep) {
  auto model = fixtures::synthetic_model();
  MpcConfig cfg;
  cfg.dp_lower = -20;
  cfg.dp_upper = 20;
  cfg.x_ref = 0.0045;
  MpcController ctl(model, cfg);
  double x = 0.002, p_prev = cfg.initial_power;
  for (int k = 0; k < 40; ++k) {
    const auto out = ctl.step(x, 380.0);
    EXPECT_LE(std::abs(out.power - p_prev), 20.0 + 1e-9);
    p_prev = out.power;
    x = fixtures::synthetic_plant(x, 380.0, out.power, out.speed);
  }
}

TEST(MpcController, FeedforwardAddsOnTopOfMpc) {
  auto model = fixtures::synthetic_model();
  MpcConfig cfg;
  MpcConfig ff = cfg;
  ff.k_ff = 0.2;
  MpcController a(model, cfg), b(model, ff);
  const auto oa = a.step(0.0027, 453.0);
  const auto ob = b.step(0.0027, 453.0);
  EXPECT_DOUBLE_EQ(ob.mpc_power, oa.mpc_power);
  EXPECT_DOUBLE_EQ(ob.ff_term, -20.0);
  EXPECT_NEAR(ob.power, std::clamp(oa.mpc_power - 20.0, 0.0, 350.0), 1e-12);
}

TEST(MpcController, SpeedControlStaysInBounds) {
  auto model = fixtures::synthetic_model();
  MpcConfig cfg;
  cfg.control_speed = true;
  cfg.x_ref = 0.004;
  MpcController ctl(model, cfg);
  double x = 0.002;
  for (int k = 0; k < 30; ++k) {
    const auto out = ctl.step(x, 400.0);
    EXPECT_GE(out.speed, cfg.v_lower);
    EXPECT_LE(out.speed, cfg.v_upper);
    x = fixtures::synthetic_plant(x, 400.0, out.power, out.speed);
  }
  EXPECT_NEAR(x, cfg.x_ref, 0.05 * cfg.x_ref);
}

TEST(MpcController, ResetRestoresInitialState) {
  auto model = fixtures::synthetic_model();
  MpcController ctl(model, MpcConfig{});
  const auto first = ctl.step(0.002, 400);
  ctl.step(0.003, 450);
  ctl.reset();
  const auto again = ctl.step(0.002, 400);
  EXPECT_EQ(first.power, again.power);
}

TEST(MpcConfig, ValidationAndJson) {
  MpcConfig c;
  c.r = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MpcConfig{};
  c.horizon = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MpcConfig{};
  c.k_d = 1.5;
  c.cost = CostMode::literal;
  nlohmann::json j = c;
  auto back = j.get<MpcConfig>();
  EXPECT_EQ(back.k_d, 1.5);
  EXPECT_EQ(back.cost, CostMode::literal);
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  EXPECT_THROW(control_step(*fixtures::synthetic_model(), NAN, 400, 400, 250, 800, MpcConfig{}),
               std::invalid_argument);
}

TEST(MpcController, ZeroAreaRestartsFromNominalPower) {
  auto model = fixtures::synthetic_model();
  MpcConfig cfg;
  cfg.reset_without_pool = true;
  cfg.initial_power = 230;
  cfg.k_ff = 0.5;
  MpcController ctl(model, cfg);
  ctl.step(0.004, 400);
  const auto out = ctl.step(0.0, 453);
  EXPECT_EQ(out.mpc_power, 230.0);
  EXPECT_EQ(out.iterations, 0);
  EXPECT_NEAR(out.power, 230.0 - 50.0, 1e-12);
  // without the option the QP reacts to the zero reading
  cfg.reset_without_pool = false;
  MpcController plain(model, cfg);
  plain.step(0.004, 400);
  EXPECT_NE(plain.step(0.0, 453).mpc_power, 230.0);
}
