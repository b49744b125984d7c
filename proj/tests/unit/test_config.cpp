#include <cstdio>

#include <gtest/gtest.h>

#include "meltpool/config.hpp"

using namespace meltpool;

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c;
  c.mpc.k_ff = 0.25;
  c.sim.boundary = BoundaryMode::insulated;
  c.sim.melt_region = MeltRegion::whole_plane;
  c.training.train_count = 77;
  c.harness.tracks = 3;
  c.training.dynamics.optimizer.min_sigma_n = 0.02;
  nlohmann::json j = c;
  EXPECT_EQ(j["schema_version"], kConfigSchemaVersion);
  auto back = j.get<ExperimentConfig>();
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
}

TEST(ExperimentConfig, PartialDocumentKeepsDefaults) {
  auto j = nlohmann::json::parse(R"({"schema_version":1,"mpc":{"horizon":7}})");
  auto c = j.get<ExperimentConfig>();
  EXPECT_EQ(c.mpc.horizon, 7);
  EXPECT_EQ(c.mpc.q, MpcConfig{}.q);
  EXPECT_EQ(c.sim.cell_size_um, SimConfig{}.cell_size_um);
  EXPECT_THROW(nlohmann::json::parse(R"({"schema_version":99})").get<ExperimentConfig>(), std::exception);
}

TEST(ExperimentConfig, SeedFansOut) {
  ExperimentConfig a, b;
  a.apply_seed(5);
  b.apply_seed(5);
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
  EXPECT_EQ(a.datagen.seed, 5u);
  b.apply_seed(6);
  EXPECT_NE(a.training.split_seed, b.training.split_seed);
  EXPECT_NE(a.training.dynamics.optimizer.seed, b.training.dynamics.optimizer.seed);
}

TEST(ExperimentConfig, FileRoundTripAndValidation) {
  ExperimentConfig c;
  c.mpc.horizon = 9;
  const std::string path = ::testing::TempDir() + "/exp_config.json";
  save_experiment_config(path, c);
  EXPECT_EQ(load_experiment_config(path).mpc.horizon, 9);
  std::remove(path.c_str());
  c.sim.cell_size_um = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(load_experiment_config("/nonexistent/x.json"), std::exception);
}
