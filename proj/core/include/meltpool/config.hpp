#pragma once

// Experiment configuration file: every knob of the pipeline in one JSON
// document with a schema_version field.

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "meltpool/dynamics.hpp"
#include "meltpool/harness.hpp"
#include "meltpool/mpc.hpp"
#include "meltpool/scan_plan.hpp"
#include "meltpool/thermal.hpp"

namespace meltpool {

inline constexpr int kConfigSchemaVersion = 1;

struct TrainingConfig {
  std::size_t train_count = 100;
  std::uint64_t split_seed = 11;
  bool keep_transitions = true;
  DynTrainConfig dynamics;
};

struct ExperimentConfig {
  MaterialParams material;
  LaserParams laser;
  SimConfig sim;
  DatagenDefaults datagen;
  TrainingConfig training;
  MpcConfig mpc;
  HarnessConfig harness;

  PlantSetup plant() const { return {sim, material, laser}; }
  void validate() const;
  /// Re-seeds data generation, the split and the optimizer from one value.
  void apply_seed(std::uint64_t seed);
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing sections keep their defaults; a wrong schema_version throws.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& c);

}  // namespace meltpool
