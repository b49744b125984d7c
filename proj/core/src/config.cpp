#include "meltpool/config.hpp"

#include <fstream>
#include <stdexcept>

namespace meltpool {

void ExperimentConfig::validate() const {
  material.validate();
  laser.validate();
  sim.validate();
  mpc.validate();
  harness.validate();
  if (training.train_count < 2) throw std::invalid_argument("training.train_count must be >= 2");
}

void ExperimentConfig::apply_seed(std::uint64_t seed) {
  datagen.seed = seed;
  training.split_seed = seed ^ 0x9e3779b97f4a7c15ULL;
  training.dynamics.optimizer.seed = seed + 1;
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
  j = {{"train_count", c.train_count},
       {"split_seed", c.split_seed},
       {"keep_transitions", c.keep_transitions},
       {"dynamics", c.dynamics}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
  const TrainingConfig d;
  c.train_count = j.value("train_count", d.train_count);
  c.split_seed = j.value("split_seed", d.split_seed);
  c.keep_transitions = j.value("keep_transitions", d.keep_transitions);
  c.dynamics = j.contains("dynamics") ? j.at("dynamics").get<DynTrainConfig>() : d.dynamics;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"schema_version", kConfigSchemaVersion},
       {"material", c.material},
       {"laser", c.laser},
       {"sim", c.sim},
       {"datagen", c.datagen},
       {"training", c.training},
       {"mpc", c.mpc},
       {"harness", c.harness}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  const int version = j.value("schema_version", -1);
  if (version != kConfigSchemaVersion)
    throw std::invalid_argument("config: schema_version must be " + std::to_string(kConfigSchemaVersion));
  ExperimentConfig out;
  if (j.contains("material")) out.material = j.at("material").get<MaterialParams>();
  if (j.contains("laser")) out.laser = j.at("laser").get<LaserParams>();
  if (j.contains("sim")) out.sim = j.at("sim").get<SimConfig>();
  if (j.contains("datagen")) out.datagen = j.at("datagen").get<DatagenDefaults>();
  if (j.contains("training")) out.training = j.at("training").get<TrainingConfig>();
  if (j.contains("mpc")) out.mpc = j.at("mpc").get<MpcConfig>();
  if (j.contains("harness")) out.harness = j.at("harness").get<HarnessConfig>();
  out.validate();
  c = std::move(out);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return j.get<ExperimentConfig>();
}

void save_experiment_config(const std::string& path, const ExperimentConfig& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << nlohmann::json(c).dump(2) << '\n';
}

}  // namespace meltpool
