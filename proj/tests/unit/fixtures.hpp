#pragma once

// Small learned model over a smooth synthetic plant, shared by controller tests.

#include <cmath>
#include <memory>
#include <random>

#include "meltpool/dynamics.hpp"

namespace fixtures {

inline double synthetic_plant(double x, double t, double p, double v) {
  return 0.4 * x + 1.2e-5 * p * (800.0 / v) + 2e-6 * (t - 353.0) + 1e-6 * std::sin(p / 40.0);
}

inline std::shared_ptr<const meltpool::DynModel> synthetic_model() {
  static const auto model = [] {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> ux(0.001, 0.005), ut(353, 700), up(50, 350), uv(500, 1100);
    std::vector<meltpool::DynSample> s;
    for (int i = 0; i < 120; ++i) {
      meltpool::DynSample d{ux(rng), ut(rng), up(rng), uv(rng), 0.0, false};
      d.next_area = synthetic_plant(d.area, d.temp, d.power, d.speed);
      s.push_back(d);
    }
    meltpool::DynTrainConfig cfg;
    cfg.optimizer.restarts = 2;
    return std::make_shared<const meltpool::DynModel>(meltpool::train_dynamics(s, cfg));
  }();
  return model;
}

}  // namespace fixtures
