#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "voxhand/common.hpp"

namespace voxhand {

struct PsoConfig {
  int swarm = 64;
  int iterations = 300;
  double omega = 0.729;
  double c1 = 1.49445;
  double c2 = 1.49445;
  std::uint64_t seed = 0;
};

struct PsoResult {
  std::vector<double> best;
  double cost = 0.0;
};

// Global-best particle swarm over a box. Velocities start at zero,
// positions are uniform in bounds (optionally overridden by seed points for
// the first particles), and every update clamps back into the box. The
// incumbent best is monotone in the iteration count, and the whole run is
// a pure function of the config seed.
inline PsoResult pso_minimize(const std::function<double(const std::vector<double>&)>& objective,
                              const std::vector<std::pair<double, double>>& bounds,
                              const PsoConfig& cfg,
                              const std::vector<std::vector<double>>& seeds = {}) {
  if (bounds.empty()) throw InvalidBounds("pso: empty bounds");
  for (const auto& [lo, hi] : bounds)
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
      throw InvalidBounds("pso: bounds must be finite with lo <= hi");
  if (cfg.swarm < 2) throw InvalidBounds("pso: swarm must be >= 2");
  if (cfg.iterations < 0) throw InvalidBounds("pso: negative iteration count");

  const std::size_t dim = bounds.size();
  const auto clamp_into = [&](std::vector<double>& x) {
    for (std::size_t d = 0; d < dim; ++d) {
      if (x[d] < bounds[d].first) x[d] = bounds[d].first;
      if (x[d] > bounds[d].second) x[d] = bounds[d].second;
    }
  };

  Rng rng(cfg.seed);
  std::vector<std::vector<double>> pos(cfg.swarm, std::vector<double>(dim));
  std::vector<std::vector<double>> vel(cfg.swarm, std::vector<double>(dim, 0.0));
  for (int i = 0; i < cfg.swarm; ++i) {
    if (i < static_cast<int>(seeds.size())) {
      if (seeds[i].size() != dim) throw InvalidBounds("pso: seed point has wrong dimension");
      pos[i] = seeds[i];
      clamp_into(pos[i]);
    } else {
      for (std::size_t d = 0; d < dim; ++d)
        pos[i][d] = rng.uniform(bounds[d].first, bounds[d].second);
    }
  }

  std::vector<std::vector<double>> pbest = pos;
  std::vector<double> pcost(cfg.swarm);
  int gbest = 0;
  for (int i = 0; i < cfg.swarm; ++i) {
    pcost[i] = objective(pos[i]);
    if (pcost[i] < pcost[gbest]) gbest = i;
  }
  std::vector<double> gbest_pos = pbest[gbest];
  double gbest_cost = pcost[gbest];

  for (int it = 0; it < cfg.iterations; ++it) {
    for (int i = 0; i < cfg.swarm; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        vel[i][d] = cfg.omega * vel[i][d] + cfg.c1 * r1 * (pbest[i][d] - pos[i][d]) +
                    cfg.c2 * r2 * (gbest_pos[d] - pos[i][d]);
        pos[i][d] += vel[i][d];
      }
      clamp_into(pos[i]);
      const double cost = objective(pos[i]);
      if (cost < pcost[i]) {
        pcost[i] = cost;
        pbest[i] = pos[i];
        if (cost < gbest_cost) {
          gbest_cost = cost;
          gbest_pos = pos[i];
        }
      }
    }
  }
  return {std::move(gbest_pos), gbest_cost};
}

}  // namespace voxhand
