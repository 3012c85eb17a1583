#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "codetr/envs/environment.hpp"
#include "codetr/policy/q_table.hpp"
#include "codetr/rewards/composite.hpp"

namespace codetr::policy {

struct Evaluation {
  std::vector<double> returns;  // hidden true return per episode
  double mean_return = 0.0;
  double stddev = 0.0;
  // Mean per-episode sum of observed composite rewards, when a delay was given.
  double mean_composite_sum = 0.0;
};

struct DelaySetting {
  int delay = 1;
  rewards::CompositeSpec spec;
};

// Greedy rollouts of the table. Episodes are independent of any training RNG.
Evaluation evaluate_policy(const envs::Environment& env, const QTable& table, int episodes, std::uint64_t seed,
                           const std::optional<DelaySetting>& delay = std::nullopt);

}  // namespace codetr::policy
