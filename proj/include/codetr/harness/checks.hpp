#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace codetr::harness {

struct ModelGradCheck {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t elements = 0;
  int draws = 0;
};

// End-to-end MSE-loss gradient of a small reward model on one random segment
// against central differences, repeated over `draws` random parameter sets.
ModelGradCheck reward_model_gradcheck(int draws, std::uint64_t seed, int embed_dim = 8, int layers = 2,
                                      int segment_length = 3, double step = 1e-5);

struct OracleCheck {
  std::string name;
  double expected = 0.0;
  double observed = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Environment sanity checks against exact planners: random-policy return on
// chain_walk by DP vs Monte Carlo, and the cliff_grid value-iteration optimum
// vs the return of its greedy policy.
std::vector<OracleCheck> environment_oracle_checks(std::uint64_t seed, int rollouts = 1000);

}  // namespace codetr::harness
