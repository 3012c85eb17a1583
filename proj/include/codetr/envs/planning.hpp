#pragma once

#include <vector>

#include "codetr/envs/environment.hpp"

namespace codetr::envs {

struct ValueIterationResult {
  std::vector<double> values;                // V*(s)
  std::vector<std::vector<double>> q;        // Q*(s, a)
  std::vector<int> greedy;                   // argmax_a Q*(s, a), lowest index on ties
  int iterations = 0;
};

// Discounted infinite-horizon value iteration on the known model; stops once
// the Bellman residual drops below `tolerance`.
ValueIterationResult value_iteration(const Environment& env, double gamma, double tolerance = 1e-12,
                                     int max_iterations = 100000);

// Exact expected undiscounted return of the uniform random policy over the
// environment horizon, by forward dynamic programming over state occupancy.
double random_policy_expected_return(const Environment& env);

// Undiscounted return of a deterministic policy (one action per state) from
// the most likely initial state, following the most likely outcome.
double deterministic_policy_return(const Environment& env, const std::vector<int>& policy);

}  // namespace codetr::envs
