#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "codetr/envs/environment.hpp"
#include "codetr/envs/planning.hpp"
#include "codetr/error.hpp"

using namespace codetr;
using namespace codetr::envs;

namespace {

std::vector<std::unique_ptr<Environment>> all_envs() {
  std::vector<std::unique_ptr<Environment>> out;
  out.push_back(make_env("chain_walk", {}, 0));
  out.push_back(make_env("chain_walk", {{"slip", 0.2}}, 0));
  out.push_back(make_env("peaked_chain", {}, 0));
  out.push_back(make_env("cliff_grid", {}, 0));
  return out;
}

int always(int action) { return action; }

}  // namespace

TEST(Envs, TransitionRowsAreDistributionsAndRewardsBounded) {
  for (const auto& env : all_envs()) {
    const auto mu = env->initial_distribution();
    EXPECT_NEAR(std::accumulate(mu.begin(), mu.end(), 0.0), 1.0, 1e-12) << env->name();
    double largest = -1e300;
    for (int s = 0; s < env->num_states(); ++s) {
      for (int a = 0; a < env->num_actions(); ++a) {
        double p = 0.0;
        for (const auto& o : env->outcomes(s, a)) {
          p += o.probability;
          EXPECT_LE(std::abs(o.reward), env->r_max() + 1e-15) << env->name();
          largest = std::max(largest, o.reward);
        }
        EXPECT_NEAR(p, 1.0, 1e-12) << env->name();
      }
    }
    EXPECT_NEAR(largest, env->r_max(), 1e-15) << env->name();
  }
}

TEST(ChainWalk, AlwaysRightEarnsOneOverTenSteps) {
  ChainWalk env(10, 30);
  const auto traj = rollout(env, [](int, Rng&) { return always(1); }, 30, 0);
  EXPECT_EQ(traj.size(), 10u);
  EXPECT_NEAR(traj.hidden_return(), 1.0, 1e-12);
  EXPECT_TRUE(traj.steps.back().terminal);
}

TEST(PeakedChain, FullTraversalPeaksAtTheMidpoint) {
  PeakedChain env(10, 10);
  const auto traj = rollout(env, [](int, Rng&) { return always(0); }, 10, 0);
  ASSERT_EQ(traj.size(), 10u);
  std::size_t best = 0;
  for (std::size_t t = 1; t < traj.size(); ++t)
    if (traj.steps[t].hidden_reward > traj.steps[best].hidden_reward) best = t;
  // Step t lands on cell t + 1, and the bonus peaks at cell 5.
  EXPECT_EQ(traj.steps[best].next_state, 5);
  EXPECT_EQ(best, 4u);
}

TEST(PeakedChain, EveryFiveStepWindowHasOneDominantReward) {
  PeakedChain env(10, 200);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto traj = rollout(env, uniform_random_policy(2), 200, seed);
    for (std::size_t begin = 0; begin + 5 <= traj.size(); begin += 5) {
      std::vector<double> r;
      for (std::size_t t = begin; t < begin + 5; ++t) r.push_back(traj.steps[t].hidden_reward);
      const auto top = std::max_element(r.begin(), r.end());
      EXPECT_EQ(std::count(r.begin(), r.end(), *top), 1);
    }
  }
}

TEST(CliffGrid, SteppingIntoTheCliffEndsTheEpisode) {
  CliffGrid env;
  env.seed(1);
  env.reset();
  const auto r = env.step(1);  // right from the start cell
  EXPECT_EQ(r.reward, -1.0);
  EXPECT_TRUE(r.terminal);
  EXPECT_TRUE(r.done());
  EXPECT_THROW(env.step(0), ContractError);
}

TEST(Rollout, DeterministicGivenSeed) {
  for (const auto& env : all_envs()) {
    const auto a = rollout(*env, uniform_random_policy(env->num_actions()), 40, 77);
    const auto b = rollout(*env, uniform_random_policy(env->num_actions()), 40, 77);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
      EXPECT_EQ(a.steps[t].state, b.steps[t].state);
      EXPECT_EQ(a.steps[t].action, b.steps[t].action);
      EXPECT_EQ(a.steps[t].hidden_reward, b.steps[t].hidden_reward);
    }
  }
}

TEST(Rollout, MaxStepsBoundsLength) {
  ChainWalk env;
  EXPECT_EQ(rollout(env, uniform_random_policy(2), 1, 3).size(), 1u);
  EXPECT_TRUE(rollout(env, uniform_random_policy(2), 1, 3).steps[0].done);
  EXPECT_THROW(rollout(env, uniform_random_policy(2), 0, 3), ContractError);
}

// Exact expectation by brute-force enumeration of every action sequence,
// independent of the planner's occupancy recursion.
TEST(Planning, RandomPolicyReturnMatchesEnumeration) {
  ChainWalk env(4, 8);
  double expected = 0.0;
  for (int mask = 0; mask < (1 << 8); ++mask) {
    int s = 0;
    double total = 0.0;
    for (int t = 0; t < 8; ++t) {
      const auto o = env.outcomes(s, (mask >> t) & 1).front();
      total += o.reward;
      s = o.next_state;
      if (o.terminal) break;
    }
    expected += total / 256.0;
  }
  EXPECT_NEAR(random_policy_expected_return(env), expected, 1e-12);
}

TEST(Planning, RandomPolicyMonteCarloWithinThreeStandardErrors) {
  ChainWalk env(10, 30);
  const double exact = random_policy_expected_return(env);
  const int n = 1000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rollout(env, uniform_random_policy(2), 30, 1000 + i).hidden_return();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / (n - 1));
  EXPECT_LT(std::abs(mean - exact), 3.0 * se);
}

TEST(Planning, CliffOptimumReproducedByGreedyPolicy) {
  CliffGrid env;
  const auto vi = value_iteration(env, 1.0 - 1e-9);
  // Shortest safe path: up, 11 x right, down = 13 steps, the last one +1.
  const double optimum = 1.0 - 0.01 * 12;
  EXPECT_NEAR(deterministic_policy_return(env, vi.greedy), optimum, 1e-9);
}

TEST(MakeEnv, RejectsUnknownNamesAndParameters) {
  EXPECT_THROW(make_env("mountain_car", {}, 0), ConfigError);
  EXPECT_THROW(make_env("chain_walk", {{"lenght", 5}}, 0), ConfigError);
  EXPECT_THROW(make_env("peaked_chain", {{"length", 2}}, 0), ConfigError);
}
