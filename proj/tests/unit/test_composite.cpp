#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "codetr/envs/environment.hpp"
#include "codetr/error.hpp"
#include "codetr/rewards/composite.hpp"
#include "composite_oracle.hpp"

using namespace codetr;
using rewards::CompositeSpec;
using rewards::composite;

namespace {

std::vector<double> random_rewards(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> r(n);
  for (auto& x : r) x = u(rng);
  return r;
}

// Deterministic environment paying a scripted reward sequence, for DelayedEnv.
class ScriptedEnv final : public envs::Environment {
 public:
  ScriptedEnv(std::vector<double> rewards, int horizon) : rewards_(std::move(rewards)), horizon_(horizon) {}
  std::unique_ptr<Environment> clone() const override { return std::make_unique<ScriptedEnv>(*this); }
  std::string name() const override { return "scripted"; }
  int num_states() const override { return static_cast<int>(rewards_.size()) + 1; }
  int num_actions() const override { return 1; }
  int horizon() const override { return horizon_; }
  double r_max() const override { return *std::max_element(rewards_.begin(), rewards_.end()); }
  std::vector<double> initial_distribution() const override {
    std::vector<double> mu(num_states(), 0.0);
    mu[0] = 1.0;
    return mu;
  }
  std::vector<envs::Outcome> outcomes(int state, int) const override {
    const bool last = state + 1 == static_cast<int>(rewards_.size());
    return {{1.0, state + 1, rewards_[state], last}};
  }

 private:
  std::vector<double> rewards_;
  int horizon_;
};

std::vector<double> observed_stream(std::vector<double> hidden, int delay, const CompositeSpec& spec) {
  ScriptedEnv env(hidden, static_cast<int>(hidden.size()));
  env.seed(0);
  rewards::DelayedEnv delayed(env, delay, spec);
  delayed.reset();
  std::vector<double> observed;
  for (;;) {
    const auto s = delayed.step(0);
    observed.push_back(s.observed_reward);
    if (s.done) break;
  }
  return observed;
}

}  // namespace

TEST(Composite, SpecExamples) {
  const std::vector<double> r{1.0, -2.0, 3.0};
  EXPECT_EQ(composite(CompositeSpec::parse("sumsquare"), r), 6.0);
  EXPECT_EQ(composite(CompositeSpec::parse("squaresum"), r), 4.0);
  EXPECT_EQ(composite(CompositeSpec::parse("sum"), r), 2.0);
}

TEST(Composite, MaxHandValue) {
  const std::vector<double> r{0.0, 0.0, 1.0};
  const double e3 = std::exp(3.0);
  EXPECT_NEAR(composite(CompositeSpec::parse("max", 3.0), r), 3.0 * e3 / (e3 + 2.0), 1e-12);
  EXPECT_NEAR(composite(CompositeSpec::parse("max", 3.0), r), 2.7283, 1e-3);
}

TEST(Composite, MaxSmallBetaApproachesSum) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = random_rewards(rng, 1 + trial % 9);
    EXPECT_NEAR(composite(CompositeSpec::parse("max", 1e-8), r), composite(CompositeSpec::parse("sum"), r), 1e-6);
  }
}

TEST(Composite, MaxLargeBetaApproachesScaledMax) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> grid(17);
    for (int i = 0; i < 17; ++i) grid[i] = i - 8;
    std::shuffle(grid.begin(), grid.end(), rng);
    const std::size_t n = 1 + trial % 8;
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = 0.25 * grid[i];
    const double top = *std::max_element(r.begin(), r.end());
    EXPECT_NEAR(composite(CompositeSpec::parse("max", 50.0), r), static_cast<double>(n) * top, 1e-3);
  }
}

TEST(Composite, MatchesBruteForceOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto r = random_rewards(rng, 1 + trial % 12);
    for (const char* kind : {"sum", "sumsquare", "squaresum"}) {
      EXPECT_EQ(composite(CompositeSpec::parse(kind), r), oracle::evaluate(kind, r)) << kind;
    }
    EXPECT_NEAR(composite(CompositeSpec::parse("max", 3.0), r), oracle::evaluate("max", r, 3.0), 1e-9);
  }
}

TEST(Composite, PermutationInvariant) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    auto r = random_rewards(rng, 2 + trial % 7);
    for (const char* kind : {"sum", "sumsquare", "squaresum", "max"}) {
      const auto spec = CompositeSpec::parse(kind);
      const double before = composite(spec, r);
      auto shuffled = r;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      EXPECT_NEAR(composite(spec, shuffled), before, 1e-12 * std::max(1.0, std::abs(before))) << kind;
    }
  }
}

TEST(Composite, MaxDominatesSumForNonNegativeRewards) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> r(1 + trial % 10);
    for (auto& x : r) x = u(rng);
    EXPECT_GE(composite(CompositeSpec::parse("max", 0.5 + trial % 5), r) + 1e-12,
              composite(CompositeSpec::parse("sum"), r));
  }
}

TEST(Composite, RejectsEmptyAndBadSpecs) {
  EXPECT_THROW(composite(CompositeSpec::parse("sum"), std::vector<double>{}), ContractError);
  EXPECT_THROW(CompositeSpec::parse("median"), ConfigError);
  EXPECT_THROW(CompositeSpec::parse("max", 0.0), ConfigError);
  EXPECT_EQ(CompositeSpec::parse("SumSquare").kind, rewards::CompositeKind::SumSquare);
}

TEST(DelayedEnv, EmitsCompositeAtSegmentEnds) {
  const auto sum = CompositeSpec::parse("sum");
  EXPECT_EQ(observed_stream({1, 1, 1}, 3, sum), (std::vector<double>{0, 0, 3}));
  EXPECT_EQ(observed_stream({1, 1, 1}, 2, sum), (std::vector<double>{0, 2, 1}));
}

TEST(DelayedEnv, ObservedSumEqualsHiddenSumUnderSum) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto hidden = random_rewards(rng, 1 + trial % 23);
    const int delay = 1 + trial % 6;
    const auto observed = observed_stream(hidden, delay, CompositeSpec::parse("sum"));
    ASSERT_EQ(observed.size(), hidden.size());
    double h = 0.0, o = 0.0;
    for (std::size_t t = 0; t < hidden.size(); ++t) {
      h += hidden[t];
      o += observed[t];
      const bool boundary = (t + 1) % static_cast<std::size_t>(delay) == 0 || t + 1 == hidden.size();
      if (!boundary) {
        EXPECT_EQ(observed[t], 0.0);
      }
    }
    EXPECT_NEAR(o, h, 1e-12);
  }
}

TEST(DelayedEnv, MaxOnPeakedChainObservesOnlyAtBoundaries) {
  envs::PeakedChain env(10, 100);
  env.seed(3);
  rewards::DelayedEnv delayed(env, 25, CompositeSpec::parse("max", 3.0));
  delayed.reset();
  std::mt19937_64 rng(4);
  for (int t = 1; t <= 100; ++t) {
    const auto s = delayed.step(static_cast<int>(rng() % 2));
    if (t % 25 != 0) {
      EXPECT_EQ(s.observed_reward, 0.0) << t;
    } else {
      EXPECT_NE(s.observed_reward, 0.0) << t;
    }
  }
}

TEST(DelayedEnv, SteppingFinishedEpisodeIsAnError) {
  ScriptedEnv env({1.0}, 1);
  env.seed(0);
  rewards::DelayedEnv delayed(env, 2, CompositeSpec::parse("sum"));
  delayed.reset();
  EXPECT_TRUE(delayed.step(0).done);
  EXPECT_THROW(delayed.step(0), ContractError);
}

TEST(Segmentation, SplitsIntoConsecutiveSegments) {
  envs::ChainWalk env(10, 10);
  const auto right = [](int, envs::Rng&) { return 1; };
  auto traj = envs::rollout(env, right, 10, 1);
  ASSERT_EQ(traj.size(), 10u);
  auto segs = rewards::segment_trajectory(traj, 5, CompositeSpec::parse("sum"));
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].length, 5u);
  EXPECT_EQ(segs[1].start, 5u);

  traj.steps.resize(7);
  segs = rewards::segment_trajectory(traj, 5, CompositeSpec::parse("sum"));
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].length, 5u);
  EXPECT_EQ(segs[1].length, 2u);
  EXPECT_EQ(segs[1].states.size(), 2u);
  EXPECT_THROW(rewards::segment_trajectory(traj, 0, CompositeSpec::parse("sum")), ContractError);
}

TEST(Segmentation, SumOfCompositesEqualsHiddenReturnUnderSum) {
  envs::ChainWalk env(10, 40);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto traj = envs::rollout(env, envs::uniform_random_policy(2), 40, seed);
    double total = 0.0;
    for (const auto& s : rewards::segment_trajectory(traj, 3 + seed % 5, CompositeSpec::parse("sum"))) {
      total += s.composite_reward;
    }
    EXPECT_NEAR(total, traj.hidden_return(), 1e-12);
  }
}
