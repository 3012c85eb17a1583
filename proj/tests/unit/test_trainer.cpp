#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "codetr/envs/planning.hpp"
#include "codetr/error.hpp"
#include "codetr/policy/baselines.hpp"
#include "codetr/policy/evaluation.hpp"
#include "codetr/trainer/alternation.hpp"
#include "codetr/trainer/trainer.hpp"

using namespace codetr;
using namespace codetr::trainer;

namespace {

model::RewardModelConfig model_config(int states, int actions) {
  model::RewardModelConfig c;
  c.state_dim = states;
  c.action_dim = actions;
  c.embed_dim = 16;
  c.max_window = 16;
  return c;
}

// Segments over random one-hot inputs whose hidden reward is linear in the
// state and action indicators.
std::vector<rewards::Segment> linear_dataset(std::size_t count, std::size_t n, int states, int actions,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> theta_s(states), theta_a(actions);
  for (auto& x : theta_s) x = g(rng);
  for (auto& x : theta_a) x = g(rng);
  std::vector<rewards::Segment> out(count);
  for (auto& seg : out) {
    seg.length = n;
    for (std::size_t t = 0; t < n; ++t) {
      const int s = static_cast<int>(rng() % states), a = static_cast<int>(rng() % actions);
      seg.states.push_back(s);
      seg.actions.push_back(a);
      seg.composite_reward += theta_s[s] + theta_a[a];
    }
  }
  return out;
}

double dataset_loss(const model::RewardModel& m, const std::vector<rewards::Segment>& data, double scale) {
  ad::NoGradGuard no_grad;
  return reward_model_loss(m, data, {}, scale).item() * scale * scale;
}

ReplayBuffer filled_buffer(std::size_t capacity, int delay, const char* spec, int episodes) {
  ReplayBuffer buffer(capacity, delay, rewards::CompositeSpec::parse(spec));
  envs::ChainWalk env(10, 30);
  for (int e = 0; e < episodes; ++e) {
    buffer.insert(envs::rollout(env, envs::uniform_random_policy(2), 30, static_cast<std::uint64_t>(e)));
  }
  return buffer;
}

std::vector<StepRef> random_refs(const ReplayBuffer& buffer, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<StepRef> refs;
  for (std::size_t i = 0; i < count; ++i) refs.push_back(buffer.step_ref(rng() % buffer.num_steps()));
  return refs;
}

}  // namespace

TEST(Loss, ZeroPredictionExamples) {
  model::RewardModel m(model_config(3, 2), 1);
  m.scale_reward_head(0.0);
  rewards::Segment seg;
  seg.length = 3;
  seg.states = {0, 1, 2};
  seg.actions = {1, 0, 1};
  seg.composite_reward = 0.0;
  EXPECT_EQ(reward_model_loss(m, std::span<const rewards::Segment>(&seg, 1)).item(), 0.0);
  seg.composite_reward = 2.0;
  EXPECT_EQ(reward_model_loss(m, std::span<const rewards::Segment>(&seg, 1)).item(), 4.0);
  EXPECT_EQ(reward_model_loss(m, std::span<const rewards::Segment>(&seg, 1), {}, 2.0).item(), 1.0);
}

TEST(Loss, ContractErrors) {
  model::RewardModel m(model_config(3, 2), 1);
  std::vector<rewards::Segment> empty;
  EXPECT_THROW(reward_model_loss(m, empty), ContractError);
  auto data = linear_dataset(1, 17, 3, 2, 1);
  EXPECT_THROW(reward_model_loss(m, data), ContractError);
  data = linear_dataset(1, 4, 3, 2, 1);
  EXPECT_THROW(reward_model_loss(m, data, {}, 0.0), ContractError);
}

TEST(Trainer, ZeroIterationsLeavesParametersUnchanged) {
  model::RewardModel m(model_config(4, 2), 3);
  const auto before = m.clone();
  RewardModelTrainer t(m, TrainerConfig{});
  const auto data = linear_dataset(20, 5, 4, 2, 2);
  envs::Rng rng(1);
  EXPECT_TRUE(train_on_segments(t, data, 0, rng).losses.empty());
  const auto a = before.parameters(), b = m.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(std::ranges::equal(a[i].data(), b[i].data()));
  EXPECT_EQ(m.version(), before.version());
}

TEST(Trainer, EmptyBufferIsAContractError) {
  model::RewardModel m(model_config(11, 2), 3);
  RewardModelTrainer t(m, TrainerConfig{});
  ReplayBuffer buffer(100, 5, rewards::CompositeSpec::parse("sum"));
  envs::Rng rng(1);
  EXPECT_THROW(train_reward_model(t, buffer, 1, rng), ContractError);
}

TEST(Trainer, LossSeriesIsDeterministicGivenSeed) {
  const auto data = linear_dataset(50, 5, 4, 2, 2);
  std::vector<double> runs[2];
  for (auto& run : runs) {
    model::RewardModel m(model_config(4, 2), 7);
    RewardModelTrainer t(m, TrainerConfig{});
    envs::Rng rng(11);
    run = train_on_segments(t, data, 30, rng).losses;
  }
  EXPECT_EQ(runs[0], runs[1]);
}

TEST(Trainer, FitsLinearRewardsWithinTwoThousandSteps) {
  const auto data = linear_dataset(500, 5, 6, 3, 5);
  model::RewardModel m(model_config(6, 3), 9);
  RewardModelTrainer t(m, TrainerConfig{});
  const double initial = dataset_loss(m, data, 1.0);
  envs::Rng rng(3);
  train_on_segments(t, data, 2000, rng);
  const double final_loss = dataset_loss(m, data, t.target_scale());
  EXPECT_LE(final_loss, 0.1 * initial) << "initial " << initial << " final " << final_loss;
}

TEST(Trainer, TargetScaleIsFixedOnce) {
  model::RewardModel m(model_config(4, 2), 1);
  RewardModelTrainer t(m, TrainerConfig{});
  const auto data = linear_dataset(10, 5, 4, 2, 1);
  envs::Rng rng(1);
  train_on_segments(t, data, 1, rng);
  EXPECT_TRUE(t.target_scale_fixed());
  std::vector<const rewards::Segment*> ptrs;
  for (const auto& s : data) ptrs.push_back(&s);
  EXPECT_EQ(t.target_scale(), rms_target_scale(ptrs));
  EXPECT_THROW(t.set_target_scale(2.0), ContractError);

  TrainerConfig raw;
  raw.normalize_targets = false;
  model::RewardModel m2(model_config(4, 2), 1);
  RewardModelTrainer t2(m2, raw);
  train_on_segments(t2, data, 1, rng);
  EXPECT_EQ(t2.target_scale(), 1.0);
}

TEST(ReplayBuffer, EvictsWholeTrajectoriesInInsertionOrder) {
  ReplayBuffer buffer(25, 3, rewards::CompositeSpec::parse("sum"));
  envs::ChainWalk env(10, 10);
  for (int e = 0; e < 5; ++e) {
    buffer.insert(envs::rollout(env, envs::uniform_random_policy(2), 10, static_cast<std::uint64_t>(e)));
    EXPECT_LE(buffer.num_steps(), 25u);
    for (std::size_t i = 0; i < buffer.num_trajectories(); ++i) {
      const auto& tr = buffer.trajectory(i);
      EXPECT_EQ(tr.id, buffer.insertions() - buffer.num_trajectories() + i);
      std::size_t covered = 0;
      for (const auto& seg : tr.segments) {
        EXPECT_EQ(seg.start, covered);
        covered += seg.length;
      }
      EXPECT_EQ(covered, tr.trajectory.size());
    }
  }
  EXPECT_EQ(buffer.num_trajectories(), 2u);
}

TEST(ReplayBuffer, InsertionNeverMutatesStoredSegments) {
  ReplayBuffer buffer(10000, 4, rewards::CompositeSpec::parse("sumsquare"));
  envs::ChainWalk env(10, 30);
  buffer.insert(envs::rollout(env, envs::uniform_random_policy(2), 30, 1));
  const auto first = buffer.trajectory(0).segments;
  for (std::uint64_t s = 2; s < 20; ++s) {
    buffer.insert(envs::rollout(env, envs::uniform_random_policy(2), 30, s));
    const auto& now = buffer.trajectory(0).segments;
    ASSERT_EQ(now.size(), first.size());
    for (std::size_t k = 0; k < now.size(); ++k) {
      EXPECT_EQ(now[k].composite_reward, first[k].composite_reward);
      EXPECT_EQ(now[k].states, first[k].states);
      EXPECT_EQ(now[k].actions, first[k].actions);
    }
  }
}

TEST(Relabeling, BulkMatchesPerStepExactly) {
  const auto buffer = filled_buffer(10000, 5, "sumsquare", 10);
  CodetrRelabeler codetr(model::RewardModel(model_config(11, 2), 4), TrainerConfig{}, 5);
  envs::Rng rng(2);
  codetr.train(buffer, 3, rng);
  const auto refs = random_refs(buffer, 200, 8);  // includes repeats
  const auto bulk = relabeled_rewards(codetr, buffer, refs);
  ASSERT_EQ(bulk.size(), refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    EXPECT_EQ(bulk[i], codetr.relabel_step(buffer, refs[i]));
    EXPECT_TRUE(std::isfinite(bulk[i]));
  }
  const policy::BaselineRelabeler ircr(policy::BaselineKind::Ircr);
  const auto base = relabeled_rewards(ircr, buffer, refs);
  for (std::size_t i = 0; i < refs.size(); ++i) EXPECT_EQ(base[i], ircr.relabel_step(buffer, refs[i]));
}

TEST(Relabeling, CacheIsCoherentAcrossModelUpdates) {
  const auto buffer = filled_buffer(10000, 5, "sum", 10);
  CodetrRelabeler codetr(model::RewardModel(model_config(11, 2), 4), TrainerConfig{}, 5);
  const auto refs = random_refs(buffer, 100, 3);
  const auto first = relabeled_rewards(codetr, buffer, refs);
  EXPECT_EQ(relabeled_rewards(codetr, buffer, refs), first);
  envs::Rng rng(2);
  codetr.train(buffer, 2, rng);
  const auto after = relabeled_rewards(codetr, buffer, refs);
  EXPECT_NE(after, first);
  for (std::size_t i = 0; i < refs.size(); ++i) EXPECT_EQ(after[i], codetr.relabel_step(buffer, refs[i]));
  EXPECT_EQ(relabel_buffer(codetr, buffer).size(), buffer.num_trajectories());
}

TEST(Relabeling, ExportedModelFoldsInTheTargetScale) {
  const auto buffer = filled_buffer(10000, 5, "sumsquare", 10);
  CodetrRelabeler codetr(model::RewardModel(model_config(11, 2), 4), TrainerConfig{}, 5);
  envs::Rng rng(2);
  codetr.train(buffer, 5, rng);
  ASSERT_NE(codetr.target_scale(), 1.0);
  const auto exported = codetr.export_model();
  const auto& steps = buffer.trajectory(3).trajectory.steps;
  std::vector<int> s, a;
  for (const auto& t : steps) {
    s.push_back(t.state);
    a.push_back(t.action);
  }
  const auto relabels = model::relabel(exported, model::Window::one_hot(s, a, 11, 2), 5);
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const double expected = codetr.relabel_step(buffer, {3, t});
    EXPECT_NEAR(relabels[t], expected, 1e-12 * std::max(1.0, std::abs(expected))) << t;
  }
}

TEST(Alternation, OracleInjectionIsPlainQLearning) {
  // A relabeler that reads the hidden reward itself, bypassing every cache
  // and bulk path, must produce the same run as the built-in oracle.
  class Direct final : public RewardRelabeler {
   public:
    std::string name() const override { return "direct"; }
    std::uint64_t cache_key(const ReplayBuffer&) const override { return 0; }
    double relabel_step(const ReplayBuffer& b, const StepRef& r) const override {
      return b.trajectory(r.trajectory).trajectory.steps[r.step].hidden_reward;
    }
  };
  envs::CliffGrid env;
  AlternationConfig cfg;
  cfg.total_env_steps = 50000;
  cfg.eval_interval = 10000;
  cfg.eval_episodes = 3;
  const auto spec = rewards::CompositeSpec::parse("sum");
  policy::QTable a(env.num_states(), env.num_actions()), b(env.num_states(), env.num_actions());
  OracleRelabeler oracle;
  Direct direct;
  const auto la = run_alternation(env, spec, 5, oracle, a, cfg, 7);
  const auto lb = run_alternation(env, spec, 5, direct, b, cfg, 7);
  EXPECT_EQ(a.values(), b.values());
  ASSERT_EQ(la.rows.size(), lb.rows.size());
  for (std::size_t i = 0; i < la.rows.size(); ++i) EXPECT_EQ(la.rows[i].eval_return, lb.rows[i].eval_return);
  const auto vi = envs::value_iteration(env, cfg.q.gamma);
  EXPECT_NEAR(la.rows.back().eval_return, envs::deterministic_policy_return(env, vi.greedy), 1e-2);
}

TEST(Alternation, NoPolicyUpdatesStaysAtRandomLevel) {
  envs::ChainWalk env(10, 30);
  AlternationConfig cfg;
  cfg.total_env_steps = 3000;
  cfg.eval_interval = 1000;
  cfg.eval_episodes = 400;
  cfg.policy_updates_per_step = 0.0;
  policy::QTable q(env.num_states(), 2);
  OracleRelabeler oracle;
  const auto log = run_alternation(env, rewards::CompositeSpec::parse("sum"), 5, oracle, q, cfg, 3);
  EXPECT_EQ(q.values(), std::vector<double>(q.values().size(), 0.0));
  const double exact = envs::random_policy_expected_return(env);
  for (const auto& row : log.rows) {
    EXPECT_EQ(row.eval_return, log.rows.front().eval_return);
    EXPECT_TRUE(std::isnan(row.model_loss));
  }
  const auto ev = policy::evaluate_policy(env, q, cfg.eval_episodes, 0);
  EXPECT_LT(std::abs(log.rows.front().eval_return - exact), 3.0 * ev.stddev / std::sqrt(400.0) + 1e-12);
}

TEST(Alternation, SmoothedModelLossIsNonIncreasing) {
  envs::ChainWalk env(10, 30);
  AlternationConfig cfg;
  cfg.total_env_steps = 20000;
  cfg.eval_interval = 5000;
  cfg.eval_episodes = 5;
  cfg.buffer_capacity = 20000;
  policy::QTable q(env.num_states(), 2);
  auto mc = model::RewardModelConfig{};
  mc.state_dim = env.num_states();
  mc.action_dim = 2;
  CodetrRelabeler codetr(model::RewardModel(mc, 1), cfg.trainer, 5);
  const auto log = run_alternation(env, rewards::CompositeSpec::parse("sum"), 5, codetr, q, cfg, 1);
  ASSERT_GE(log.model_losses.size(), 500u);
  constexpr std::size_t kWindow = 50;
  std::vector<double> smoothed;
  for (std::size_t b = 0; b + kWindow <= log.model_losses.size(); b += kWindow) {
    double s = 0.0;
    for (std::size_t i = b; i < b + kWindow; ++i) s += log.model_losses[i];
    smoothed.push_back(s / kWindow);
  }
  for (std::size_t i = 1; i < smoothed.size(); ++i) EXPECT_LE(smoothed[i], smoothed[i - 1]) << "window " << i;
}

TEST(Alternation, LogCsvFormat) {
  std::ostringstream out;
  write_log_header(out);
  LogRow row;
  row.step = 5;
  row.eval_return = 0.5;
  row.normalized_score = 0.25;
  row.model_loss = std::numeric_limits<double>::quiet_NaN();
  row.mean_abs_weight_dev = std::numeric_limits<double>::quiet_NaN();
  write_log_row(out, row);
  EXPECT_EQ(out.str(), std::string(kLogHeader) + "\n5,0.5,0.25,nan,nan\n");
}
