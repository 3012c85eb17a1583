#include "codetr/trainer/alternation.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "codetr/error.hpp"
#include "codetr/policy/evaluation.hpp"
#include "codetr/rewards/normalization.hpp"

namespace codetr::trainer {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_number(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

// Independent generator streams derived from the run seed.
std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

void write_log_header(std::ostream& out) { out << kLogHeader << '\n'; }

void write_log_row(std::ostream& out, const LogRow& row) {
  out << row.step << ',';
  write_number(out, row.eval_return);
  out << ',';
  write_number(out, row.normalized_score);
  out << ',';
  write_number(out, row.model_loss);
  out << ',';
  write_number(out, row.mean_abs_weight_dev);
  out << '\n';
}

void AlternationConfig::validate() const {
  if (total_env_steps < 1) throw ConfigError("total_env_steps must be >= 1");
  if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
  if (!(policy_updates_per_step >= 0.0)) throw ConfigError("policy_updates_per_step must be >= 0");
  if (!(q.alpha >= 0.0 && q.alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(q.gamma >= 0.0 && q.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(q.epsilon_start >= 0.0 && q.epsilon_start <= 1.0 && q.epsilon_end >= 0.0 && q.epsilon_end <= 1.0)) {
    throw ConfigError("epsilon must lie in [0, 1]");
  }
  trainer.validate();
}

ExperimentLog run_alternation(const envs::Environment& env, const rewards::CompositeSpec& spec, int delay,
                              RewardRelabeler& relabeler, policy::QTable& table, const AlternationConfig& config,
                              std::uint64_t seed, const std::function<void(const LogRow&)>& on_row) {
  config.validate();
  if (table.num_states() != env.num_states() || table.num_actions() != env.num_actions()) {
    throw ContractError("run_alternation: Q-table shape does not match the environment");
  }

  auto sim = env.clone();
  sim->seed(derive(seed, 1));
  rewards::DelayedEnv delayed(*sim, delay, spec);
  envs::Rng behavior(derive(seed, 2));
  envs::Rng replay(derive(seed, 3));
  envs::Rng model_rng(derive(seed, 4));
  const std::uint64_t eval_seed = derive(seed, 5);

  ReplayBuffer buffer(config.buffer_capacity, delay, spec);
  ExperimentLog log;
  const auto& tc = config.trainer;
  bool pretrained = false;
  std::int64_t gradient_steps = 0;
  double last_loss = kNaN;
  double update_credit = 0.0;
  std::int64_t next_eval = 0;

  const policy::DelaySetting delay_setting{delay, spec};
  auto evaluate = [&](std::int64_t step) {
    const auto ev = policy::evaluate_policy(env, table, config.eval_episodes, eval_seed, delay_setting);
    LogRow row;
    row.step = step;
    row.eval_return = ev.mean_return;
    row.normalized_score =
        rewards::normalized_score(spec, delay, env.horizon(), env.r_max(), ev.mean_composite_sum);
    row.model_loss = last_loss;
    row.mean_abs_weight_dev = buffer.empty() ? kNaN : relabeler.mean_abs_weight_deviation(buffer);
    if (!relabeler.trainable()) row.mean_abs_weight_dev = kNaN;
    log.rows.push_back(row);
    if (on_row) on_row(row);
  };

  auto train_block = [&](int iterations) {
    const auto budget = static_cast<std::int64_t>(tc.max_gradient_steps) - gradient_steps;
    const int n = static_cast<int>(std::min<std::int64_t>(iterations, std::max<std::int64_t>(budget, 0)));
    if (n <= 0) return;
    const auto stats = relabeler.train(buffer, n, model_rng);
    gradient_steps += static_cast<std::int64_t>(stats.losses.size());
    log.model_losses.insert(log.model_losses.end(), stats.losses.begin(), stats.losses.end());
    double s = 0.0;
    for (double l : stats.losses) s += l;
    if (!stats.losses.empty()) last_loss = s / static_cast<double>(stats.losses.size());
  };

  evaluate(0);
  next_eval = config.eval_interval;

  std::int64_t step = 0;
  while (step < config.total_env_steps) {
    envs::Trajectory traj;
    int state = delayed.reset();
    for (;;) {
      const double eps = policy::epsilon_at(config.q, step, config.total_env_steps);
      const int action = table.epsilon_greedy_action(state, eps, behavior);
      const auto r = delayed.step(action);
      envs::Transition tr;
      tr.state = state;
      tr.action = action;
      tr.next_state = r.next_state;
      tr.hidden_reward = r.hidden_reward;
      tr.observed_reward = r.observed_reward;
      tr.terminal = r.terminal;
      tr.done = r.done;
      traj.steps.push_back(tr);
      state = r.next_state;
      ++step;
      if (r.done) break;
    }
    const auto collected = static_cast<double>(traj.size());
    buffer.insert(std::move(traj));
    ++log.episodes;

    if (relabeler.trainable()) {
      if (!pretrained) {
        if (buffer.num_steps() >= static_cast<std::size_t>(tc.pretrain_steps)) {
          train_block(tc.pretrain_iterations);
          pretrained = true;
        }
      } else {
        train_block(tc.iterations_per_trajectory);
      }
    }

    update_credit += config.policy_updates_per_step * collected;
    const auto updates = static_cast<std::int64_t>(update_credit);
    update_credit -= static_cast<double>(updates);
    // Relabels do not depend on the Q-table, so the block's transitions are
    // drawn first and relabeled together.
    std::uniform_int_distribution<std::size_t> pick(0, buffer.num_steps() - 1);
    std::vector<StepRef> refs(static_cast<std::size_t>(updates));
    for (auto& ref : refs) ref = buffer.step_ref(pick(replay));
    const auto rewards = relabeled_rewards(relabeler, buffer, refs);
    for (std::size_t u = 0; u < refs.size(); ++u) {
      const auto& t = buffer.trajectory(refs[u].trajectory).trajectory.steps[refs[u].step];
      policy::QTransition qt;
      qt.state = t.state;
      qt.action = t.action;
      qt.next_state = t.next_state;
      qt.terminal = t.terminal;
      qt.reward = rewards[u];
      policy::q_update(table, qt, config.q);
    }

    // Episodes are never cut, so a row is stamped with the step count at
    // the end of the episode that crossed the interval boundary.
    if (step >= next_eval) {
      evaluate(step);
      while (next_eval <= step) next_eval += config.eval_interval;
    }
  }
  if (log.rows.back().step < step) evaluate(step);
  log.env_steps = step;
  return log;
}

}  // namespace codetr::trainer
