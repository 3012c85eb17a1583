#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "codetr/envs/environment.hpp"
#include "codetr/policy/q_table.hpp"
#include "codetr/rewards/composite.hpp"
#include "codetr/trainer/relabeler.hpp"
#include "codetr/trainer/trainer.hpp"

namespace codetr::trainer {

struct LogRow {
  std::int64_t step = 0;
  double eval_return = 0.0;
  double normalized_score = 0.0;
  double model_loss = 0.0;           // NaN for methods without a model
  double mean_abs_weight_dev = 0.0;  // NaN for methods without a model
};

struct ExperimentLog {
  std::vector<LogRow> rows;
  std::vector<double> model_losses;  // every optimizer step, in order
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
};

// Fixed column order of the CSV form of the log.
inline constexpr const char* kLogHeader = "step,eval_return,normalized_score,model_loss,mean_abs_weight_dev";
void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const LogRow& row);

struct AlternationConfig {
  std::int64_t total_env_steps = 100000;
  std::int64_t eval_interval = 5000;
  int eval_episodes = 10;
  std::size_t buffer_capacity = 100000;  // in steps
  // Q-learning updates on replayed transitions per collected step.
  double policy_updates_per_step = 1.0;
  TrainerConfig trainer;
  policy::QLearningParams q;

  void validate() const;
};

// Alternates trajectory collection, reward-model updates, relabeling and
// Q-learning on the relabeled rewards, logging greedy evaluation on the
// hidden true reward. `on_row` sees each row as soon as it is produced.
ExperimentLog run_alternation(const envs::Environment& env, const rewards::CompositeSpec& spec, int delay,
                              RewardRelabeler& relabeler, policy::QTable& table, const AlternationConfig& config,
                              std::uint64_t seed, const std::function<void(const LogRow&)>& on_row = {});

}  // namespace codetr::trainer
