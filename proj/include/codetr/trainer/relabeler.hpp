#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "codetr/envs/environment.hpp"
#include "codetr/trainer/replay_buffer.hpp"

namespace codetr::model {
class RewardModel;
}

namespace codetr::trainer {

struct TrainingStats {
  std::vector<double> losses;
};

// Source of the per-step rewards that the policy learner consumes.
class RewardRelabeler {
 public:
  virtual ~RewardRelabeler() = default;

  virtual std::string name() const = 0;

  // Changes whenever the relabels this object produces may change; cached
  // values in the buffer are valid only under an equal key.
  virtual std::uint64_t cache_key(const ReplayBuffer& buffer) const = 0;

  // Relabeled reward for one stored step, computed without the cache.
  virtual double relabel_step(const ReplayBuffer& buffer, const StepRef& ref) const = 0;

  // Same values as relabel_step on each ref; may share work across them.
  virtual std::vector<double> relabel_steps(const ReplayBuffer& buffer, std::span<const StepRef> refs) const;

  // Learned relabelers fit themselves to the buffer's composite rewards.
  virtual bool trainable() const { return false; }
  virtual TrainingStats train(const ReplayBuffer& buffer, int iterations, envs::Rng& rng);

  // Mean |w_t - 1| over recent buffer segments; NaN when there are no weights.
  virtual double mean_abs_weight_deviation(const ReplayBuffer& buffer) const;

  virtual const model::RewardModel* reward_model() const { return nullptr; }
};

// Cached relabel: consults the buffer cache first and fills it on a miss.
double relabeled_reward(const RewardRelabeler& relabeler, const ReplayBuffer& buffer, const StepRef& ref);

// relabeled_reward for each ref, with all cache misses computed in one
// relabel_steps call.
std::vector<double> relabeled_rewards(const RewardRelabeler& relabeler, const ReplayBuffer& buffer,
                                      std::span<const StepRef> refs);

// Every stored step relabeled, per trajectory, through the cache.
std::vector<std::vector<double>> relabel_buffer(const RewardRelabeler& relabeler, const ReplayBuffer& buffer);

// The environment's hidden Markovian reward: the ideal relabel.
class OracleRelabeler final : public RewardRelabeler {
 public:
  std::string name() const override { return "oracle"; }
  std::uint64_t cache_key(const ReplayBuffer&) const override { return 0; }
  double relabel_step(const ReplayBuffer& buffer, const StepRef& ref) const override;
};

}  // namespace codetr::trainer
