#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "codetr/autodiff/adamw.hpp"
#include "codetr/model/reward_model.hpp"
#include "codetr/rewards/composite.hpp"
#include "codetr/trainer/relabeler.hpp"
#include "codetr/trainer/replay_buffer.hpp"

namespace codetr::trainer {

struct TrainerConfig {
  int batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  int warmup_steps = 100;
  // Environment steps collected before the first model update.
  int pretrain_steps = 1000;
  int pretrain_iterations = 50;
  int iterations_per_trajectory = 5;
  // Cap on optimizer steps over a whole run.
  int max_gradient_steps = 2000;
  // Regress R_co / s, where s is the RMS composite reward of the data seen at
  // the first training call; predictions are multiplied back by s.
  bool normalize_targets = true;

  // Values used for the original MuJoCo experiments.
  static TrainerConfig paper();
  void validate() const;
};

// Mean over the batch of (R_co / target_scale - R_hat_co)^2, each segment
// encoded as its own window.
ad::Tensor reward_model_loss(const model::RewardModel& model, std::span<const rewards::Segment* const> batch,
                             const model::EncodeOptions& options = {}, double target_scale = 1.0);
ad::Tensor reward_model_loss(const model::RewardModel& model, std::span<const rewards::Segment> batch,
                             const model::EncodeOptions& options = {}, double target_scale = 1.0);

// Root mean square of the composite rewards, or 1 when they are all zero.
double rms_target_scale(std::span<const rewards::Segment* const> segments);

model::Window segment_window(const model::RewardModel& model, const rewards::Segment& segment);

// AdamW optimisation of a reward model on composite-reward regression.
class RewardModelTrainer {
 public:
  RewardModelTrainer(model::RewardModel& model, const TrainerConfig& config);

  // One optimizer step on the batch; returns the batch loss before the step,
  // in squared reward units.
  double step(std::span<const rewards::Segment* const> batch, envs::Rng& rng);

  // Fixed once, before the first step. Ignored unless normalize_targets.
  void set_target_scale(double scale);
  double target_scale() const { return target_scale_; }
  bool target_scale_fixed() const { return scale_fixed_; }

  std::int64_t steps_taken() const { return state_.step; }
  const TrainerConfig& config() const { return config_; }
  model::RewardModel& model() { return model_; }

 private:
  model::RewardModel& model_;
  TrainerConfig config_;
  std::vector<ad::Tensor> params_;
  ad::AdamWState state_;
  double target_scale_ = 1.0;
  bool scale_fixed_ = false;
};

// Runs `iterations` optimizer steps on uniformly sampled segment batches. The
// target scale is fixed from all available segments on the first call.
TrainingStats train_reward_model(RewardModelTrainer& trainer, const ReplayBuffer& buffer, int iterations,
                                 envs::Rng& rng);
TrainingStats train_on_segments(RewardModelTrainer& trainer, std::span<const rewards::Segment> segments,
                                int iterations, envs::Rng& rng);

// Relabels with a learned reward model over a sliding window of `horizon` steps.
class CodetrRelabeler final : public RewardRelabeler {
 public:
  CodetrRelabeler(model::RewardModel model, const TrainerConfig& config, std::size_t horizon,
                  model::RelabelOutput output = model::RelabelOutput::WeightedReward);

  std::string name() const override { return "codetr"; }
  std::uint64_t cache_key(const ReplayBuffer&) const override { return model_.version(); }
  double relabel_step(const ReplayBuffer& buffer, const StepRef& ref) const override;
  std::vector<double> relabel_steps(const ReplayBuffer& buffer, std::span<const StepRef> refs) const override;
  bool trainable() const override { return true; }
  TrainingStats train(const ReplayBuffer& buffer, int iterations, envs::Rng& rng) override;
  double mean_abs_weight_deviation(const ReplayBuffer& buffer) const override;
  // The trained model in normalized target units.
  const model::RewardModel* reward_model() const override { return &model_; }
  // Independent copy with the target scale folded into the reward head, so
  // its outputs are in reward units.
  model::RewardModel export_model() const;
  double target_scale() const { return trainer_.target_scale(); }

  std::size_t horizon() const { return horizon_; }
  std::int64_t gradient_steps() const { return trainer_.steps_taken(); }

 private:
  model::RewardModel model_;
  RewardModelTrainer trainer_;
  model::Window window_at(const ReplayBuffer& buffer, const StepRef& ref) const;

  std::size_t horizon_;
  model::RelabelOutput output_;
};

// Mean |w_t - 1| over every step of the given segments.
double mean_abs_weight_deviation(const model::RewardModel& model, std::span<const rewards::Segment* const> segments);

}  // namespace codetr::trainer
