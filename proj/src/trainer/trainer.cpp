#include "codetr/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "codetr/autodiff/ops.hpp"
#include "codetr/error.hpp"

namespace codetr::trainer {

TrainerConfig TrainerConfig::paper() {
  TrainerConfig c;
  c.batch_size = 64;
  c.learning_rate = 5e-5;
  c.weight_decay = 1e-4;
  c.warmup_steps = 100;
  c.pretrain_steps = 10000;
  c.pretrain_iterations = 100;
  c.iterations_per_trajectory = 10;
  c.max_gradient_steps = 10000;
  return c;
}

void TrainerConfig::validate() const {
  if (batch_size < 1 || learning_rate <= 0.0 || weight_decay < 0.0 || warmup_steps < 0 || pretrain_steps < 0 ||
      pretrain_iterations < 0 || iterations_per_trajectory < 0 || max_gradient_steps < 0) {
    throw ConfigError("trainer: batch size and learning rate must be positive, other settings non-negative");
  }
}

model::Window segment_window(const model::RewardModel& model, const rewards::Segment& segment) {
  return model::Window::one_hot(segment.states, segment.actions, model.config().state_dim,
                                model.config().action_dim);
}

ad::Tensor reward_model_loss(const model::RewardModel& model, std::span<const rewards::Segment* const> batch,
                             const model::EncodeOptions& options, double target_scale) {
  if (batch.empty()) throw ContractError("reward_model_loss: empty batch");
  if (!(target_scale > 0.0)) throw ContractError("reward_model_loss: target scale must be positive");
  const auto max_window = static_cast<std::size_t>(model.config().max_window);
  std::vector<model::Window> windows;
  windows.reserve(batch.size());
  for (const auto* seg : batch) {
    if (seg->length > max_window) {
      throw ContractError("reward_model_loss: segment of length " + std::to_string(seg->length) +
                          " exceeds model window " + std::to_string(max_window));
    }
    windows.push_back(segment_window(model, *seg));
  }
  const auto out = model::encode_batch(model, windows, options);
  ad::Tensor total;
  std::size_t offset = 0;
  for (const auto* seg : batch) {
    const auto pred = model::composite_predict(out, offset, offset + seg->length);
    offset += seg->length;
    auto err = ad::add_scalar(pred.value, -seg->composite_reward / target_scale);
    auto sq = ad::mul(err, err);
    total = total.defined() ? ad::add(total, sq) : sq;
  }
  return ad::scale(total, 1.0 / static_cast<double>(batch.size()));
}

ad::Tensor reward_model_loss(const model::RewardModel& model, std::span<const rewards::Segment> batch,
                             const model::EncodeOptions& options, double target_scale) {
  std::vector<const rewards::Segment*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return reward_model_loss(model, ptrs, options, target_scale);
}

double rms_target_scale(std::span<const rewards::Segment* const> segments) {
  double sq = 0.0;
  for (const auto* s : segments) sq += s->composite_reward * s->composite_reward;
  const double rms = segments.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(segments.size()));
  return rms > 0.0 && std::isfinite(rms) ? rms : 1.0;
}

RewardModelTrainer::RewardModelTrainer(model::RewardModel& model, const TrainerConfig& config)
    : model_(model), config_(config), params_(model.parameters()) {
  config_.validate();
  ad::AdamWConfig opt;
  opt.learning_rate = config_.learning_rate;
  opt.weight_decay = config_.weight_decay;
  opt.warmup_steps = config_.warmup_steps;
  state_ = ad::make_adamw_state(params_, opt);
}

double RewardModelTrainer::step(std::span<const rewards::Segment* const> batch, envs::Rng& rng) {
  model_.zero_grad();
  model::EncodeOptions options;
  options.train = true;
  options.rng = &rng;
  scale_fixed_ = true;
  auto loss = reward_model_loss(model_, batch, options, target_scale_);
  const double value = loss.item() * target_scale_ * target_scale_;
  ad::backward(loss);
  ad::adamw_step(params_, state_);
  model_.mark_updated();
  return value;
}

void RewardModelTrainer::set_target_scale(double scale) {
  if (scale_fixed_) throw ContractError("RewardModelTrainer: target scale is already fixed");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ContractError("RewardModelTrainer: target scale must be positive");
  if (config_.normalize_targets) target_scale_ = scale;
  scale_fixed_ = true;
}

namespace {

template <typename Pick>
TrainingStats run_iterations(RewardModelTrainer& trainer, std::size_t population, int iterations, envs::Rng& rng,
                             Pick pick) {
  if (population == 0) throw ContractError("train_reward_model: no segments to train on");
  if (!trainer.target_scale_fixed()) {
    std::vector<const rewards::Segment*> all(population);
    for (std::size_t i = 0; i < population; ++i) all[i] = pick(i);
    trainer.set_target_scale(rms_target_scale(all));
  }
  TrainingStats stats;
  std::uniform_int_distribution<std::size_t> index(0, population - 1);
  std::vector<const rewards::Segment*> batch(static_cast<std::size_t>(trainer.config().batch_size));
  for (int it = 0; it < iterations; ++it) {
    for (auto& s : batch) s = pick(index(rng));
    stats.losses.push_back(trainer.step(batch, rng));
  }
  return stats;
}

}  // namespace

TrainingStats train_reward_model(RewardModelTrainer& trainer, const ReplayBuffer& buffer, int iterations,
                                 envs::Rng& rng) {
  return run_iterations(trainer, buffer.num_segments(), iterations, rng,
                        [&](std::size_t i) { return &buffer.segment(buffer.segment_ref(i)); });
}

TrainingStats train_on_segments(RewardModelTrainer& trainer, std::span<const rewards::Segment> segments,
                                int iterations, envs::Rng& rng) {
  return run_iterations(trainer, segments.size(), iterations, rng, [&](std::size_t i) { return &segments[i]; });
}

CodetrRelabeler::CodetrRelabeler(model::RewardModel model, const TrainerConfig& config, std::size_t horizon,
                                 model::RelabelOutput output)
    : model_(std::move(model)), trainer_(model_, config), horizon_(horizon), output_(output) {
  if (horizon < 1 || horizon > static_cast<std::size_t>(model_.config().max_window)) {
    throw ConfigError("codetr: relabel window must lie in [1, max_window]");
  }
}

model::Window CodetrRelabeler::window_at(const ReplayBuffer& buffer, const StepRef& ref) const {
  const auto& steps = buffer.trajectory(ref.trajectory).trajectory.steps;
  const std::size_t begin = ref.step + 1 >= horizon_ ? ref.step + 1 - horizon_ : 0;
  std::vector<int> states, actions;
  for (std::size_t t = begin; t <= ref.step; ++t) {
    states.push_back(steps[t].state);
    actions.push_back(steps[t].action);
  }
  return model::Window::one_hot(states, actions, model_.config().state_dim, model_.config().action_dim);
}

double CodetrRelabeler::relabel_step(const ReplayBuffer& buffer, const StepRef& ref) const {
  return trainer_.target_scale() * model::relabel_last(model_, window_at(buffer, ref), output_);
}

std::vector<double> CodetrRelabeler::relabel_steps(const ReplayBuffer& buffer, std::span<const StepRef> refs) const {
  if (refs.empty()) return {};
  std::vector<model::Window> windows;
  windows.reserve(refs.size());
  for (const auto& ref : refs) windows.push_back(window_at(buffer, ref));
  auto values = model::relabel_last_batch(model_, windows, output_);
  for (double& v : values) v *= trainer_.target_scale();
  return values;
}

model::RewardModel CodetrRelabeler::export_model() const {
  auto copy = model_.clone();
  copy.scale_reward_head(trainer_.target_scale());
  return copy;
}

TrainingStats CodetrRelabeler::train(const ReplayBuffer& buffer, int iterations, envs::Rng& rng) {
  return train_reward_model(trainer_, buffer, iterations, rng);
}

double mean_abs_weight_deviation(const model::RewardModel& model, std::span<const rewards::Segment* const> segments) {
  ad::NoGradGuard no_grad;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto* seg : segments) {
    const auto out = model::encode(model, segment_window(model, *seg));
    const auto pred = model::composite_predict(out, 0, seg->length);
    for (double w : pred.weights) total += std::abs(w - 1.0);
    count += pred.weights.size();
  }
  return count ? total / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

double CodetrRelabeler::mean_abs_weight_deviation(const ReplayBuffer& buffer) const {
  constexpr std::size_t kProbe = 64;
  std::vector<const rewards::Segment*> recent;
  const std::size_t n = buffer.num_segments();
  for (std::size_t i = n > kProbe ? n - kProbe : 0; i < n; ++i) recent.push_back(&buffer.segment(buffer.segment_ref(i)));
  return trainer::mean_abs_weight_deviation(model_, recent);
}

}  // namespace codetr::trainer
