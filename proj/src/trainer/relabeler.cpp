#include "codetr/trainer/relabeler.hpp"

#include <algorithm>
#include <cmath>

#include "codetr/error.hpp"

namespace codetr::trainer {

TrainingStats RewardRelabeler::train(const ReplayBuffer&, int, envs::Rng&) { return {}; }

double RewardRelabeler::mean_abs_weight_deviation(const ReplayBuffer&) const {
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> RewardRelabeler::relabel_steps(const ReplayBuffer& buffer, std::span<const StepRef> refs) const {
  std::vector<double> out;
  out.reserve(refs.size());
  for (const auto& ref : refs) out.push_back(relabel_step(buffer, ref));
  return out;
}

namespace {

void store_checked(const RewardRelabeler& relabeler, const ReplayBuffer& buffer, const StepRef& ref,
                   std::uint64_t key, double value) {
  if (!std::isfinite(value)) {
    throw NumericError(relabeler.name() + ": non-finite relabeled reward at trajectory " +
                       std::to_string(ref.trajectory) + ", step " + std::to_string(ref.step));
  }
  buffer.store_relabel(ref, key, value);
}

}  // namespace

double relabeled_reward(const RewardRelabeler& relabeler, const ReplayBuffer& buffer, const StepRef& ref) {
  const auto key = relabeler.cache_key(buffer);
  double value = 0.0;
  if (buffer.cached_relabel(ref, key, value)) return value;
  value = relabeler.relabel_step(buffer, ref);
  store_checked(relabeler, buffer, ref, key, value);
  return value;
}

std::vector<double> relabeled_rewards(const RewardRelabeler& relabeler, const ReplayBuffer& buffer,
                                      std::span<const StepRef> refs) {
  const auto key = relabeler.cache_key(buffer);
  std::vector<double> out(refs.size());
  std::vector<StepRef> missing;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (buffer.cached_relabel(refs[i], key, out[i])) continue;
    // A ref repeated within the batch is computed once.
    const auto seen = std::find(missing.begin(), missing.end(), refs[i]);
    if (seen == missing.end()) missing.push_back(refs[i]);
    slots.push_back(i);
  }
  if (missing.empty()) return out;
  const auto values = relabeler.relabel_steps(buffer, missing);
  for (std::size_t m = 0; m < missing.size(); ++m) store_checked(relabeler, buffer, missing[m], key, values[m]);
  for (std::size_t i : slots) buffer.cached_relabel(refs[i], key, out[i]);
  return out;
}

std::vector<std::vector<double>> relabel_buffer(const RewardRelabeler& relabeler, const ReplayBuffer& buffer) {
  std::vector<std::vector<double>> out(buffer.num_trajectories());
  for (std::size_t i = 0; i < buffer.num_trajectories(); ++i) {
    const auto n = buffer.trajectory(i).trajectory.size();
    out[i].resize(n);
    for (std::size_t t = 0; t < n; ++t) out[i][t] = relabeled_reward(relabeler, buffer, {i, t});
  }
  return out;
}

double OracleRelabeler::relabel_step(const ReplayBuffer& buffer, const StepRef& ref) const {
  return buffer.trajectory(ref.trajectory).trajectory.steps.at(ref.step).hidden_reward;
}

}  // namespace codetr::trainer
