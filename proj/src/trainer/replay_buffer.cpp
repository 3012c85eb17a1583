#include "codetr/trainer/replay_buffer.hpp"

#include <algorithm>
#include <cassert>
#include <limits>

#include "codetr/error.hpp"

namespace codetr::trainer {

ReplayBuffer::ReplayBuffer(std::size_t capacity_steps, int delay, rewards::CompositeSpec spec)
    : capacity_(capacity_steps), delay_(delay), spec_(spec) {
  if (capacity_steps < 1) throw ConfigError("replay buffer: capacity must be >= 1 step");
  if (delay < 1) throw ConfigError("replay buffer: delay must be >= 1");
  spec_.validate();
}

void ReplayBuffer::insert(envs::Trajectory trajectory) {
  if (trajectory.empty()) throw ContractError("replay buffer: cannot insert an empty trajectory");
  StoredTrajectory stored;
  stored.id = insertions_++;
  stored.segments = rewards::segment_trajectory(trajectory, delay_, spec_);
  stored.segment_of_step.resize(trajectory.size());
  for (std::size_t k = 0; k < stored.segments.size(); ++k) {
    const auto& seg = stored.segments[k];
    for (std::size_t t = seg.start; t < seg.start + seg.length; ++t) stored.segment_of_step[t] = k;
#ifndef NDEBUG
    std::vector<double> hidden;
    for (std::size_t t = seg.start; t < seg.start + seg.length; ++t) hidden.push_back(trajectory.steps[t].hidden_reward);
    assert(rewards::composite(spec_, hidden) == seg.composite_reward);
#endif
  }
  stored.trajectory = std::move(trajectory);
  num_steps_ += stored.trajectory.size();
  CacheEntry entry;
  entry.values.assign(stored.trajectory.size(), 0.0);
  entry.keys.assign(stored.trajectory.size(), 0);
  trajectories_.push_back(std::move(stored));
  cache_.push_back(std::move(entry));
  while (num_steps_ > capacity_ && trajectories_.size() > 1) {
    num_steps_ -= trajectories_.front().trajectory.size();
    trajectories_.pop_front();
    cache_.pop_front();
  }
  ++generation_;
  rebuild_indices();
}

void ReplayBuffer::rebuild_indices() {
  segment_index_.clear();
  step_offsets_.clear();
  min_composite_ = std::numeric_limits<double>::infinity();
  max_composite_ = -std::numeric_limits<double>::infinity();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < trajectories_.size(); ++i) {
    const auto& tr = trajectories_[i];
    step_offsets_.push_back(offset);
    offset += tr.trajectory.size();
    for (std::size_t k = 0; k < tr.segments.size(); ++k) {
      segment_index_.push_back({i, k});
      min_composite_ = std::min(min_composite_, tr.segments[k].composite_reward);
      max_composite_ = std::max(max_composite_, tr.segments[k].composite_reward);
    }
  }
}

const rewards::Segment& ReplayBuffer::segment(const SegmentRef& ref) const {
  return trajectories_.at(ref.trajectory).segments.at(ref.segment);
}

StepRef ReplayBuffer::step_ref(std::size_t flat_index) const {
  if (flat_index >= num_steps_) throw ContractError("replay buffer: step index out of range");
  auto it = std::upper_bound(step_offsets_.begin(), step_offsets_.end(), flat_index);
  const auto traj = static_cast<std::size_t>(std::distance(step_offsets_.begin(), it)) - 1;
  return {traj, flat_index - step_offsets_[traj]};
}

bool ReplayBuffer::cached_relabel(const StepRef& ref, std::uint64_t key, double& value) const {
  const auto& entry = cache_.at(ref.trajectory);
  if (entry.keys.at(ref.step) != key + 1) return false;
  value = entry.values[ref.step];
  return true;
}

void ReplayBuffer::store_relabel(const StepRef& ref, std::uint64_t key, double value) const {
  auto& entry = cache_.at(ref.trajectory);
  entry.values.at(ref.step) = value;
  entry.keys[ref.step] = key + 1;
}

}  // namespace codetr::trainer
