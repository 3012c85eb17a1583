#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "codetr/envs/environment.hpp"
#include "codetr/rewards/composite.hpp"

namespace codetr::trainer {

struct StoredTrajectory {
  std::uint64_t id = 0;  // insertion counter value
  envs::Trajectory trajectory;
  std::vector<rewards::Segment> segments;
  std::vector<std::size_t> segment_of_step;
};

struct StepRef {
  std::size_t trajectory = 0;
  std::size_t step = 0;
  bool operator==(const StepRef&) const = default;
};

struct SegmentRef {
  std::size_t trajectory = 0;
  std::size_t segment = 0;
};

// Bounded FIFO store of whole trajectories with their delayed-reward segments.
// Eviction drops the oldest trajectory, so segments are never split. Also
// caches per-step relabeled rewards keyed by the relabeler's cache key.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity_steps, int delay, rewards::CompositeSpec spec);

  // Segments the trajectory and stores it, evicting old trajectories while
  // the step count exceeds capacity (the newest one is always kept).
  void insert(envs::Trajectory trajectory);

  std::size_t num_trajectories() const { return trajectories_.size(); }
  std::size_t num_steps() const { return num_steps_; }
  std::size_t num_segments() const { return segment_index_.size(); }
  bool empty() const { return trajectories_.empty(); }

  const StoredTrajectory& trajectory(std::size_t i) const { return trajectories_.at(i); }
  const rewards::Segment& segment(const SegmentRef& ref) const;
  SegmentRef segment_ref(std::size_t flat_index) const { return segment_index_.at(flat_index); }
  StepRef step_ref(std::size_t flat_index) const;

  // Changes on every insert or eviction.
  std::uint64_t generation() const { return generation_; }
  std::uint64_t insertions() const { return insertions_; }
  // Range of composite rewards over the stored segments.
  double min_composite() const { return min_composite_; }
  double max_composite() const { return max_composite_; }

  int delay() const { return delay_; }
  const rewards::CompositeSpec& spec() const { return spec_; }
  std::size_t capacity() const { return capacity_; }

  // Cached relabel for a step, valid only when stored under the same key.
  bool cached_relabel(const StepRef& ref, std::uint64_t key, double& value) const;
  void store_relabel(const StepRef& ref, std::uint64_t key, double value) const;

 private:
  void rebuild_indices();

  struct CacheEntry {
    std::vector<double> values;
    std::vector<std::uint64_t> keys;  // 0 marks empty; stored as key + 1
  };

  std::size_t capacity_;
  int delay_;
  rewards::CompositeSpec spec_;
  std::deque<StoredTrajectory> trajectories_;
  mutable std::deque<CacheEntry> cache_;
  std::vector<SegmentRef> segment_index_;
  std::vector<std::size_t> step_offsets_;  // prefix sums of trajectory lengths
  std::size_t num_steps_ = 0;
  std::uint64_t generation_ = 0;
  std::uint64_t insertions_ = 0;
  double min_composite_ = 0.0;
  double max_composite_ = 0.0;
};

}  // namespace codetr::trainer
