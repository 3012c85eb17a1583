#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "codetr/envs/environment.hpp"

namespace codetr::rewards {

enum class CompositeKind { Sum, SumSquare, SquareSum, Max };

struct CompositeSpec {
  CompositeKind kind = CompositeKind::Sum;
  double beta = 3.0;  // sharpness, Max only

  // "sum", "sumsquare", "squaresum", "max" (case-insensitive). Throws ConfigError.
  static CompositeSpec parse(const std::string& kind, double beta = 3.0);
  std::string name() const;
  void validate() const;

  bool operator==(const CompositeSpec&) const = default;
};

// Aggregates the hidden step rewards of one segment:
//   Sum        sum r_t
//   SumSquare  sum |r_t| r_t
//   SquareSum  |sum r_t| (sum r_t)
//   Max        sum_t n softmax(beta r)_t r_t
double composite(const CompositeSpec& spec, std::span<const double> step_rewards);

// Contiguous window of a trajectory that receives one composite reward.
struct Segment {
  std::size_t start = 0;
  std::size_t length = 0;
  std::vector<int> states;
  std::vector<int> actions;
  double composite_reward = 0.0;
};

// Splits a trajectory into consecutive segments of n steps; the final one may
// be shorter and is scored over its actual length.
std::vector<Segment> segment_trajectory(const envs::Trajectory& trajectory, int n, const CompositeSpec& spec);

struct DelayedStep {
  int next_state = 0;
  double observed_reward = 0.0;
  bool done = false;
  bool terminal = false;
  double hidden_reward = 0.0;  // evaluation and oracle code only
};

// Wraps an environment so that its reward is observed only as R_co at the end
// of every n-step segment and at episode end; all other steps observe 0.
class DelayedEnv {
 public:
  DelayedEnv(envs::Environment& inner, int delay, CompositeSpec spec);

  int reset();
  DelayedStep step(int action);

  int delay() const { return delay_; }
  const CompositeSpec& spec() const { return spec_; }
  envs::Environment& inner() { return inner_; }

 private:
  envs::Environment& inner_;
  int delay_;
  CompositeSpec spec_;
  std::vector<double> pending_;
  bool active_ = false;
};

}  // namespace codetr::rewards
