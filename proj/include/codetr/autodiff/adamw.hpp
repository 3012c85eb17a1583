#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "codetr/autodiff/tensor.hpp"

namespace codetr::ad {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Learning rate ramps linearly from 0 over this many steps, then stays flat.
  std::int64_t warmup_steps = 0;
};

struct AdamWState {
  AdamWConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step = 0;
};

AdamWState make_adamw_state(std::span<const Tensor> params, const AdamWConfig& config);

// Learning rate used by optimizer step number `step` (1-based).
double scheduled_learning_rate(const AdamWConfig& config, std::int64_t step);

// One decoupled-weight-decay Adam update of every parameter from its grad buffer.
void adamw_step(std::span<Tensor> params, AdamWState& state);

}  // namespace codetr::ad
