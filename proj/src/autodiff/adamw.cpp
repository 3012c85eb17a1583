#include "codetr/autodiff/adamw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "codetr/error.hpp"

namespace codetr::ad {

AdamWState make_adamw_state(std::span<const Tensor> params, const AdamWConfig& config) {
  if (config.learning_rate < 0.0 || config.weight_decay < 0.0 || config.warmup_steps < 0) {
    throw ConfigError("AdamW: learning rate, weight decay and warmup must be non-negative");
  }
  AdamWState state;
  state.config = config;
  for (const auto& p : params) {
    if (!p.requires_grad()) throw ContractError("AdamW: parameter does not require grad");
    state.first_moment.emplace_back(p.numel(), 0.0);
    state.second_moment.emplace_back(p.numel(), 0.0);
  }
  return state;
}

double scheduled_learning_rate(const AdamWConfig& config, std::int64_t step) {
  if (config.warmup_steps <= 0 || step >= config.warmup_steps) return config.learning_rate;
  return config.learning_rate * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
}

void adamw_step(std::span<Tensor> params, AdamWState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ContractError("AdamW: state tracks " + std::to_string(state.first_moment.size()) + " parameters, got " +
                        std::to_string(params.size()));
  }
  const auto& cfg = state.config;
  ++state.step;
  const double lr = scheduled_learning_rate(cfg, state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != params[k].numel()) throw ShapeError("AdamW: moment buffer does not match parameter shape");
    auto theta = params[k].mutable_data();
    auto grad = params[k].grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] = theta[i] * decay - lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace codetr::ad
