#include "codetr/policy/evaluation.hpp"

#include <cmath>

#include "codetr/error.hpp"

namespace codetr::policy {

Evaluation evaluate_policy(const envs::Environment& env, const QTable& table, int episodes, std::uint64_t seed,
                           const std::optional<DelaySetting>& delay) {
  if (episodes < 1) throw ContractError("evaluate_policy: episodes must be >= 1");
  auto sim = env.clone();
  sim->seed(seed);
  envs::Rng rng(seed ^ 0x5bd1e995u);
  const DelaySetting setting = delay.value_or(DelaySetting{});
  rewards::DelayedEnv delayed(*sim, setting.delay, setting.spec);

  Evaluation out;
  double composite_total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    int state = delayed.reset();
    double ret = 0.0;
    double composite_sum = 0.0;
    for (;;) {
      const auto r = delayed.step(table.greedy_action(state, rng));
      ret += r.hidden_reward;
      composite_sum += r.observed_reward;
      state = r.next_state;
      if (r.done) break;
    }
    out.returns.push_back(ret);
    composite_total += composite_sum;
  }
  // Welford's update keeps the mean of identical returns exact, so a
  // deterministic policy reports zero spread.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < out.returns.size(); ++i) {
    const double delta = out.returns[i] - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (out.returns[i] - mean);
  }
  out.mean_return = mean;
  out.stddev = episodes > 1 ? std::sqrt(m2 / (episodes - 1)) : 0.0;
  out.mean_composite_sum = delay ? composite_total / episodes : 0.0;
  return out;
}

}  // namespace codetr::policy
