#include "codetr/envs/planning.hpp"

#include <algorithm>
#include <cmath>

#include "codetr/error.hpp"

namespace codetr::envs {

ValueIterationResult value_iteration(const Environment& env, double gamma, double tolerance, int max_iterations) {
  if (gamma < 0.0 || gamma >= 1.0) throw ContractError("value_iteration: gamma must lie in [0, 1)");
  const int ns = env.num_states(), na = env.num_actions();
  ValueIterationResult out;
  out.values.assign(static_cast<std::size_t>(ns), 0.0);
  out.q.assign(static_cast<std::size_t>(ns), std::vector<double>(static_cast<std::size_t>(na), 0.0));
  for (int it = 0; it < max_iterations; ++it) {
    double residual = 0.0;
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        double q = 0.0;
        for (const auto& o : env.outcomes(s, a)) {
          const double cont = o.terminal ? 0.0 : out.values[static_cast<std::size_t>(o.next_state)];
          q += o.probability * (o.reward + gamma * cont);
        }
        out.q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = q;
      }
    }
    for (int s = 0; s < ns; ++s) {
      const auto& row = out.q[static_cast<std::size_t>(s)];
      const double v = *std::max_element(row.begin(), row.end());
      residual = std::max(residual, std::abs(v - out.values[static_cast<std::size_t>(s)]));
      out.values[static_cast<std::size_t>(s)] = v;
    }
    out.iterations = it + 1;
    if (residual < tolerance) break;
  }
  out.greedy.resize(static_cast<std::size_t>(ns));
  for (int s = 0; s < ns; ++s) {
    const auto& row = out.q[static_cast<std::size_t>(s)];
    out.greedy[static_cast<std::size_t>(s)] =
        static_cast<int>(std::distance(row.begin(), std::max_element(row.begin(), row.end())));
  }
  return out;
}

double random_policy_expected_return(const Environment& env) {
  const int ns = env.num_states(), na = env.num_actions();
  std::vector<double> occupancy = env.initial_distribution();
  double expected = 0.0;
  for (int t = 0; t < env.horizon(); ++t) {
    std::vector<double> next(static_cast<std::size_t>(ns), 0.0);
    for (int s = 0; s < ns; ++s) {
      const double p_s = occupancy[static_cast<std::size_t>(s)];
      if (p_s == 0.0) continue;
      for (int a = 0; a < na; ++a) {
        for (const auto& o : env.outcomes(s, a)) {
          const double p = p_s * o.probability / na;
          expected += p * o.reward;
          if (!o.terminal) next[static_cast<std::size_t>(o.next_state)] += p;
        }
      }
    }
    occupancy = std::move(next);
  }
  return expected;
}

double deterministic_policy_return(const Environment& env, const std::vector<int>& policy) {
  const auto mu = env.initial_distribution();
  int s = static_cast<int>(std::distance(mu.begin(), std::max_element(mu.begin(), mu.end())));
  double total = 0.0;
  for (int t = 0; t < env.horizon(); ++t) {
    const auto outs = env.outcomes(s, policy.at(static_cast<std::size_t>(s)));
    const auto& o = *std::max_element(outs.begin(), outs.end(),
                                      [](const Outcome& a, const Outcome& b) { return a.probability < b.probability; });
    total += o.reward;
    if (o.terminal) break;
    s = o.next_state;
  }
  return total;
}

}  // namespace codetr::envs
