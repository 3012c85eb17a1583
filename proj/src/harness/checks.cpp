#include "codetr/harness/checks.hpp"

#include <cmath>
#include <random>

#include "codetr/autodiff/gradcheck.hpp"
#include "codetr/envs/planning.hpp"
#include "codetr/model/reward_model.hpp"
#include "codetr/trainer/trainer.hpp"

namespace codetr::harness {

ModelGradCheck reward_model_gradcheck(int draws, std::uint64_t seed, int embed_dim, int layers, int segment_length,
                                      double step) {
  ModelGradCheck out;
  std::mt19937_64 rng(seed);
  constexpr int kStates = 5, kActions = 3;
  for (int d = 0; d < draws; ++d) {
    model::RewardModelConfig cfg;
    cfg.num_causal_layers = layers;
    cfg.num_heads = 2;
    cfg.embed_dim = embed_dim;
    cfg.max_window = segment_length;
    cfg.state_dim = kStates;
    cfg.action_dim = kActions;
    cfg.init_std = 0.3;
    model::RewardModel model(cfg, rng());

    rewards::Segment seg;
    seg.length = static_cast<std::size_t>(segment_length);
    std::uniform_int_distribution<int> s(0, kStates - 1), a(0, kActions - 1);
    for (int t = 0; t < segment_length; ++t) {
      seg.states.push_back(s(rng));
      seg.actions.push_back(a(rng));
    }
    seg.composite_reward = std::normal_distribution<double>(0.0, 1.0)(rng);

    auto params = model.parameters();
    const std::vector<rewards::Segment> batch{seg};
    const auto report = ad::check_gradients([&] { return trainer::reward_model_loss(model, batch); }, params, step, 1e-8, 1e-6);
    out.max_relative_error = std::max(out.max_relative_error, report.max_relative_error);
    out.max_absolute_error = std::max(out.max_absolute_error, report.max_absolute_error);
    out.elements += report.checked;
    ++out.draws;
  }
  return out;
}

std::vector<OracleCheck> environment_oracle_checks(std::uint64_t seed, int rollouts) {
  std::vector<OracleCheck> checks;

  envs::ChainWalk chain;
  OracleCheck random_chain;
  random_chain.name = "chain_walk random-policy return (DP vs Monte Carlo, 3 SE)";
  random_chain.expected = envs::random_policy_expected_return(chain);
  const auto policy = envs::uniform_random_policy(chain.num_actions());
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < rollouts; ++i) {
    const double r = envs::rollout(chain, policy, chain.horizon(), seed + static_cast<std::uint64_t>(i)).hidden_return();
    sum += r;
    sq += r * r;
  }
  const double mean = sum / rollouts;
  const double se = std::sqrt(std::max(0.0, sq / rollouts - mean * mean) / rollouts);
  random_chain.observed = mean;
  random_chain.tolerance = 3.0 * se;
  random_chain.passed = std::abs(mean - random_chain.expected) <= random_chain.tolerance;
  checks.push_back(random_chain);

  envs::CliffGrid cliff;
  const auto vi = envs::value_iteration(cliff, 0.99);
  OracleCheck optimum;
  optimum.name = "cliff_grid greedy value-iteration policy return vs undiscounted optimum";
  // Shortest safe path: up, 11 right, down; 12 step penalties then the goal.
  optimum.expected = 1.0 - 0.01 * 12;
  optimum.observed = envs::deterministic_policy_return(cliff, vi.greedy);
  optimum.tolerance = 1e-9;
  optimum.passed = std::abs(optimum.observed - optimum.expected) <= optimum.tolerance;
  checks.push_back(optimum);
  return checks;
}

}  // namespace codetr::harness
