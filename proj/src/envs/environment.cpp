#include "codetr/envs/environment.hpp"

#include <algorithm>
#include <cmath>

#include "codetr/error.hpp"

namespace codetr::envs {

void Environment::seed(std::uint64_t seed) {
  rng_.seed(seed);
  done_ = true;
}

int Environment::reset() {
  const auto mu = initial_distribution();
  std::discrete_distribution<int> pick(mu.begin(), mu.end());
  state_ = pick(rng_);
  steps_ = 0;
  done_ = false;
  return state_;
}

StepResult Environment::step(int action) {
  if (done_) throw ContractError(name() + ": step() on a finished episode; call reset()");
  if (action < 0 || action >= num_actions()) {
    throw ContractError(name() + ": action " + std::to_string(action) + " out of range");
  }
  const auto outs = outcomes(state_, action);
  std::size_t pick = 0;
  if (outs.size() > 1) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng_);
    while (pick + 1 < outs.size() && x >= outs[pick].probability) {
      x -= outs[pick].probability;
      ++pick;
    }
  }
  const auto& o = outs[pick];
  state_ = o.next_state;
  ++steps_;
  StepResult r;
  r.next_state = o.next_state;
  r.reward = o.reward;
  r.terminal = o.terminal;
  r.truncated = !o.terminal && steps_ >= horizon();
  done_ = r.done();
  return r;
}

namespace {

void require_state_action(const Environment& env, int state, int action) {
  if (state < 0 || state >= env.num_states() || action < 0 || action >= env.num_actions()) {
    throw ContractError(env.name() + ": state/action out of range");
  }
}

}  // namespace

ChainWalk::ChainWalk(int length, int horizon, double slip) : length_(length), horizon_(horizon), slip_(slip) {
  if (length < 1) throw ConfigError("chain_walk: length must be >= 1");
  if (horizon < 1) throw ConfigError("chain_walk: horizon must be >= 1");
  if (slip < 0.0 || slip >= 1.0) throw ConfigError("chain_walk: slip must lie in [0, 1)");
}

std::vector<double> ChainWalk::initial_distribution() const {
  std::vector<double> mu(static_cast<std::size_t>(num_states()), 0.0);
  mu[0] = 1.0;
  return mu;
}

std::vector<Outcome> ChainWalk::outcomes(int state, int action) const {
  require_state_action(*this, state, action);
  if (state == length_) return {{1.0, state, 0.0, true}};
  const int next = action == 1 ? state + 1 : std::max(0, state - 1);
  const double reward = static_cast<double>(next - state) / length_;
  // Pushing against the left wall leaves the state unchanged whether or not
  // the agent slips, so that outcome carries all the mass.
  if (slip_ == 0.0 || next == state) return {{1.0, next, reward, next == length_}};
  Outcome moved{1.0 - slip_, next, reward, next == length_};
  return {moved, {slip_, state, 0.0, false}};
}

PeakedChain::PeakedChain(int length, int horizon, double sigma, double penalty)
    : length_(length), horizon_(horizon), sigma_(sigma), penalty_(penalty) {
  if (length < 3) throw ConfigError("peaked_chain: length must be >= 3");
  if (horizon < 1) throw ConfigError("peaked_chain: horizon must be >= 1");
  if (sigma <= 0.0) throw ConfigError("peaked_chain: sigma must be positive");
  if (penalty < 0.0) throw ConfigError("peaked_chain: penalty must be non-negative");
}

double PeakedChain::bonus(int cell) const {
  const double z = (cell - center()) / sigma_;
  return std::exp(-0.5 * z * z);
}

double PeakedChain::r_max() const {
  double best = -1e300;
  for (int c = 0; c < length_; ++c)
    for (int a = 0; a < 2; ++a) best = std::max(best, bonus(c) - penalty_ * (a + 1));
  return best;
}

std::vector<double> PeakedChain::initial_distribution() const {
  std::vector<double> mu(static_cast<std::size_t>(num_states()), 0.0);
  mu[0] = 1.0;
  return mu;
}

std::vector<Outcome> PeakedChain::outcomes(int state, int action) const {
  require_state_action(*this, state, action);
  const int next = (state + action + 1) % length_;
  return {{1.0, next, bonus(next) - penalty_ * (action + 1), false}};
}

CliffGrid::CliffGrid(int width, int height, int horizon) : width_(width), height_(height), horizon_(horizon) {
  if (width < 3 || height < 2) throw ConfigError("cliff_grid: needs width >= 3 and height >= 2");
  if (horizon < 1) throw ConfigError("cliff_grid: horizon must be >= 1");
}

bool CliffGrid::is_cliff(int state) const {
  const int row = state / width_, col = state % width_;
  return row == height_ - 1 && col > 0 && col < width_ - 1;
}

std::vector<double> CliffGrid::initial_distribution() const {
  std::vector<double> mu(static_cast<std::size_t>(num_states()), 0.0);
  mu[static_cast<std::size_t>(start_state())] = 1.0;
  return mu;
}

std::vector<Outcome> CliffGrid::outcomes(int state, int action) const {
  require_state_action(*this, state, action);
  if (state == goal_state() || is_cliff(state)) return {{1.0, state, 0.0, true}};
  int row = state / width_, col = state % width_;
  switch (action) {
    case 0: row = std::max(0, row - 1); break;
    case 1: col = std::min(width_ - 1, col + 1); break;
    case 2: row = std::min(height_ - 1, row + 1); break;
    default: col = std::max(0, col - 1); break;
  }
  const int next = row * width_ + col;
  if (is_cliff(next)) return {{1.0, next, -1.0, true}};
  if (next == goal_state()) return {{1.0, next, 1.0, true}};
  return {{1.0, next, -0.01, false}};
}

namespace {

double take(const EnvParams& params, const std::string& key, double fallback,
            std::vector<std::string>& used) {
  used.push_back(key);
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

int take_int(const EnvParams& params, const std::string& env, const std::string& key, int fallback,
             std::vector<std::string>& used) {
  const double v = take(params, key, fallback, used);
  if (v != std::floor(v)) throw ConfigError(env + ": parameter '" + key + "' must be an integer");
  return static_cast<int>(v);
}

}  // namespace

std::unique_ptr<Environment> make_env(const std::string& name, const EnvParams& params, std::uint64_t seed) {
  std::vector<std::string> used;
  std::unique_ptr<Environment> env;
  if (name == "chain_walk") {
    const int length = take_int(params, name, "length", 10, used);
    const int horizon = take_int(params, name, "horizon", 30, used);
    env = std::make_unique<ChainWalk>(length, horizon, take(params, "slip", 0.0, used));
  } else if (name == "peaked_chain") {
    const int length = take_int(params, name, "length", 10, used);
    const int horizon = take_int(params, name, "horizon", 50, used);
    const double sigma = take(params, "sigma", 1.0, used);
    env = std::make_unique<PeakedChain>(length, horizon, sigma, take(params, "penalty", 0.01, used));
  } else if (name == "cliff_grid") {
    const int width = take_int(params, name, "width", 12, used);
    const int height = take_int(params, name, "height", 4, used);
    env = std::make_unique<CliffGrid>(width, height, take_int(params, name, "horizon", 100, used));
  } else {
    throw ConfigError("unknown environment '" + name + "' (expected chain_walk, peaked_chain or cliff_grid)");
  }
  for (const auto& [key, value] : params) {
    if (std::find(used.begin(), used.end(), key) == used.end()) {
      throw ConfigError(name + ": unknown parameter '" + key + "'");
    }
  }
  env->seed(seed);
  return env;
}

double Trajectory::hidden_return() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.hidden_reward;
  return total;
}

Trajectory rollout(Environment& env, const Policy& policy, int max_steps, std::uint64_t seed) {
  if (max_steps < 1) throw ContractError("rollout: max_steps must be >= 1");
  env.seed(seed);
  Rng policy_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Trajectory traj;
  int state = env.reset();
  for (int t = 0; t < max_steps; ++t) {
    const int action = policy(state, policy_rng);
    const auto r = env.step(action);
    Transition tr;
    tr.state = state;
    tr.action = action;
    tr.next_state = r.next_state;
    tr.hidden_reward = r.reward;
    tr.observed_reward = r.reward;
    tr.terminal = r.terminal;
    tr.done = r.done() || t + 1 == max_steps;
    traj.steps.push_back(tr);
    state = r.next_state;
    if (r.done()) break;
  }
  return traj;
}

Policy uniform_random_policy(int num_actions) {
  return [num_actions](int, Rng& rng) {
    std::uniform_int_distribution<int> pick(0, num_actions - 1);
    return pick(rng);
  };
}

}  // namespace codetr::envs
