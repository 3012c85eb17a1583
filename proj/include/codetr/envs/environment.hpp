#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace codetr::envs {

using Rng = std::mt19937_64;

// One possible result of taking an action in a state.
struct Outcome {
  double probability = 1.0;
  int next_state = 0;
  double reward = 0.0;
  bool terminal = false;
};

struct StepResult {
  int next_state = 0;
  double reward = 0.0;  // hidden Markovian step reward
  bool terminal = false;
  bool truncated = false;
  bool done() const { return terminal || truncated; }
};

// Finite MDP with a known model, so planners can compute exact oracles.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int num_states() const = 0;
  virtual int num_actions() const = 0;
  // Episode step limit T.
  virtual int horizon() const = 0;
  // Largest hidden step reward over all (s, a).
  virtual double r_max() const = 0;
  // Initial distribution, one probability per state.
  virtual std::vector<double> initial_distribution() const = 0;
  // Transition model: outcomes sum to probability 1.
  virtual std::vector<Outcome> outcomes(int state, int action) const = 0;
  // Independent copy with the same parameters; reseed before use.
  virtual std::unique_ptr<Environment> clone() const = 0;

  void seed(std::uint64_t seed);
  int reset();
  StepResult step(int action);

  int state() const { return state_; }
  int steps_taken() const { return steps_; }
  bool episode_done() const { return done_; }

 private:
  Rng rng_{0};
  int state_ = 0;
  int steps_ = 0;
  bool done_ = true;
};

using EnvParams = std::map<std::string, double>;

// Positions 0..length on a line, actions {0: left, 1: right}. Reward is the
// progress made, (next - current) / length; reaching `length` ends the episode.
// With probability `slip` an action leaves the agent in place.
class ChainWalk final : public Environment {
 public:
  std::unique_ptr<Environment> clone() const override { return std::make_unique<ChainWalk>(*this); }
  explicit ChainWalk(int length = 10, int horizon = 30, double slip = 0.0);
  std::string name() const override { return "chain_walk"; }
  int num_states() const override { return length_ + 1; }
  int num_actions() const override { return 2; }
  int horizon() const override { return horizon_; }
  double r_max() const override { return 1.0 / length_; }
  std::vector<double> initial_distribution() const override;
  std::vector<Outcome> outcomes(int state, int action) const override;

 private:
  int length_;
  int horizon_;
  double slip_;
};

// A ring of `length` cells starting at cell 0. Action a advances a + 1 cells.
// Landing on cell c pays exp(-(c - center)^2 / (2 sigma^2)) - penalty * (a + 1),
// with center = length / 2 + 0.25 so that no two cells tie.
class PeakedChain final : public Environment {
 public:
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PeakedChain>(*this); }
  explicit PeakedChain(int length = 10, int horizon = 50, double sigma = 1.0, double penalty = 0.01);
  std::string name() const override { return "peaked_chain"; }
  int num_states() const override { return length_; }
  int num_actions() const override { return 2; }
  int horizon() const override { return horizon_; }
  double r_max() const override;
  std::vector<double> initial_distribution() const override;
  std::vector<Outcome> outcomes(int state, int action) const override;

  double bonus(int cell) const;
  double center() const { return length_ / 2.0 + 0.25; }

 private:
  int length_;
  int horizon_;
  double sigma_;
  double penalty_;
};

// Cliff walking on a width x height grid. Start bottom-left, goal
// bottom-right, cliff between them on the bottom row. Actions
// {0: up, 1: right, 2: down, 3: left}. Step -0.01, cliff -1, goal +1; the
// latter two end the episode.
class CliffGrid final : public Environment {
 public:
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CliffGrid>(*this); }
  explicit CliffGrid(int width = 12, int height = 4, int horizon = 100);
  std::string name() const override { return "cliff_grid"; }
  int num_states() const override { return width_ * height_; }
  int num_actions() const override { return 4; }
  int horizon() const override { return horizon_; }
  double r_max() const override { return 1.0; }
  std::vector<double> initial_distribution() const override;
  std::vector<Outcome> outcomes(int state, int action) const override;

  int start_state() const { return (height_ - 1) * width_; }
  int goal_state() const { return height_ * width_ - 1; }
  bool is_cliff(int state) const;

 private:
  int width_;
  int height_;
  int horizon_;
};

// Builds chain_walk, peaked_chain or cliff_grid. Unknown names or parameters
// raise ConfigError.
std::unique_ptr<Environment> make_env(const std::string& name, const EnvParams& params, std::uint64_t seed);

struct Transition {
  int state = 0;
  int action = 0;
  int next_state = 0;
  double hidden_reward = 0.0;
  double observed_reward = 0.0;  // delayed signal; equals hidden_reward when no delay applies
  bool terminal = false;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  double hidden_return() const;
};

using Policy = std::function<int(int state, Rng& rng)>;

// Runs one episode of at most max_steps steps. The environment and the policy
// RNG are both seeded from `seed`.
Trajectory rollout(Environment& env, const Policy& policy, int max_steps, std::uint64_t seed);

Policy uniform_random_policy(int num_actions);

}  // namespace codetr::envs
