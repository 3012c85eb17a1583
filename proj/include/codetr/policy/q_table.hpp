#pragma once

#include <cstdint>
#include <vector>

#include "codetr/envs/environment.hpp"

namespace codetr::policy {

struct QLearningParams {
  double alpha = 0.1;
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Fraction of the training budget over which epsilon decays linearly.
  double epsilon_decay_fraction = 0.5;
};

// Linear decay from start to end over decay_fraction * total_steps, flat after.
double epsilon_at(const QLearningParams& params, std::int64_t step, std::int64_t total_steps);

class QTable {
 public:
  QTable(int num_states, int num_actions, double initial_value = 0.0);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double value(int state, int action) const;
  void set(int state, int action, double value);
  double max_value(int state) const;

  // argmax with uniformly random tie-breaking.
  int greedy_action(int state, envs::Rng& rng) const;
  int epsilon_greedy_action(int state, double epsilon, envs::Rng& rng) const;

  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t index(int state, int action) const;

  int num_states_;
  int num_actions_;
  std::vector<double> values_;
};

struct QTransition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool terminal = false;
};

// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)), with no bootstrap
// at terminal transitions. Non-finite rewards are rejected before they reach
// the table.
void q_update(QTable& table, const QTransition& transition, const QLearningParams& params);

}  // namespace codetr::policy
