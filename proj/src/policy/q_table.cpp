#include "codetr/policy/q_table.hpp"

#include <algorithm>
#include <cmath>

#include "codetr/error.hpp"

namespace codetr::policy {

double epsilon_at(const QLearningParams& params, std::int64_t step, std::int64_t total_steps) {
  const double horizon = params.epsilon_decay_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0 || static_cast<double>(step) >= horizon) return params.epsilon_end;
  const double frac = static_cast<double>(step) / horizon;
  return params.epsilon_start + frac * (params.epsilon_end - params.epsilon_start);
}

QTable::QTable(int num_states, int num_actions, double initial_value)
    : num_states_(num_states), num_actions_(num_actions) {
  if (num_states < 1 || num_actions < 1) throw ContractError("QTable: sizes must be positive");
  if (!std::isfinite(initial_value)) throw NumericError("QTable: initial value must be finite");
  values_.assign(static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions), initial_value);
}

std::size_t QTable::index(int state, int action) const {
  if (state < 0 || state >= num_states_ || action < 0 || action >= num_actions_) {
    throw ContractError("QTable: index (" + std::to_string(state) + ", " + std::to_string(action) + ") out of range");
  }
  return static_cast<std::size_t>(state) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(action);
}

double QTable::value(int state, int action) const { return values_[index(state, action)]; }

void QTable::set(int state, int action, double value) {
  if (!std::isfinite(value)) throw NumericError("QTable: non-finite value");
  values_[index(state, action)] = value;
}

double QTable::max_value(int state) const {
  const auto begin = values_.begin() + static_cast<std::ptrdiff_t>(index(state, 0));
  return *std::max_element(begin, begin + num_actions_);
}

int QTable::greedy_action(int state, envs::Rng& rng) const {
  const double best = max_value(state);
  int ties[64];
  int count = 0;
  for (int a = 0; a < num_actions_ && count < 64; ++a) {
    if (values_[index(state, a)] == best) ties[count++] = a;
  }
  if (count == 1) return ties[0];
  std::uniform_int_distribution<int> pick(0, count - 1);
  return ties[pick(rng)];
}

int QTable::epsilon_greedy_action(int state, double epsilon, envs::Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, num_actions_ - 1);
    return pick(rng);
  }
  return greedy_action(state, rng);
}

void q_update(QTable& table, const QTransition& tr, const QLearningParams& params) {
  if (!std::isfinite(tr.reward)) throw NumericError("q_update: non-finite reward");
  const double bootstrap = tr.terminal ? 0.0 : params.gamma * table.max_value(tr.next_state);
  const double current = table.value(tr.state, tr.action);
  table.set(tr.state, tr.action, current + params.alpha * (tr.reward + bootstrap - current));
}

}  // namespace codetr::policy
