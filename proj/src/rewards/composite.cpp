#include "codetr/rewards/composite.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "codetr/error.hpp"

namespace codetr::rewards {

CompositeSpec CompositeSpec::parse(const std::string& kind, double beta) {
  std::string k;
  for (char c : kind) {
    if (c != '_' && c != '-') k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  CompositeSpec spec;
  spec.beta = beta;
  if (k == "sum") {
    spec.kind = CompositeKind::Sum;
  } else if (k == "sumsquare") {
    spec.kind = CompositeKind::SumSquare;
  } else if (k == "squaresum") {
    spec.kind = CompositeKind::SquareSum;
  } else if (k == "max") {
    spec.kind = CompositeKind::Max;
  } else {
    throw ConfigError("unknown composite kind '" + kind + "' (expected sum, sumsquare, squaresum or max)");
  }
  spec.validate();
  return spec;
}

std::string CompositeSpec::name() const {
  switch (kind) {
    case CompositeKind::Sum: return "sum";
    case CompositeKind::SumSquare: return "sumsquare";
    case CompositeKind::SquareSum: return "squaresum";
    case CompositeKind::Max: return "max";
  }
  return "unknown";
}

void CompositeSpec::validate() const {
  if (kind == CompositeKind::Max && !(beta > 0.0)) throw ConfigError("composite: Max needs beta > 0");
}

double composite(const CompositeSpec& spec, std::span<const double> r) {
  if (r.empty()) throw ContractError("composite: empty segment");
  switch (spec.kind) {
    case CompositeKind::Sum: {
      double total = 0.0;
      for (double x : r) total += x;
      return total;
    }
    case CompositeKind::SumSquare: {
      double total = 0.0;
      for (double x : r) total += std::abs(x) * x;
      return total;
    }
    case CompositeKind::SquareSum: {
      double total = 0.0;
      for (double x : r) total += x;
      return std::abs(total) * total;
    }
    case CompositeKind::Max: {
      spec.validate();
      const double peak = *std::max_element(r.begin(), r.end());
      double z = 0.0, weighted = 0.0;
      for (double x : r) {
        const double e = std::exp(spec.beta * (x - peak));
        z += e;
        weighted += e * x;
      }
      return static_cast<double>(r.size()) * weighted / z;
    }
  }
  throw ContractError("composite: unhandled kind");
}

std::vector<Segment> segment_trajectory(const envs::Trajectory& trajectory, int n, const CompositeSpec& spec) {
  if (n <= 0) throw ContractError("segment_trajectory: delay n must be positive, got " + std::to_string(n));
  if (trajectory.empty()) throw ContractError("segment_trajectory: empty trajectory");
  std::vector<Segment> segments;
  const auto len = static_cast<std::size_t>(n);
  for (std::size_t start = 0; start < trajectory.size(); start += len) {
    const std::size_t end = std::min(trajectory.size(), start + len);
    Segment seg;
    seg.start = start;
    seg.length = end - start;
    std::vector<double> hidden;
    for (std::size_t t = start; t < end; ++t) {
      const auto& step = trajectory.steps[t];
      seg.states.push_back(step.state);
      seg.actions.push_back(step.action);
      hidden.push_back(step.hidden_reward);
    }
    seg.composite_reward = composite(spec, hidden);
    segments.push_back(std::move(seg));
  }
  return segments;
}

DelayedEnv::DelayedEnv(envs::Environment& inner, int delay, CompositeSpec spec)
    : inner_(inner), delay_(delay), spec_(spec) {
  if (delay < 1) throw ConfigError("delayed env: delay must be >= 1");
  spec_.validate();
}

int DelayedEnv::reset() {
  pending_.clear();
  active_ = true;
  return inner_.reset();
}

DelayedStep DelayedEnv::step(int action) {
  if (!active_) throw ContractError("delayed env: step() on a finished episode; call reset()");
  const auto r = inner_.step(action);
  pending_.push_back(r.reward);
  DelayedStep out;
  out.next_state = r.next_state;
  out.hidden_reward = r.reward;
  out.done = r.done();
  out.terminal = r.terminal;
  if (out.done || pending_.size() == static_cast<std::size_t>(delay_)) {
    out.observed_reward = composite(spec_, pending_);
    pending_.clear();
  }
  if (out.done) active_ = false;
  return out;
}

}  // namespace codetr::rewards
