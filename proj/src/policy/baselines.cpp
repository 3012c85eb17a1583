#include "codetr/policy/baselines.hpp"

#include "codetr/error.hpp"

namespace codetr::policy {

BaselineKind parse_baseline(const std::string& name) {
  if (name == "raw_delayed") return BaselineKind::RawDelayed;
  if (name == "uniform_split") return BaselineKind::UniformSplit;
  if (name == "ircr") return BaselineKind::Ircr;
  throw ConfigError("unknown baseline '" + name + "' (expected raw_delayed, uniform_split or ircr)");
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::RawDelayed: return "raw_delayed";
    case BaselineKind::UniformSplit: return "uniform_split";
    case BaselineKind::Ircr: return "ircr";
  }
  return "?";
}

std::uint64_t BaselineRelabeler::cache_key(const trainer::ReplayBuffer& buffer) const {
  // IRCR depends on the buffer-wide range, which moves with every insertion.
  return kind_ == BaselineKind::Ircr ? buffer.generation() : 0;
}

double BaselineRelabeler::relabel_step(const trainer::ReplayBuffer& buffer, const trainer::StepRef& ref) const {
  const auto& stored = buffer.trajectory(ref.trajectory);
  const auto& seg = stored.segments.at(stored.segment_of_step.at(ref.step));
  switch (kind_) {
    case BaselineKind::RawDelayed:
      // Matches what the delayed environment emitted for this step.
      return ref.step + 1 == seg.start + seg.length ? seg.composite_reward : 0.0;
    case BaselineKind::UniformSplit:
      return seg.composite_reward / static_cast<double>(seg.length);
    case BaselineKind::Ircr: {
      const double lo = buffer.min_composite();
      const double hi = buffer.max_composite();
      if (hi == lo) return 0.5;
      return (seg.composite_reward - lo) / (hi - lo);
    }
  }
  return 0.0;
}

std::vector<std::vector<double>> baseline_relabel(BaselineKind kind, const trainer::ReplayBuffer& buffer) {
  if (buffer.empty()) throw ContractError("baseline_relabel: empty buffer");
  return trainer::relabel_buffer(BaselineRelabeler(kind), buffer);
}

}  // namespace codetr::policy
