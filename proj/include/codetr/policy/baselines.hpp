#pragma once

#include <string>
#include <vector>

#include "codetr/trainer/relabeler.hpp"

namespace codetr::policy {

enum class BaselineKind { RawDelayed, UniformSplit, Ircr };

// "raw_delayed", "uniform_split" or "ircr". Throws ConfigError.
BaselineKind parse_baseline(const std::string& name);
std::string baseline_name(BaselineKind kind);

// Non-parametric relabels derived from the buffer's segments:
//   raw_delayed    R_co on the last step of each segment, 0 elsewhere
//   uniform_split  R_co / n_i on every step of the segment
//   ircr           (R_co - R_min) / (R_max - R_min) over the buffer's segments,
//                  0.5 everywhere when R_max == R_min
class BaselineRelabeler final : public trainer::RewardRelabeler {
 public:
  explicit BaselineRelabeler(BaselineKind kind) : kind_(kind) {}

  std::string name() const override { return baseline_name(kind_); }
  std::uint64_t cache_key(const trainer::ReplayBuffer& buffer) const override;
  double relabel_step(const trainer::ReplayBuffer& buffer, const trainer::StepRef& ref) const override;

  BaselineKind kind() const { return kind_; }

 private:
  BaselineKind kind_;
};

std::vector<std::vector<double>> baseline_relabel(BaselineKind kind, const trainer::ReplayBuffer& buffer);

}  // namespace codetr::policy
