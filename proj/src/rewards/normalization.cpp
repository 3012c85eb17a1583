#include "codetr/rewards/normalization.hpp"

#include <cmath>

#include "codetr/error.hpp"

namespace codetr::rewards {

double max_composite_sum(const CompositeSpec& spec, int delay, int horizon, double r_max) {
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw ConfigError("normalized_score: r_max must be positive");
  if (horizon <= 0) throw ConfigError("normalized_score: horizon T must be positive");
  if (delay < 1) throw ConfigError("normalized_score: delay n must be >= 1");
  const double T = horizon;
  const double n = delay;
  switch (spec.kind) {
    case CompositeKind::Sum:
    case CompositeKind::Max:
      return T * r_max;
    case CompositeKind::SumSquare:
      return T * r_max * r_max;
    case CompositeKind::SquareSum:
      return (T / n) * (r_max * n) * (r_max * n);
  }
  throw ConfigError("normalized_score: unknown composite kind");
}

double normalized_score(const CompositeSpec& spec, int delay, int horizon, double r_max, double composite_sum) {
  return composite_sum / max_composite_sum(spec, delay, horizon, r_max);
}

}  // namespace codetr::rewards
