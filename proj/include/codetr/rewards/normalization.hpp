#pragma once

#include "codetr/rewards/composite.hpp"

namespace codetr::rewards {

// Sum of observed composite rewards over an episode divided by the largest
// value that sum can take when every step earns r_max:
//   Sum, Max    T * r_max        (Max: r_max summed over the T steps)
//   SumSquare   T * r_max^2
//   SquareSum   (T / n) * (n * r_max)^2
// Throws ConfigError unless r_max > 0, T > 0 and n >= 1.
double normalized_score(const CompositeSpec& spec, int delay, int horizon, double r_max, double composite_sum);

// The denominator above.
double max_composite_sum(const CompositeSpec& spec, int delay, int horizon, double r_max);

}  // namespace codetr::rewards
