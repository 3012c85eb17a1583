#pragma once

// Brute-force composite evaluator used as a test oracle. It shares no code
// with the library: every aggregator is spelled out from its definition, and
// the Max softmax is evaluated in long double from raw exponentials.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

inline double sum(const std::vector<double>& r) {
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) total = total + r[i];
  return total;
}

inline double sum_square(const std::vector<double>& r) {
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double magnitude = r[i] < 0.0 ? -r[i] : r[i];
    total = total + magnitude * r[i];
  }
  return total;
}

inline double square_sum(const std::vector<double>& r) {
  const double s = sum(r);
  const double magnitude = s < 0.0 ? -s : s;
  return magnitude * s;
}

inline double max_composite(const std::vector<double>& r, double beta) {
  // Shift by the largest logit so the exponentials stay finite.
  long double top = static_cast<long double>(beta) * r[0];
  for (double x : r) top = std::max(top, static_cast<long double>(beta) * x);
  long double z = 0.0L;
  std::vector<long double> e(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    e[i] = std::exp(static_cast<long double>(beta) * r[i] - top);
    z += e[i];
  }
  long double total = 0.0L;
  for (std::size_t i = 0; i < r.size(); ++i) total += static_cast<long double>(r.size()) * (e[i] / z) * r[i];
  return static_cast<double>(total);
}

inline double evaluate(const std::string& kind, const std::vector<double>& r, double beta = 3.0) {
  if (r.empty()) throw std::invalid_argument("oracle: empty segment");
  if (kind == "sum") return sum(r);
  if (kind == "sumsquare") return sum_square(r);
  if (kind == "squaresum") return square_sum(r);
  if (kind == "max") return max_composite(r, beta);
  throw std::invalid_argument("oracle: unknown kind " + kind);
}

}  // namespace oracle
