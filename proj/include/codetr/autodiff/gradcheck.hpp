#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "codetr/autodiff/tensor.hpp"

namespace codetr::ad {

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

// Compares analytic gradients from backward() against central differences
//   (f(x + h) - f(x - h)) / 2h
// for every element of every parameter. `loss_fn` must rebuild the graph from
// the current parameter values on each call. Relative error is
//   |a - n| / max(|a|, |n|, abs_floor, scale_floor * G)
// where G is the largest |a| over all checked elements. A nonzero
// scale_floor keeps gradients that are exactly zero by symmetry, where the
// difference quotient is pure rounding noise, from dominating the report.
GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                                double step = 1e-5, double abs_floor = 1e-8, double scale_floor = 0.0);

}  // namespace codetr::ad
