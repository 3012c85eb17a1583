#include "codetr/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace codetr::ad {

GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn, std::span<Tensor> params, double step,
                                double abs_floor, double scale_floor) {
  for (auto& p : params) p.zero_grad();
  backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  double largest = 0.0;
  for (const auto& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
    for (double g : p.grad()) largest = std::max(largest, std::abs(g));
  }
  const double floor = std::max(abs_floor, scale_floor * largest);

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = loss_fn().item();
      values[i] = original - step;
      const double down = loss_fn().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel_err > report.max_relative_error) {
        report.max_relative_error = rel_err;
        report.worst_param = k;
        report.worst_index = i;
      }
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace codetr::ad
