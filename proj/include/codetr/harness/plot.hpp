#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "codetr/trainer/alternation.hpp"

namespace codetr::harness {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> stddev;  // empty or same length as mean; drawn as a band
};

// Self-contained SVG line chart.
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);
void write_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<Series>& series);

// Reads a log written by write_log_row. Throws std::runtime_error on malformed input.
std::vector<trainer::LogRow> read_log_csv(const std::filesystem::path& path);

// Mean and sample standard deviation of eval_return over runs, row by row,
// truncated to the shortest run. x is the mean step of each row.
Series aggregate_eval_return(const std::string& name, const std::vector<std::vector<trainer::LogRow>>& runs);

}  // namespace codetr::harness
