#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "codetr/harness/config.hpp"
#include "codetr/policy/q_table.hpp"
#include "codetr/trainer/alternation.hpp"
#include "codetr/trainer/relabeler.hpp"

namespace codetr::harness {

// Builds the relabeler for a method. The codetr model is initialised from
// `seed` (plus the configured offset) so runs are reproducible.
std::unique_ptr<trainer::RewardRelabeler> make_relabeler(const ExperimentConfig& config, Method method,
                                                         std::uint64_t seed);

struct MethodRun {
  std::unique_ptr<envs::Environment> env;
  std::unique_ptr<trainer::RewardRelabeler> relabeler;
  policy::QTable table{1, 1};
  trainer::ExperimentLog log;
};

// One (method, seed) experiment in memory, no files.
MethodRun run_method(const ExperimentConfig& config, Method method, std::uint64_t seed,
                     const std::function<void(const trainer::LogRow&)>& on_row = {});

// "20261018T120000Z"
std::string utc_timestamp();
std::string make_run_id(const ExperimentConfig& config, Method method, std::uint64_t seed,
                        const std::string& timestamp);

// Writes <outdir>/<run-id>/{config.snapshot, log.csv, curves.svg, model.ckpt}.
// The snapshot is written before any training; the log is flushed row by row.
std::filesystem::path run_to_directory(const ExperimentConfig& config, const std::string& config_text,
                                       Method method, std::uint64_t seed, const std::filesystem::path& outdir,
                                       const std::string& timestamp);

struct SweepOptions {
  std::filesystem::path outdir;
  int jobs = 1;
};

struct SweepResult {
  std::vector<std::filesystem::path> run_dirs;
  std::filesystem::path aggregate_plot;
  int failures = 0;
};

// Every method x seed, fanned over `jobs` worker processes, then the
// aggregate <outdir>/curves.svg with mean and std across seeds per method.
SweepResult run_sweep(const ExperimentConfig& config, const std::string& config_text, const SweepOptions& options,
                      std::ostream& progress);

}  // namespace codetr::harness
