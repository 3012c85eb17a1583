// Command-line front end: run, case-study, grad-check, oracle-check.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "codetr/error.hpp"
#include "codetr/harness/case_study.hpp"
#include "codetr/harness/checks.hpp"
#include "codetr/harness/config.hpp"
#include "codetr/harness/experiment.hpp"
#include "codetr/model/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace codetr;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds, int jobs,
            const std::string& outdir) {
  std::string text;
  auto config = harness::load_experiment_config(config_path, &text);
  if (!seeds.empty()) config.seeds = seeds;
  harness::SweepOptions options;
  options.outdir = outdir.empty() ? fs::path(config.output_dir) : fs::path(outdir);
  options.jobs = jobs;
  const auto result = harness::run_sweep(config, text, options, std::cout);
  std::cout << "aggregate plot: " << result.aggregate_plot.string() << '\n';
  if (result.failures > 0) {
    std::cerr << "error: " << result.failures << " run(s) failed\n";
    return kExitRuntime;
  }
  return 0;
}

int cmd_case_study(const std::string& config_path, const std::string& checkpoint, int episodes, std::uint64_t seed,
                   const std::string& outdir) {
  const auto config = harness::load_experiment_config(config_path);
  if (!fs::exists(checkpoint)) {
    std::cerr << "error: checkpoint '" << checkpoint << "' not found\n";
    return kExitRuntime;
  }
  const auto model = model::load_checkpoint(checkpoint);
  auto env = envs::make_env(config.env_name, config.env_params, seed);
  if (model.config().state_dim != env->num_states() || model.config().action_dim != env->num_actions()) {
    std::cerr << "error: checkpoint input sizes do not match environment '" << config.env_name << "'\n";
    return kExitRuntime;
  }
  std::vector<envs::Trajectory> trajectories;
  const auto policy = envs::uniform_random_policy(env->num_actions());
  for (int e = 0; e < episodes; ++e) {
    trajectories.push_back(envs::rollout(*env, policy, env->horizon(), seed + static_cast<std::uint64_t>(e)));
  }
  const auto report = harness::case_study(model, trajectories, config.delay, config.spec, config.effective_window(),
                                          config.relabel_output);
  const fs::path dir = outdir.empty() ? fs::path(".") : fs::path(outdir);
  fs::create_directories(dir);
  std::ofstream csv(dir / "case_study.csv");
  if (!csv) throw std::runtime_error("cannot write " + (dir / "case_study.csv").string());
  harness::write_case_study_csv(csv, report);
  std::printf("segments scored      %zu\n", report.segments_scored);
  std::printf("mean |w_t - 1|       %.6f\n", report.mean_abs_weight_dev);
  std::printf("argmax hit rate      %.4f\n", report.hit_rate);
  std::printf("tied segments        %zu%s\n", report.tied_segments,
              report.degenerate_ties ? "  (degenerate ties: counted as misses)" : "");
  std::printf("per-step report      %s\n", (dir / "case_study.csv").string().c_str());
  return 0;
}

int cmd_grad_check(int draws, std::uint64_t seed, double tolerance) {
  const auto r = harness::reward_model_gradcheck(draws, seed);
  std::printf("draws %d, elements %zu, max relative error %.3e, max absolute error %.3e\n", r.draws, r.elements,
              r.max_relative_error, r.max_absolute_error);
  const bool ok = r.max_relative_error <= tolerance;
  std::printf("%s (tolerance %.1e)\n", ok ? "ok" : "FAILED", tolerance);
  return ok ? 0 : kExitRuntime;
}

int cmd_oracle_check(std::uint64_t seed) {
  bool ok = true;
  for (const auto& c : harness::environment_oracle_checks(seed)) {
    std::printf("%-4s %s: expected %.9f, observed %.9f, tolerance %.3g\n", c.passed ? "ok" : "FAIL", c.name.c_str(),
                c.expected, c.observed, c.tolerance);
    ok = ok && c.passed;
  }
  return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite delayed reward experiments"};
  app.require_subcommand(1);

  std::string config_path, outdir, checkpoint;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run every method and seed of an experiment config");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--seed", seeds, "Seeds overriding the config list")->delimiter(',');
  run->add_option("--jobs", jobs, "Worker processes")->check(CLI::PositiveNumber);
  run->add_option("--outdir", outdir, "Output directory (default: config output_dir)");

  int episodes = 20;
  std::uint64_t seed = 0;
  auto* cs = app.add_subcommand("case-study", "Weight/reward report of a trained checkpoint");
  cs->add_option("--config", config_path, "Experiment config file")->required();
  cs->add_option("--checkpoint", checkpoint, "model.ckpt from a codetr run")->required();
  cs->add_option("--episodes", episodes, "Random-policy episodes to analyse")->check(CLI::PositiveNumber);
  cs->add_option("--seed", seed, "Rollout seed");
  cs->add_option("--outdir", outdir, "Directory for case_study.csv");

  int draws = 20;
  double tolerance = 1e-4;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of reward-model gradients");
  gc->add_option("--draws", draws, "Random parameter draws")->check(CLI::PositiveNumber);
  gc->add_option("--seed", seed, "Seed");
  gc->add_option("--tolerance", tolerance, "Maximum relative error");

  auto* oc = app.add_subcommand("oracle-check", "Environment checks against exact planners");
  oc->add_option("--seed", seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, seeds, jobs, outdir);
    if (*cs) return cmd_case_study(config_path, checkpoint, episodes, seed, outdir);
    if (*gc) return cmd_grad_check(draws, seed, tolerance);
    if (*oc) return cmd_oracle_check(seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const model::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
