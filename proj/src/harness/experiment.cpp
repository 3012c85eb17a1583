#include "codetr/harness/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "codetr/harness/plot.hpp"
#include "codetr/model/checkpoint.hpp"
#include "codetr/policy/baselines.hpp"
#include "codetr/trainer/trainer.hpp"

namespace codetr::harness {

namespace fs = std::filesystem;

std::unique_ptr<trainer::RewardRelabeler> make_relabeler(const ExperimentConfig& config, Method method,
                                                         std::uint64_t seed) {
  switch (method) {
    case Method::Codetr: {
      model::RewardModel model(config.model, seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL +
                                                 config.model_seed_offset);
      return std::make_unique<trainer::CodetrRelabeler>(std::move(model), config.run.trainer,
                                                        config.effective_window(), config.relabel_output);
    }
    case Method::RawDelayed:
      return std::make_unique<policy::BaselineRelabeler>(policy::BaselineKind::RawDelayed);
    case Method::UniformSplit:
      return std::make_unique<policy::BaselineRelabeler>(policy::BaselineKind::UniformSplit);
    case Method::Ircr:
      return std::make_unique<policy::BaselineRelabeler>(policy::BaselineKind::Ircr);
    case Method::Oracle:
      return std::make_unique<trainer::OracleRelabeler>();
  }
  throw ConfigError("unknown method");
}

MethodRun run_method(const ExperimentConfig& config, Method method, std::uint64_t seed,
                     const std::function<void(const trainer::LogRow&)>& on_row) {
  MethodRun run;
  run.env = envs::make_env(config.env_name, config.env_params, seed);
  run.relabeler = make_relabeler(config, method, seed);
  run.table = policy::QTable(run.env->num_states(), run.env->num_actions());
  run.log = trainer::run_alternation(*run.env, config.spec, config.delay, *run.relabeler, run.table, config.run, seed,
                                     on_row);
  return run;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string make_run_id(const ExperimentConfig& config, Method method, std::uint64_t seed,
                        const std::string& timestamp) {
  std::ostringstream id;
  id << config.env_name << '_' << config.spec.name() << '_' << config.delay << '_' << method_name(method) << '_'
     << seed << '_' << timestamp;
  return id.str();
}

fs::path run_to_directory(const ExperimentConfig& config, const std::string& config_text, Method method,
                          std::uint64_t seed, const fs::path& outdir, const std::string& timestamp) {
  const std::string id = make_run_id(config, method, seed, timestamp);
  fs::create_directories(outdir);
  fs::path dir = outdir / id;
  for (int k = 1; !fs::create_directory(dir); ++k) dir = outdir / (id + "-" + std::to_string(k));

  {
    std::ofstream snap(dir / "config.snapshot", std::ios::binary);
    snap << config_text;
    if (!snap) throw std::runtime_error("cannot write " + (dir / "config.snapshot").string());
  }
  std::ofstream csv(dir / "log.csv");
  if (!csv) throw std::runtime_error("cannot write " + (dir / "log.csv").string());
  trainer::write_log_header(csv);
  csv.flush();
  auto run = run_method(config, method, seed, [&](const trainer::LogRow& row) {
    trainer::write_log_row(csv, row);
    csv.flush();
  });
  if (const auto* codetr = dynamic_cast<const trainer::CodetrRelabeler*>(run.relabeler.get())) {
    model::save_checkpoint(codetr->export_model(), dir / "model.ckpt");
  }
  write_svg(dir / "curves.svg", id, "environment steps", "eval return",
            {aggregate_eval_return(method_name(method), {run.log.rows})});
  return dir;
}

namespace {

struct Task {
  Method method;
  std::uint64_t seed;
};

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config, const std::string& config_text, const SweepOptions& options,
                      std::ostream& progress) {
  const std::string timestamp = utc_timestamp();
  std::vector<Task> tasks;
  for (auto m : config.methods) {
    for (auto s : config.seeds) tasks.push_back({m, s});
  }
  SweepResult result;
  fs::create_directories(options.outdir);

  // Each worker handles tasks i, i + jobs, ... and reports run directories
  // through a pipe; workers share nothing else.
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(tasks.size())));
  std::vector<std::string> dirs(tasks.size());
  auto run_task = [&](std::size_t i) -> std::string {
    const auto& t = tasks[i];
    return run_to_directory(config, config_text, t.method, t.seed, options.outdir, timestamp).string();
  };

  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      try {
        dirs[i] = run_task(i);
        progress << "done " << dirs[i] << '\n';
      } catch (const std::exception& e) {
        progress << "failed " << method_name(tasks[i].method) << " seed " << tasks[i].seed << ": " << e.what()
                 << '\n';
        ++result.failures;
      }
    }
  } else {
    struct Worker {
      pid_t pid;
      int fd;
    };
    std::vector<Worker> workers;
    progress.flush();
    for (int w = 0; w < jobs; ++w) {
      int fds[2];
      if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
      const pid_t pid = fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        close(fds[0]);
        int failed = 0;
        for (std::size_t i = static_cast<std::size_t>(w); i < tasks.size(); i += static_cast<std::size_t>(jobs)) {
          std::string line;
          try {
            line = std::to_string(i) + " ok " + run_task(i) + "\n";
          } catch (const std::exception& e) {
            line = std::to_string(i) + " err " + e.what() + "\n";
            ++failed;
          }
          if (write(fds[1], line.data(), line.size()) < 0) failed = 1;
        }
        close(fds[1]);
        _exit(failed ? 1 : 0);
      }
      close(fds[1]);
      workers.push_back({pid, fds[0]});
    }
    for (auto& w : workers) {
      std::string buffer;
      char chunk[4096];
      ssize_t n;
      while ((n = read(w.fd, chunk, sizeof chunk)) > 0) buffer.append(chunk, static_cast<std::size_t>(n));
      close(w.fd);
      int status = 0;
      waitpid(w.pid, &status, 0);
      std::istringstream lines(buffer);
      std::string line;
      while (std::getline(lines, line)) {
        std::istringstream ls(line);
        std::size_t i = 0;
        std::string kind;
        ls >> i >> kind;
        std::string rest;
        std::getline(ls, rest);
        if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
        if (kind == "ok" && i < dirs.size()) {
          dirs[i] = rest;
          progress << "done " << rest << '\n';
        } else {
          progress << "failed task " << i << ": " << rest << '\n';
          ++result.failures;
        }
      }
      if (!WIFEXITED(status)) {
        progress << "worker " << w.pid << " terminated abnormally\n";
        ++result.failures;
      }
    }
  }

  std::map<std::string, std::vector<std::vector<trainer::LogRow>>> by_method;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (dirs[i].empty()) continue;
    result.run_dirs.emplace_back(dirs[i]);
    const auto name = method_name(tasks[i].method);
    if (!by_method.count(name)) order.push_back(name);
    by_method[name].push_back(read_log_csv(fs::path(dirs[i]) / "log.csv"));
  }
  std::vector<Series> series;
  for (const auto& name : order) series.push_back(aggregate_eval_return(name, by_method[name]));
  result.aggregate_plot = options.outdir / "curves.svg";
  std::ostringstream title;
  title << config.env_name << ", " << config.spec.name() << ", n=" << config.delay << " (mean +/- std over "
        << config.seeds.size() << " seeds)";
  write_svg(result.aggregate_plot, title.str(), "environment steps", "eval return", series);
  return result;
}

}  // namespace codetr::harness
