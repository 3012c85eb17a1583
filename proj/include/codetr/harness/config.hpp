#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "codetr/envs/environment.hpp"
#include "codetr/error.hpp"
#include "codetr/model/reward_model.hpp"
#include "codetr/rewards/composite.hpp"
#include "codetr/trainer/alternation.hpp"

namespace codetr::harness {

// Config file syntax, a flat subset of TOML:
//
//   # comment
//   [section]
//   key = 12            number
//   key = true          boolean
//   key = "text"        string
//   key = [1, 2, "a"]   single-line list of scalars
//
// Keys are addressed as "section.key"; keys above the first header live in
// the unnamed section and are addressed by their bare name.
struct ConfigValue {
  enum class Type { Number, Boolean, String, List };
  Type type = Type::Number;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> items;
  int line = 0;
};

// Thrown for malformed files and invalid fields; exit code 2 at the CLI.
class ConfigFileError : public ConfigError {
 public:
  ConfigFileError(const std::string& source, int line, const std::string& field, const std::string& message);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

class ConfigTable {
 public:
  static ConfigTable parse(const std::string& text, const std::string& source = "<config>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const ConfigValue* find(const std::string& key) const;

  double number(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<std::uint64_t> unsigned_list(const std::string& key, const std::vector<std::uint64_t>& fallback) const;
  // Every numeric key of a section, marked as consumed.
  std::map<std::string, double> numeric_section(const std::string& section) const;

  // Raises on the first key no accessor has read.
  void reject_unused() const;

  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  const ConfigValue& require_type(const std::string& key, ConfigValue::Type type, const char* type_name) const;

  std::string source_;
  std::map<std::string, ConfigValue> values_;
  std::vector<std::string> order_;
  mutable std::set<std::string> used_;
};

enum class Method { Codetr, RawDelayed, UniformSplit, Ircr, Oracle };
Method parse_method(const std::string& name);
std::string method_name(Method method);

struct ExperimentConfig {
  std::string env_name = "chain_walk";
  envs::EnvParams env_params;
  rewards::CompositeSpec spec;
  int delay = 5;
  std::vector<Method> methods{Method::Codetr};
  model::RewardModelConfig model;  // state/action dims are filled from the env
  std::uint64_t model_seed_offset = 0;
  std::size_t relabel_window = 0;  // 0 means "equal to the delay"
  model::RelabelOutput relabel_output = model::RelabelOutput::WeightedReward;
  trainer::AlternationConfig run;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";

  std::size_t effective_window() const { return relabel_window ? relabel_window : static_cast<std::size_t>(delay); }
};

// Parses and validates. Errors carry the source name, line and field.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path, std::string* text_out = nullptr);

}  // namespace codetr::harness
