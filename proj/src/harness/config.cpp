#include "codetr/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace codetr::harness {

ConfigFileError::ConfigFileError(const std::string& source, int line, const std::string& field,
                                 const std::string& message)
    : ConfigError(source + ":" + (line > 0 ? std::to_string(line) : std::string("?")) +
                  (field.empty() ? std::string() : ": field '" + field + "'") + ": " + message),
      line_(line),
      field_(field) {}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Drops a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : s_(text), line_(line) {}

  // Returns an error message on failure.
  std::optional<std::string> parse(ConfigValue& out) {
    if (auto err = parse_value(out, true)) return err;
    skip_ws();
    if (pos_ != s_.size()) return "unexpected trailing text '" + s_.substr(pos_) + "'";
    return std::nullopt;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::optional<std::string> parse_value(ConfigValue& out, bool allow_list) {
    skip_ws();
    out.line = line_;
    if (pos_ >= s_.size()) return std::string("missing value");
    const char c = s_[pos_];
    if (c == '"') {
      const auto end = s_.find('"', pos_ + 1);
      if (end == std::string::npos) return std::string("unterminated string");
      out.type = ConfigValue::Type::String;
      out.text = s_.substr(pos_ + 1, end - pos_ - 1);
      pos_ = end + 1;
      return std::nullopt;
    }
    if (c == '[') {
      if (!allow_list) return std::string("nested lists are not supported");
      ++pos_;
      out.type = ConfigValue::Type::List;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return std::nullopt;
      }
      for (;;) {
        ConfigValue item;
        if (auto err = parse_value(item, false)) return err;
        out.items.push_back(std::move(item));
        skip_ws();
        if (pos_ >= s_.size()) return std::string("unterminated list");
        if (s_[pos_] == ']') {
          ++pos_;
          return std::nullopt;
        }
        if (s_[pos_] != ',') return std::string("expected ',' or ']' in list");
        ++pos_;
      }
    }
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && !std::isspace(static_cast<unsigned char>(s_[end]))) {
      ++end;
    }
    const std::string token = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (token == "true" || token == "false") {
      out.type = ConfigValue::Type::Boolean;
      out.boolean = token == "true";
      return std::nullopt;
    }
    std::string cleaned;
    for (char ch : token) {
      if (ch != '_') cleaned.push_back(ch);
    }
    std::size_t used = 0;
    try {
      out.number = std::stod(cleaned, &used);
    } catch (const std::exception&) {
      return "cannot parse value '" + token + "' (strings need double quotes)";
    }
    if (used != cleaned.size() || !std::isfinite(out.number)) return "cannot parse number '" + token + "'";
    out.type = ConfigValue::Type::Number;
    return std::nullopt;
  }

  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
};

}  // namespace

ConfigTable ConfigTable::parse(const std::string& text, const std::string& source) {
  ConfigTable table;
  table.source_ = source;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigFileError(source, line_no, "", "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ConfigFileError(source, line_no, "", "invalid section name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigFileError(source, line_no, "", "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigFileError(source, line_no, key, "invalid key");
    const std::string full = section.empty() ? key : section + "." + key;
    ConfigValue value;
    if (auto err = ValueParser(line.substr(eq + 1), line_no).parse(value)) {
      throw ConfigFileError(source, line_no, full, *err);
    }
    if (table.values_.count(full)) {
      throw ConfigFileError(source, line_no, full,
                            "duplicate key (first set on line " + std::to_string(table.values_[full].line) + ")");
    }
    table.values_.emplace(full, std::move(value));
    table.order_.push_back(full);
  }
  return table;
}

const ConfigValue* ConfigTable::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

void ConfigTable::fail(const std::string& key, const std::string& message) const {
  const auto it = values_.find(key);
  throw ConfigFileError(source_, it == values_.end() ? 0 : it->second.line, key, message);
}

const ConfigValue& ConfigTable::require_type(const std::string& key, ConfigValue::Type type,
                                             const char* type_name) const {
  const auto* v = find(key);
  if (v->type != type) fail(key, std::string("expected a ") + type_name);
  return *v;
}

double ConfigTable::number(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  return require_type(key, ConfigValue::Type::Number, "number").number;
}

std::int64_t ConfigTable::integer(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  const double v = require_type(key, ConfigValue::Type::Number, "number").number;
  if (v != std::floor(v) || std::abs(v) > 9.0e15) fail(key, "expected an integer");
  return static_cast<std::int64_t>(v);
}

bool ConfigTable::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  return require_type(key, ConfigValue::Type::Boolean, "boolean").boolean;
}

std::string ConfigTable::string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  return require_type(key, ConfigValue::Type::String, "string").text;
}

std::vector<std::string> ConfigTable::strings(const std::string& key,
                                              const std::vector<std::string>& fallback) const {
  if (!has(key)) return fallback;
  const auto* v = find(key);
  if (v->type == ConfigValue::Type::String) return {v->text};
  if (v->type != ConfigValue::Type::List) fail(key, "expected a string or a list of strings");
  std::vector<std::string> out;
  for (const auto& item : v->items) {
    if (item.type != ConfigValue::Type::String) fail(key, "expected a list of strings");
    out.push_back(item.text);
  }
  return out;
}

std::vector<std::uint64_t> ConfigTable::unsigned_list(const std::string& key,
                                                      const std::vector<std::uint64_t>& fallback) const {
  if (!has(key)) return fallback;
  const auto* v = find(key);
  std::vector<ConfigValue> items = v->type == ConfigValue::Type::List ? v->items : std::vector<ConfigValue>{*v};
  std::vector<std::uint64_t> out;
  for (const auto& item : items) {
    if (item.type != ConfigValue::Type::Number || item.number < 0 || item.number != std::floor(item.number)) {
      fail(key, "expected non-negative integers");
    }
    out.push_back(static_cast<std::uint64_t>(item.number));
  }
  return out;
}

std::map<std::string, double> ConfigTable::numeric_section(const std::string& section) const {
  std::map<std::string, double> out;
  const std::string prefix = section + ".";
  for (const auto& [key, value] : values_) {
    if (key.rfind(prefix, 0) != 0) continue;
    used_.insert(key);
    if (value.type != ConfigValue::Type::Number) fail(key, "expected a number");
    out[key.substr(prefix.size())] = value.number;
  }
  return out;
}

void ConfigTable::reject_unused() const {
  for (const auto& key : order_) {
    if (!used_.count(key)) fail(key, "unknown field");
  }
}

Method parse_method(const std::string& name) {
  if (name == "codetr") return Method::Codetr;
  if (name == "raw_delayed") return Method::RawDelayed;
  if (name == "uniform_split") return Method::UniformSplit;
  if (name == "ircr") return Method::Ircr;
  if (name == "oracle") return Method::Oracle;
  throw ConfigError("unknown method '" + name + "' (expected codetr, raw_delayed, uniform_split, ircr or oracle)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::Codetr: return "codetr";
    case Method::RawDelayed: return "raw_delayed";
    case Method::UniformSplit: return "uniform_split";
    case Method::Ircr: return "ircr";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

namespace {

int to_int(const ConfigTable& t, const std::string& key, int fallback) {
  const auto v = t.integer(key, fallback);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) t.fail(key, "out of range");
  return static_cast<int>(v);
}

// Runs a component validator and re-raises its message against a field.
template <typename F>
void check(const ConfigTable& t, const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigFileError&) {
    throw;
  } catch (const ConfigError& e) {
    t.fail(key, e.what());
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
  const auto t = ConfigTable::parse(text, source);
  ExperimentConfig c;

  c.env_name = t.string("experiment.env", c.env_name);
  const auto composite = t.string("experiment.composite", "sum");
  const double beta = t.number("experiment.beta", 3.0);
  check(t, "experiment.composite", [&] { c.spec = rewards::CompositeSpec::parse(composite, beta); });
  c.delay = to_int(t, "experiment.delay", c.delay);
  if (c.delay < 1) t.fail("experiment.delay", "must be >= 1");
  std::vector<Method> methods;
  for (const auto& m : t.strings("experiment.methods", {"codetr"})) {
    check(t, "experiment.methods", [&] { methods.push_back(parse_method(m)); });
  }
  if (methods.empty()) t.fail("experiment.methods", "must name at least one method");
  c.methods = methods;
  c.seeds = t.unsigned_list("experiment.seeds", c.seeds);
  if (c.seeds.empty()) t.fail("experiment.seeds", "seed list must be nonempty");
  c.output_dir = t.string("experiment.output_dir", c.output_dir);

  auto& run = c.run;
  run.total_env_steps = t.integer("run.total_env_steps", run.total_env_steps);
  run.eval_interval = t.integer("run.eval_interval", run.eval_interval);
  run.eval_episodes = to_int(t, "run.eval_episodes", run.eval_episodes);
  const auto capacity = t.integer("run.buffer_capacity", static_cast<std::int64_t>(run.buffer_capacity));
  if (capacity < 1) t.fail("run.buffer_capacity", "must be >= 1");
  run.buffer_capacity = static_cast<std::size_t>(capacity);
  run.policy_updates_per_step = t.number("run.policy_updates_per_step", run.policy_updates_per_step);

  auto& tc = run.trainer;
  tc.batch_size = to_int(t, "trainer.batch_size", tc.batch_size);
  tc.learning_rate = t.number("trainer.learning_rate", tc.learning_rate);
  tc.weight_decay = t.number("trainer.weight_decay", tc.weight_decay);
  tc.warmup_steps = to_int(t, "trainer.warmup_steps", tc.warmup_steps);
  tc.pretrain_steps = to_int(t, "trainer.pretrain_steps", tc.pretrain_steps);
  tc.pretrain_iterations = to_int(t, "trainer.pretrain_iterations", tc.pretrain_iterations);
  tc.iterations_per_trajectory = to_int(t, "trainer.iterations_per_trajectory", tc.iterations_per_trajectory);
  tc.max_gradient_steps = to_int(t, "trainer.max_gradient_steps", tc.max_gradient_steps);
  tc.normalize_targets = t.boolean("trainer.normalize_targets", tc.normalize_targets);

  auto& q = run.q;
  q.alpha = t.number("policy.alpha", q.alpha);
  q.gamma = t.number("policy.gamma", q.gamma);
  q.epsilon_start = t.number("policy.epsilon_start", q.epsilon_start);
  q.epsilon_end = t.number("policy.epsilon_end", q.epsilon_end);
  q.epsilon_decay_fraction = t.number("policy.epsilon_decay_fraction", q.epsilon_decay_fraction);

  auto& m = c.model;
  m.num_causal_layers = to_int(t, "model.layers", m.num_causal_layers);
  m.num_inseq_layers = to_int(t, "model.inseq_layers", m.num_inseq_layers);
  m.num_heads = to_int(t, "model.heads", m.num_heads);
  m.embed_dim = to_int(t, "model.embed_dim", m.embed_dim);
  m.max_window = to_int(t, "model.max_window", m.max_window);
  m.dropout = t.number("model.dropout", m.dropout);
  m.init_std = t.number("model.init_std", m.init_std);
  m.zero_qk_init = t.boolean("model.zero_qk_init", m.zero_qk_init);
  c.model_seed_offset = static_cast<std::uint64_t>(t.integer("model.seed_offset", 0));
  const auto window = t.integer("model.relabel_window", 0);
  if (window < 0) t.fail("model.relabel_window", "must be >= 0");
  c.relabel_window = static_cast<std::size_t>(window);
  const auto output = t.string("model.relabel_output", "weighted");
  if (output == "weighted") {
    c.relabel_output = model::RelabelOutput::WeightedReward;
  } else if (output == "instance") {
    c.relabel_output = model::RelabelOutput::InstanceReward;
  } else {
    t.fail("model.relabel_output", "expected \"weighted\" or \"instance\"");
  }

  c.env_params = t.numeric_section("env");
  t.reject_unused();

  // Cross-field validation, reported against the most relevant field.
  check(t, "experiment.env", [&] {
    const auto env = envs::make_env(c.env_name, c.env_params, 0);
    m.state_dim = env->num_states();
    m.action_dim = env->num_actions();
  });
  check(t, "model.embed_dim", [&] { m.validate(); });
  check(t, "run.total_env_steps", [&] { run.validate(); });
  const bool uses_model = std::find(c.methods.begin(), c.methods.end(), Method::Codetr) != c.methods.end();
  if (uses_model && c.delay > m.max_window) {
    t.fail("experiment.delay", "delay " + std::to_string(c.delay) + " exceeds model window M = " +
                                   std::to_string(m.max_window));
  }
  if (uses_model && c.effective_window() > static_cast<std::size_t>(m.max_window)) {
    t.fail("model.relabel_window", "exceeds model window M");
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, std::string* text_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigFileError(path.string(), 0, "", "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  auto config = parse_experiment_config(text, path.string());
  if (text_out) *text_out = text;
  return config;
}

}  // namespace codetr::harness
