#include "codetr/model/reward_model.hpp"

#include <algorithm>
#include <cmath>

#include "codetr/autodiff/ops.hpp"
#include "codetr/error.hpp"

namespace codetr::model {

namespace ops = codetr::ad;

void RewardModelConfig::validate() const {
  if (num_causal_layers < 1) throw ConfigError("reward model: num_causal_layers must be >= 1");
  if (num_inseq_layers != 1) throw ConfigError("reward model: exactly one in-sequence attention layer is supported");
  if (num_heads < 1) throw ConfigError("reward model: num_heads must be >= 1");
  if (embed_dim < 2) throw ConfigError("reward model: embed_dim must be >= 2");
  if (embed_dim % num_heads != 0) {
    throw ConfigError("reward model: embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (max_window < 1) throw ConfigError("reward model: max_window must be >= 1");
  if (state_dim < 1 || action_dim < 1) throw ConfigError("reward model: state_dim and action_dim must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("reward model: dropout must lie in [0, 1)");
  if (init_std <= 0.0) throw ConfigError("reward model: init_std must be positive");
}

RewardModelConfig RewardModelConfig::paper_scale(int state_dim, int action_dim) {
  RewardModelConfig c;
  c.num_causal_layers = 3;
  c.num_inseq_layers = 1;
  c.num_heads = 4;
  c.embed_dim = 256;
  c.dropout = 0.1;
  c.max_window = 100;
  c.state_dim = state_dim;
  c.action_dim = action_dim;
  return c;
}

Window Window::one_hot(std::span<const int> states, std::span<const int> actions, int num_states, int num_actions) {
  if (states.size() != actions.size()) throw ContractError("Window::one_hot: states and actions differ in length");
  Window w;
  w.length = states.size();
  w.states.assign(w.length * static_cast<std::size_t>(num_states), 0.0);
  w.actions.assign(w.length * static_cast<std::size_t>(num_actions), 0.0);
  for (std::size_t t = 0; t < w.length; ++t) {
    if (states[t] < 0 || states[t] >= num_states || actions[t] < 0 || actions[t] >= num_actions) {
      throw ContractError("Window::one_hot: index out of range at step " + std::to_string(t));
    }
    w.states[t * static_cast<std::size_t>(num_states) + static_cast<std::size_t>(states[t])] = 1.0;
    w.actions[t * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(actions[t])] = 1.0;
  }
  return w;
}

Window Window::slice(std::size_t begin, std::size_t end, int state_dim, int action_dim) const {
  if (begin >= end || end > length) throw ContractError("Window::slice: invalid range");
  const auto sd = static_cast<std::size_t>(state_dim);
  const auto adim = static_cast<std::size_t>(action_dim);
  Window w;
  w.length = end - begin;
  w.states.assign(states.begin() + static_cast<std::ptrdiff_t>(begin * sd),
                  states.begin() + static_cast<std::ptrdiff_t>(end * sd));
  w.actions.assign(actions.begin() + static_cast<std::ptrdiff_t>(begin * adim),
                   actions.begin() + static_cast<std::ptrdiff_t>(end * adim));
  return w;
}

namespace {

class Initializer {
 public:
  Initializer(std::uint64_t seed, double std) : rng_(seed), normal_(0.0, std) {}

  Tensor normal(ad::Shape shape) {
    std::vector<double> v(ad::numel_of(shape));
    for (auto& x : v) x = normal_(rng_);
    return Tensor::from(std::move(shape), std::move(v), true);
  }
  static Tensor constant(ad::Shape shape, double value) { return Tensor::filled(std::move(shape), value, true); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

}  // namespace

RewardModel::RewardModel(const RewardModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.embed_dim);
  const auto s = static_cast<std::size_t>(config_.state_dim);
  const auto a = static_cast<std::size_t>(config_.action_dim);
  const auto m = static_cast<std::size_t>(config_.max_window);
  Initializer init(seed, config_.init_std);

  state_embed_w_ = init.normal({s, d});
  state_embed_b_ = Initializer::constant({d}, 0.0);
  action_embed_w_ = init.normal({a, d});
  action_embed_b_ = Initializer::constant({d}, 0.0);
  position_embed_ = init.normal({m, d});
  for (int l = 0; l < config_.num_causal_layers; ++l) {
    Block b;
    b.ln1_gain = Initializer::constant({d}, 1.0);
    b.ln1_bias = Initializer::constant({d}, 0.0);
    b.attn_qkv_w = init.normal({d, 3 * d});
    b.attn_qkv_b = Initializer::constant({3 * d}, 0.0);
    b.attn_proj_w = init.normal({d, d});
    b.attn_proj_b = Initializer::constant({d}, 0.0);
    b.ln2_gain = Initializer::constant({d}, 1.0);
    b.ln2_bias = Initializer::constant({d}, 0.0);
    b.mlp_fc_w = init.normal({d, 4 * d});
    b.mlp_fc_b = Initializer::constant({4 * d}, 0.0);
    b.mlp_proj_w = init.normal({4 * d, d});
    b.mlp_proj_b = Initializer::constant({d}, 0.0);
    blocks_.push_back(std::move(b));
  }
  final_ln_gain_ = Initializer::constant({d}, 1.0);
  final_ln_bias_ = Initializer::constant({d}, 0.0);
  reward_w_ = init.normal({d, 1});
  reward_b_ = Initializer::constant({1}, 0.0);
  if (config_.zero_qk_init) {
    query_w_ = Initializer::constant({d, d}, 0.0);
    key_w_ = Initializer::constant({d, d}, 0.0);
  } else {
    query_w_ = init.normal({d, d});
    key_w_ = init.normal({d, d});
  }
  query_b_ = Initializer::constant({d}, 0.0);
  key_b_ = Initializer::constant({d}, 0.0);
}

std::vector<std::pair<std::string, Tensor>> RewardModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out{
      {"state_embed.w", state_embed_w_},   {"state_embed.b", state_embed_b_}, {"action_embed.w", action_embed_w_},
      {"action_embed.b", action_embed_b_}, {"position_embed", position_embed_},
  };
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const std::string p = "block" + std::to_string(l) + ".";
    out.emplace_back(p + "ln1.gain", b.ln1_gain);
    out.emplace_back(p + "ln1.bias", b.ln1_bias);
    out.emplace_back(p + "attn.qkv.w", b.attn_qkv_w);
    out.emplace_back(p + "attn.qkv.b", b.attn_qkv_b);
    out.emplace_back(p + "attn.proj.w", b.attn_proj_w);
    out.emplace_back(p + "attn.proj.b", b.attn_proj_b);
    out.emplace_back(p + "ln2.gain", b.ln2_gain);
    out.emplace_back(p + "ln2.bias", b.ln2_bias);
    out.emplace_back(p + "mlp.fc.w", b.mlp_fc_w);
    out.emplace_back(p + "mlp.fc.b", b.mlp_fc_b);
    out.emplace_back(p + "mlp.proj.w", b.mlp_proj_w);
    out.emplace_back(p + "mlp.proj.b", b.mlp_proj_b);
  }
  out.emplace_back("final_ln.gain", final_ln_gain_);
  out.emplace_back("final_ln.bias", final_ln_bias_);
  out.emplace_back("reward_head.w", reward_w_);
  out.emplace_back("reward_head.b", reward_b_);
  out.emplace_back("query.w", query_w_);
  out.emplace_back("query.b", query_b_);
  out.emplace_back("key.w", key_w_);
  out.emplace_back("key.b", key_b_);
  return out;
}

std::vector<Tensor> RewardModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t RewardModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.numel();
  return n;
}

void RewardModel::zero_grad() {
  for (auto& t : parameters()) t.zero_grad();
}

namespace {

Tensor deep_copy(const Tensor& t) {
  return Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), t.requires_grad());
}

}  // namespace

RewardModel RewardModel::clone() const {
  RewardModel copy = *this;
  for (Tensor* t : {&copy.state_embed_w_, &copy.state_embed_b_, &copy.action_embed_w_, &copy.action_embed_b_,
                    &copy.position_embed_, &copy.final_ln_gain_, &copy.final_ln_bias_, &copy.reward_w_,
                    &copy.reward_b_, &copy.query_w_, &copy.query_b_, &copy.key_w_, &copy.key_b_}) {
    *t = deep_copy(*t);
  }
  for (auto& b : copy.blocks_) {
    for (Tensor* t : {&b.ln1_gain, &b.ln1_bias, &b.attn_qkv_w, &b.attn_qkv_b, &b.attn_proj_w, &b.attn_proj_b,
                      &b.ln2_gain, &b.ln2_bias, &b.mlp_fc_w, &b.mlp_fc_b, &b.mlp_proj_w, &b.mlp_proj_b}) {
      *t = deep_copy(*t);
    }
  }
  return copy;
}

void RewardModel::scale_reward_head(double factor) {
  for (double& v : reward_w_.mutable_data()) v *= factor;
  for (double& v : reward_b_.mutable_data()) v *= factor;
  mark_updated();
}

SequenceOutput encode(const RewardModel& model, const Window& window, const EncodeOptions& options) {
  return encode_batch(model, std::span<const Window>(&window, 1), options);
}

SequenceOutput encode_batch(const RewardModel& model, std::span<const Window> windows, const EncodeOptions& options) {
  const auto& cfg = model.config_;
  if (windows.empty()) throw ContractError("encode: no windows");
  const auto sd = static_cast<std::size_t>(cfg.state_dim);
  const auto adim = static_cast<std::size_t>(cfg.action_dim);
  std::size_t total = 0;
  for (const auto& window : windows) {
    const std::size_t len = window.length;
    if (len < 1 || len > static_cast<std::size_t>(cfg.max_window)) {
      throw ContractError("encode: window length " + std::to_string(len) + " outside [1, " +
                          std::to_string(cfg.max_window) + "]");
    }
    if (window.states.size() != len * sd || window.actions.size() != len * adim) {
      throw ContractError("encode: window features do not match state_dim " + std::to_string(sd) +
                          " / action_dim " + std::to_string(adim));
    }
    total += len;
  }
  const double rate = cfg.dropout;
  const bool train = options.train;
  auto* rng = options.rng;

  std::vector<double> state_rows, action_rows;
  std::vector<std::size_t> positions, token_blocks;
  state_rows.reserve(total * sd);
  action_rows.reserve(total * adim);
  positions.reserve(total);
  for (const auto& window : windows) {
    state_rows.insert(state_rows.end(), window.states.begin(), window.states.end());
    action_rows.insert(action_rows.end(), window.actions.begin(), window.actions.end());
    for (std::size_t t = 0; t < window.length; ++t) positions.push_back(t);
    token_blocks.push_back(2 * window.length);
  }

  Tensor states = Tensor::from({total, sd}, std::move(state_rows));
  Tensor actions = Tensor::from({total, adim}, std::move(action_rows));
  Tensor pos = ops::gather_rows(model.position_embed_, positions);
  Tensor state_tok = ops::add(ops::add_bias(ops::matmul(states, model.state_embed_w_), model.state_embed_b_), pos);
  Tensor action_tok = ops::add(ops::add_bias(ops::matmul(actions, model.action_embed_w_), model.action_embed_b_), pos);
  Tensor h = ops::dropout(ops::interleave_rows(state_tok, action_tok), rate, train, rng);

  const auto heads = static_cast<std::size_t>(cfg.num_heads);
  for (const auto& b : model.blocks_) {
    Tensor a = ops::layer_norm(h, b.ln1_gain, b.ln1_bias);
    Tensor qkv = ops::add_bias(ops::matmul(a, b.attn_qkv_w), b.attn_qkv_b);
    Tensor att = ops::block_causal_attention(qkv, token_blocks, heads, rate, train, rng);
    Tensor y = ops::add_bias(ops::matmul(att, b.attn_proj_w), b.attn_proj_b);
    h = ops::add(h, ops::dropout(y, rate, train, rng));
    Tensor m = ops::layer_norm(h, b.ln2_gain, b.ln2_bias);
    m = ops::gelu(ops::add_bias(ops::matmul(m, b.mlp_fc_w), b.mlp_fc_b));
    m = ops::add_bias(ops::matmul(m, b.mlp_proj_w), b.mlp_proj_b);
    h = ops::add(h, ops::dropout(m, rate, train, rng));
  }
  h = ops::layer_norm(h, model.final_ln_gain_, model.final_ln_bias_);

  std::vector<std::size_t> pair_rows(total);
  for (std::size_t t = 0; t < total; ++t) pair_rows[t] = 2 * t + 1;
  SequenceOutput out;
  out.embeddings = ops::gather_rows(h, pair_rows);
  out.rewards = ops::add_bias(ops::matmul(out.embeddings, model.reward_w_), model.reward_b_);
  out.queries = ops::add_bias(ops::matmul(out.embeddings, model.query_w_), model.query_b_);
  out.keys = ops::add_bias(ops::matmul(out.embeddings, model.key_w_), model.key_b_);
  return out;
}

CompositePrediction composite_predict(const SequenceOutput& output, std::size_t begin, std::size_t end) {
  if (begin >= end) throw ContractError("composite_predict: empty segment range");
  if (end > output.length()) {
    throw ContractError("composite_predict: segment end " + std::to_string(end) + " beyond encoded window of " +
                        std::to_string(output.length()));
  }
  const std::size_t n = end - begin;
  const double d = static_cast<double>(output.queries.dim(1));
  Tensor q = ops::slice_rows(output.queries, begin, end);
  Tensor k = ops::slice_rows(output.keys, begin, end);
  Tensor r = ops::slice_rows(output.rewards, begin, end);
  Tensor logits = ops::scale(ops::matmul(q, ops::transpose(k)), 1.0 / std::sqrt(d));
  Tensor attention = ops::softmax(logits, 1);

  CompositePrediction pred;
  pred.value = ops::sum(ops::matmul(attention, r));
  pred.attention.assign(attention.data().begin(), attention.data().end());
  // Column sums are taken from the logits in extended precision, which makes
  // uniform attention report weights of exactly 1.
  std::vector<long double> w(n, 0.0L), e(n);
  const auto l = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double top = *std::max_element(l.begin() + static_cast<std::ptrdiff_t>(i * n),
                                         l.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    long double z = 0.0L;
    for (std::size_t t = 0; t < n; ++t) z += e[t] = std::exp(static_cast<long double>(l[i * n + t]) - top);
    for (std::size_t t = 0; t < n; ++t) w[t] += e[t] / z;
  }
  pred.weights.assign(w.begin(), w.end());
  return pred;
}

namespace {

double attention_output(const SequenceOutput& out, std::size_t begin, std::size_t last, RelabelOutput kind) {
  const double r_hat = out.rewards.data()[last];
  if (kind == RelabelOutput::InstanceReward) return r_hat;
  const auto pred = composite_predict(out, begin, last + 1);
  return pred.weights.back() * r_hat;
}

}  // namespace

double relabel_last(const RewardModel& model, const Window& window, RelabelOutput output) {
  ad::NoGradGuard no_grad;
  const auto out = encode(model, window);
  return attention_output(out, 0, window.length - 1, output);
}

std::vector<double> relabel_last_batch(const RewardModel& model, std::span<const Window> windows,
                                       RelabelOutput output) {
  ad::NoGradGuard no_grad;
  const auto out = encode_batch(model, windows);
  std::vector<double> values;
  values.reserve(windows.size());
  std::size_t offset = 0;
  for (const auto& w : windows) {
    values.push_back(attention_output(out, offset, offset + w.length - 1, output));
    offset += w.length;
  }
  return values;
}

std::vector<double> relabel(const RewardModel& model, const Window& trajectory, std::size_t horizon,
                            RelabelOutput output) {
  if (trajectory.length == 0) throw ContractError("relabel: empty trajectory");
  if (horizon < 1 || horizon > static_cast<std::size_t>(model.config().max_window)) {
    throw ContractError("relabel: horizon " + std::to_string(horizon) + " outside [1, max_window]");
  }
  ad::NoGradGuard no_grad;
  const int sd = model.config().state_dim;
  const int adim = model.config().action_dim;
  std::vector<double> rewards(trajectory.length);

  // Every window that starts at step 0 is a prefix of the first one, and the
  // causal encoder gives prefixes identical outputs, so one pass covers them.
  const std::size_t prefix = std::min(trajectory.length, horizon);
  const auto head = encode(model, trajectory.slice(0, prefix, sd, adim));
  for (std::size_t t = 0; t < prefix; ++t) rewards[t] = attention_output(head, 0, t, output);

  if (prefix == trajectory.length) return rewards;
  std::vector<Window> windows;
  windows.reserve(trajectory.length - prefix);
  for (std::size_t t = prefix; t < trajectory.length; ++t) {
    windows.push_back(trajectory.slice(t + 1 - horizon, t + 1, sd, adim));
  }
  const auto tail = relabel_last_batch(model, windows, output);
  std::copy(tail.begin(), tail.end(), rewards.begin() + static_cast<std::ptrdiff_t>(prefix));
  return rewards;
}

}  // namespace codetr::model
