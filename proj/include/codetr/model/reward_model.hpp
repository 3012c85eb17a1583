#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "codetr/autodiff/tensor.hpp"

namespace codetr::model {

using ad::Tensor;

struct RewardModelConfig {
  int num_causal_layers = 2;
  int num_inseq_layers = 1;  // only a single in-sequence attention layer is supported
  int num_heads = 2;
  int embed_dim = 32;
  int max_window = 64;
  double dropout = 0.0;
  int state_dim = 1;
  int action_dim = 1;
  double init_std = 0.02;
  // Starts the in-sequence query/key projections at zero, which makes every
  // importance weight exactly 1 until training moves them.
  bool zero_qk_init = false;

  // Throws ConfigError when an invariant is violated.
  void validate() const;

  // Table 1 architecture of the original model, at the given input sizes.
  static RewardModelConfig paper_scale(int state_dim, int action_dim);

  bool operator==(const RewardModelConfig&) const = default;
};

// Window of consecutive state-action pairs as dense feature rows.
struct Window {
  std::size_t length = 0;
  std::vector<double> states;   // length x state_dim, row-major
  std::vector<double> actions;  // length x action_dim, row-major

  static Window one_hot(std::span<const int> states, std::span<const int> actions, int num_states,
                        int num_actions);
  Window slice(std::size_t begin, std::size_t end, int state_dim, int action_dim) const;
};

struct SequenceOutput {
  Tensor embeddings;  // [T x d], read at action-token positions
  Tensor rewards;     // [T x 1]
  Tensor queries;     // [T x d]
  Tensor keys;        // [T x d]
  std::size_t length() const { return rewards.defined() ? rewards.dim(0) : 0; }
};

struct CompositePrediction {
  Tensor value;                 // scalar predicted composite reward
  std::vector<double> weights;  // importance weight per step of the segment
  std::vector<double> attention;  // n x n row-stochastic matrix
};

// Which attention-layer output becomes the relabeled reward.
enum class RelabelOutput { WeightedReward, InstanceReward };

struct EncodeOptions {
  bool train = false;
  std::mt19937_64* rng = nullptr;  // needed only when train && dropout > 0
};

class RewardModel {
 public:
  RewardModel(const RewardModelConfig& config, std::uint64_t seed);

  const RewardModelConfig& config() const { return config_; }

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::size_t parameter_count() const;

  // Incremented by optimisers whenever parameters change; used to invalidate
  // cached relabels.
  std::uint64_t version() const { return version_; }
  void mark_updated() { ++version_; }
  void restore_version(std::uint64_t version) { version_ = version; }

  void zero_grad();

  // Copies share parameter storage; clone() does not.
  RewardModel clone() const;
  // Multiplies the instance-reward head, and so every r_hat, by `factor`.
  void scale_reward_head(double factor);

 private:
  struct Block {
    Tensor ln1_gain, ln1_bias;
    Tensor attn_qkv_w, attn_qkv_b;
    Tensor attn_proj_w, attn_proj_b;
    Tensor ln2_gain, ln2_bias;
    Tensor mlp_fc_w, mlp_fc_b;
    Tensor mlp_proj_w, mlp_proj_b;
  };

  friend SequenceOutput encode_batch(const RewardModel&, std::span<const Window>, const EncodeOptions&);

  RewardModelConfig config_;
  Tensor state_embed_w_, state_embed_b_;
  Tensor action_embed_w_, action_embed_b_;
  Tensor position_embed_;
  std::vector<Block> blocks_;
  Tensor final_ln_gain_, final_ln_bias_;
  Tensor reward_w_, reward_b_;
  Tensor query_w_, query_b_;
  Tensor key_w_, key_b_;
  std::uint64_t version_ = 0;
};

// Causal transformer pass. Each pair becomes a state token followed by an
// action token sharing the pair's positional embedding; outputs are read at
// action tokens.
SequenceOutput encode(const RewardModel& model, const Window& window, const EncodeOptions& options = {});

// Encodes independent windows in one pass. Their outputs are stacked in order:
// window b occupies the rows starting at the total length of windows before it.
// Row values match encode() on each window alone.
SequenceOutput encode_batch(const RewardModel& model, std::span<const Window> windows,
                            const EncodeOptions& options = {});

// In-sequence attention over rows [begin, end) of an encoded window:
//   A = softmax_rows(Q K^T / sqrt(d)),  R = sum_i sum_t A[i][t] * r_t,  w_t = sum_i A[i][t].
CompositePrediction composite_predict(const SequenceOutput& output, std::size_t begin, std::size_t end);

// Per-step rewards for a trajectory. Step t is scored from the window of the
// last min(t + 1, horizon) pairs ending at t, as the attention output at t.
std::vector<double> relabel(const RewardModel& model, const Window& trajectory, std::size_t horizon,
                            RelabelOutput output = RelabelOutput::WeightedReward);

// Relabeled reward of the final step of `window` alone.
double relabel_last(const RewardModel& model, const Window& window,
                    RelabelOutput output = RelabelOutput::WeightedReward);
// relabel_last of each window, encoded as one batch.
std::vector<double> relabel_last_batch(const RewardModel& model, std::span<const Window> windows,
                                       RelabelOutput output = RelabelOutput::WeightedReward);

}  // namespace codetr::model
