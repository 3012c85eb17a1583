#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "codetr/autodiff/tensor.hpp"

namespace codetr::ad {

// 2-D matrix product, [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// [m x n] + bias broadcast over rows; bias has n elements.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// tanh approximation, as in GPT-2.
Tensor gelu(const Tensor& x);

// Numerically stable softmax along `axis`. Rejects non-finite input.
Tensor softmax(const Tensor& x, std::size_t axis);

// Row-wise softmax of a square [m x m] logit matrix restricted to the lower
// triangle (column j <= row i); masked entries are exactly zero.
Tensor causal_softmax(const Tensor& x);

// Per-row standardisation over the last dimension of [m x d] followed by
// gain * xhat + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);
// Rows of the result alternate a[0], b[0], a[1], b[1], ...
Tensor interleave_rows(const Tensor& a, const Tensor& b);
// Picks rows by index; repeated indices accumulate in backward.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

// Inverted dropout. Identity when !train or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool train, std::mt19937_64* rng);

// Multi-head causal self-attention over a packed [N x 3d] matrix holding
// queries, keys and values side by side. Rows form consecutive blocks of the
// given lengths and never attend across blocks. Each head h of width d/heads
// computes softmax(q k^T / sqrt(d/heads)) v on the causal triangle; the result
// is [N x d] with heads in column order. Dropout, when active, applies to the
// attention probabilities.
Tensor block_causal_attention(const Tensor& qkv, std::span<const std::size_t> block_lengths, std::size_t heads,
                              double dropout_rate = 0.0, bool train = false, std::mt19937_64* rng = nullptr);

}  // namespace codetr::ad
