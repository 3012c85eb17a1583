#include "codetr/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "codetr/error.hpp"

namespace codetr::ad {

namespace {

using detail::Node;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + to_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }

// out[m x n] += a[m x k] * b[k x n], row by row as axpy updates so the inner
// loop vectorises. Zero entries of `a` are skipped.
__attribute__((target_clones("arch=haswell", "default")))
void gemm_nn(const double* __restrict a, const double* __restrict b, double* __restrict out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;  // masked attention and one-hot inputs
      const double* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[k x n] += a^T * g for a[m x k], g[m x n], as out[p][:] += a[i][p] * g[i][:].
__attribute__((target_clones("arch=haswell", "default")))
void gemm_tn(const double* __restrict a, const double* __restrict g, double* __restrict out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* __restrict grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* __restrict orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    const double* g = self.grad.data();
    if (na.requires_grad) {
      // dA = dC * B^T, using a transposed copy of B so the update is an axpy.
      std::vector<double> bt(n * k);
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = nb.value[p * n + j];
      }
      gemm_nn(g, bt.data(), na.grad.data(), m, n, k);
    }
    if (nb.requires_grad) {
      // dB = A^T * dC
      gemm_tn(na.value.data(), g, nb.grad.data(), m, k, n);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto v = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    Node& na = input(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) na.grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& in = input(self, k);
      if (!in.requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    if (na.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i];
    if (nb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    // na and nb may be the same node; both contributions are added.
    if (na.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i] * nb.value[i];
    if (nb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] += self.grad[i] * na.value[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.numel() != n) {
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not match " + to_string(x.shape()));
  }
  std::vector<double> out(m * n);
  auto xv = x.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [m, n](Node& self) {
    Node& nx = input(self, 0);
    Node& nb = input(self, 1);
    if (nx.requires_grad)
      for (std::size_t i = 0; i < m * n; ++i) nx.grad[i] += self.grad[i];
    if (nb.requires_grad)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) nb.grad[j] += self.grad[i * n + j];
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [factor](Node& self) {
    Node& nx = input(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i] * factor;
  });
}

Tensor add_scalar(const Tensor& x, double offset) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + offset;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& nx = input(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return Tensor::make_result({1}, {acc}, {x}, [](Node& self) {
    Node& nx = input(self, 0);
    for (double& g : nx.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  std::vector<double> out(x.numel());
  std::vector<double> th(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xv[i];
    th[i] = std::tanh(c * (v + k * v * v * v));
    out[i] = 0.5 * v * (1.0 + th[i]);
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [th = std::move(th)](Node& self) {
    Node& nx = input(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = nx.value[i];
      const double t = th[i];
      const double du = c * (1.0 + 3.0 * k * v * v);
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      nx.grad[i] += self.grad[i] * d;
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) throw ShapeError("softmax: axis out of range for " + to_string(shape));
  require_finite(x.data(), "softmax");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  std::vector<double> out(x.numel());
  auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  return Tensor::make_result(shape, std::move(out), {x}, [outer, inner, n](Node& self) {
    Node& nx = input(self, 0);
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          nx.grad[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor causal_softmax(const Tensor& x) {
  require_matrix(x, "causal_softmax");
  const std::size_t m = x.dim(0);
  if (x.dim(1) != m) throw ShapeError("causal_softmax: expected a square matrix, got " + to_string(x.shape()));
  require_finite(x.data(), "causal_softmax");
  std::vector<double> out(m * m, 0.0);
  auto xv = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * m;
    double mx = row[0];
    for (std::size_t j = 1; j <= i; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      out[i * m + j] = std::exp(row[j] - mx);
      z += out[i * m + j];
    }
    for (std::size_t j = 0; j <= i; ++j) out[i * m + j] /= z;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [m](Node& self) {
    Node& nx = input(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j <= i; ++j) dot += self.grad[i * m + j] * self.value[i * m + j];
      for (std::size_t j = 0; j <= i; ++j) {
        const std::size_t idx = i * m + j;
        nx.grad[idx] += self.value[idx] * (self.grad[idx] - dot);
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.dim(0), d = x.dim(1);
  if (d < 2) throw ShapeError("layer_norm: feature dimension must be >= 2, got " + to_string(x.shape()));
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain/bias " + to_string(gain.shape()) + "/" + to_string(bias.shape()) +
                     " do not match " + to_string(x.shape()));
  }
  std::vector<double> out(m * d);
  std::vector<double> xhat(m * d);
  std::vector<double> inv_std(m);
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * inv_std[i];
      out[i * d + j] = gv[j] * xhat[i * d + j] + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& nx = input(self, 0);
        Node& ng = input(self, 1);
        Node& nb = input(self, 2);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < m; ++i) {
          const double* g = self.grad.data() + i * d;
          const double* xh = xhat.data() + i * d;
          if (ng.requires_grad)
            for (std::size_t j = 0; j < d; ++j) ng.grad[j] += g[j] * xh[j];
          if (nb.requires_grad)
            for (std::size_t j = 0; j < d; ++j) nb.grad[j] += g[j];
          if (nx.requires_grad) {
            double mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dxh = g[j] * ng.value[j];
              mean_dxh += dxh;
              mean_dxh_xh += dxh * xh[j];
            }
            mean_dxh *= inv_d;
            mean_dxh_xh *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double dxh = g[j] * ng.value[j];
              nx.grad[i * d + j] += inv_std[i] * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
            }
          }
        }
      });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > m) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     to_string(x.shape()));
  }
  auto xv = x.data();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * n),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * n));
  return Tensor::make_result({end - begin, n}, std::move(out), {x}, [begin, n](Node& self) {
    Node& nx = input(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[begin * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > n) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  auto xv = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * n + begin + j];
  return Tensor::make_result({m, w}, std::move(out), {x}, [m, n, w, begin](Node& self) {
    Node& nx = input(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) nx.grad[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.dim(0) != m) throw ShapeError("concat_cols: row mismatch " + to_string(p.shape()));
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = pv[i * widths[k] + j];
    offset += widths[k];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make_result({m, total}, std::move(out), std::move(inputs), [m, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& in = input(self, k);
      if (in.requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) in.grad[i * widths[k] + j] += self.grad[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor interleave_rows(const Tensor& a, const Tensor& b) {
  require_matrix(a, "interleave_rows");
  require_same_shape(a, b, "interleave_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(2 * m * n);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(av.data() + i * n, n, out.data() + (2 * i) * n);
    std::copy_n(bv.data() + i * n, n, out.data() + (2 * i + 1) * n);
  }
  return Tensor::make_result({2 * m, n}, std::move(out), {a, b}, [m, n](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& in = input(self, k);
      if (!in.requires_grad) continue;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) in.grad[i * n + j] += self.grad[(2 * i + k) * n + j];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  if (rows.empty()) throw ContractError("gather_rows: empty index list");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(rows.size() * n);
  auto xv = x.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of " + to_string(x.shape()));
    std::copy_n(xv.data() + rows[r] * n, n, out.data() + r * n);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::make_result({rows.size(), n}, std::move(out), {x}, [n, idx = std::move(idx)](Node& self) {
    Node& nx = input(self, 0);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) nx.grad[idx[r] * n + j] += self.grad[r * n + j];
  });
}

Tensor dropout(const Tensor& x, double rate, bool train, std::mt19937_64* rng) {
  if (!train || rate <= 0.0) return x;
  if (rate >= 1.0) throw ContractError("dropout: rate must be < 1");
  if (rng == nullptr) throw ContractError("dropout: training mode needs a random generator");
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = keep(*rng) ? factor : 0.0;
    out[i] = x.data()[i] * mask[i];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    Node& nx = input(self, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) nx.grad[i] += self.grad[i] * mask[i];
  });
}

Tensor block_causal_attention(const Tensor& qkv, std::span<const std::size_t> block_lengths, std::size_t heads,
                              double dropout_rate, bool train, std::mt19937_64* rng) {
  require_matrix(qkv, "block_causal_attention");
  const std::size_t rows = qkv.dim(0);
  if (heads == 0 || qkv.dim(1) % (3 * heads) != 0) {
    throw ShapeError("block_causal_attention: " + to_string(qkv.shape()) + " is not [N x 3d] with d divisible by " +
                     std::to_string(heads) + " heads");
  }
  std::size_t total = 0;
  for (std::size_t len : block_lengths) {
    if (len == 0) throw ContractError("block_causal_attention: empty block");
    total += len;
  }
  if (total != rows) {
    throw ShapeError("block_causal_attention: block lengths cover " + std::to_string(total) + " of " +
                     std::to_string(rows) + " rows");
  }
  const bool drop = train && dropout_rate > 0.0;
  if (drop && dropout_rate >= 1.0) throw ContractError("block_causal_attention: dropout rate must be < 1");
  if (drop && rng == nullptr) throw ContractError("block_causal_attention: training mode needs a random generator");
  require_finite(qkv.data(), "block_causal_attention");

  const std::size_t width = qkv.dim(1), d = width / 3, hd = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(hd));
  const double keep_factor = drop ? 1.0 / (1.0 - dropout_rate) : 1.0;
  std::bernoulli_distribution keep(drop ? 1.0 - dropout_rate : 1.0);

  // Probabilities (and dropout multipliers) of each causal row, stored
  // contiguously per (block, head, row) for the backward pass.
  std::size_t probs_size = 0;
  for (std::size_t len : block_lengths) probs_size += heads * len * (len + 1) / 2;
  std::vector<double> probs(probs_size), masks(drop ? probs_size : 0);

  auto x = qkv.data();
  std::vector<double> out(rows * d, 0.0);
  std::size_t base = 0, pos = 0;
  for (std::size_t len : block_lengths) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
      for (std::size_t i = 0; i < len; ++i) {
        const double* q = x.data() + (base + i) * width + qo;
        double* p = probs.data() + pos;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          const double* k = x.data() + (base + j) * width + ko;
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) s += q[c] * k[c];
          p[j] = s * scale_factor;
          mx = std::max(mx, p[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          p[j] = std::exp(p[j] - mx);
          z += p[j];
        }
        double* o = out.data() + (base + i) * d + qo;
        for (std::size_t j = 0; j <= i; ++j) {
          p[j] /= z;
          double a = p[j];
          if (drop) {
            masks[pos + j] = keep(*rng) ? keep_factor : 0.0;
            a *= masks[pos + j];
          }
          if (a == 0.0) continue;
          const double* v = x.data() + (base + j) * width + vo;
          for (std::size_t c = 0; c < hd; ++c) o[c] += a * v[c];
        }
        pos += i + 1;
      }
    }
    base += len;
  }

  std::vector<std::size_t> lengths(block_lengths.begin(), block_lengths.end());
  return Tensor::make_result(
      {rows, d}, std::move(out), {qkv},
      [lengths = std::move(lengths), probs = std::move(probs), masks = std::move(masks), heads, width, d, hd,
       scale_factor](Node& self) {
        Node& nx = input(self, 0);
        const double* xv = nx.value.data();
        double* gx = nx.grad.data();
        const bool dropped = !masks.empty();
        std::vector<double> ds;
        std::size_t base = 0, pos = 0;
        for (std::size_t len : lengths) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
            for (std::size_t i = 0; i < len; ++i) {
              const double* go = self.grad.data() + (base + i) * d + qo;
              const double* p = probs.data() + pos;
              ds.assign(i + 1, 0.0);
              double dot = 0.0;
              for (std::size_t j = 0; j <= i; ++j) {
                const double m = dropped ? masks[pos + j] : 1.0;
                const double* v = xv + (base + j) * width + vo;
                double* gv = gx + (base + j) * width + vo;
                double dp = 0.0;
                for (std::size_t c = 0; c < hd; ++c) {
                  dp += go[c] * v[c];
                  gv[c] += p[j] * m * go[c];
                }
                ds[j] = dp * m;
                dot += ds[j] * p[j];
              }
              const double* q = xv + (base + i) * width + qo;
              double* gq = gx + (base + i) * width + qo;
              for (std::size_t j = 0; j <= i; ++j) {
                const double g = p[j] * (ds[j] - dot) * scale_factor;
                if (g == 0.0) continue;
                const double* k = xv + (base + j) * width + ko;
                double* gk = gx + (base + j) * width + ko;
                for (std::size_t c = 0; c < hd; ++c) {
                  gq[c] += g * k[c];
                  gk[c] += g * q[c];
                }
              }
              pos += i + 1;
            }
          }
          base += len;
        }
      });
}

}  // namespace codetr::ad
