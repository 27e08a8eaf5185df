// Copyright 2026 The pvkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pvkit/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "pvkit/common/counters.hpp"
#include "pvkit/common/errors.hpp"

namespace pvkit::ad {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

template <typename T>
using NodeT = detail::Node<T>;

void require_rank(const char* op, const Shape& shape, std::size_t rank) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + to_string(shape));
  }
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " +
                         to_string(b));
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  MutMap<T>(out.data(), m, n).noalias() =
      ConstMap<T>(a.data().data(), m, k) * ConstMap<T>(b.data().data(), k, n);
  MacCounter::add(m * k * n);
  return make_result<T>("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](NodeT<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    ConstMap<T> g(self.grad.data(), m, n);
    if (pa.requires_grad) {
      MutMap<T>(pa.ensure_grad().data(), m, k).noalias() +=
          g * ConstMap<T>(pb.value.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MutMap<T>(pb.ensure_grad().data(), k, n).noalias() +=
          ConstMap<T>(pa.value.data(), m, k).transpose() * g;
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return make_result<T>("scale", x.shape(), std::move(out), {x}, [factor](NodeT<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank("add_row_bias", x.shape(), 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (bias.numel() != c) {
    throw DimensionError("add_row_bias: bias " + to_string(bias.shape()) + " vs input " +
                         to_string(x.shape()));
  }
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = x.data()[r * c + j] + bias.data()[j];
  return make_result<T>("add_row_bias", x.shape(), std::move(out), {x, bias},
                        [n, c](NodeT<T>& self) {
                          auto& px = *self.parents[0];
                          auto& pb = *self.parents[1];
                          if (px.requires_grad) {
                            auto& g = px.ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                          }
                          if (pb.requires_grad) {
                            auto& g = pb.ensure_grad();
                            for (std::size_t r = 0; r < n; ++r)
                              for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[r * c + j];
                          }
                        });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    out[i] = v >= T{0} ? v : slope * v;
  }
  return make_result<T>("leaky_relu", x.shape(), std::move(out), {x}, [slope](NodeT<T>& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += p.value[i] >= T{0} ? self.grad[i] : slope * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.data()[i]);
  return make_result<T>("exp", x.shape(), std::move(out), {x}, [](NodeT<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + to_string(x.shape()) + " to " + to_string(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {x}, [](NodeT<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total{0};
  for (T v : x.data()) total += v;
  return make_result<T>("sum", {1}, {total}, {x}, [](NodeT<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights) {
  if (weights.size() != x.numel()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) +
                         " weights for tensor " + to_string(x.shape()));
  }
  T total{0};
  for (std::size_t i = 0; i < weights.size(); ++i) total += x.data()[i] * weights[i];
  std::vector<T> w(weights.begin(), weights.end());
  return make_result<T>("weighted_sum", {1}, {total}, {x},
                        [w = std::move(w)](NodeT<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * w[i];
                        });
}

namespace {

// Calls fn(dst_offset, src_offset, run) for every contiguous innermost run
// of the leading block `shape` inside a tensor of shape `full`.
template <typename Fn>
void for_each_prefix_run(const Shape& full, const Shape& shape, Fn&& fn) {
  const std::size_t rank = full.size();
  const std::size_t run = shape[rank - 1];
  std::size_t rows = 1;
  for (std::size_t d = 0; d + 1 < rank; ++d) rows *= shape[d];
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    // Decompose r over shape[0..rank-2].
    std::size_t rem = r;
    for (std::size_t d = rank - 1; d-- > 0;) {
      idx[d] = rem % shape[d];
      rem /= shape[d];
    }
    std::size_t src = 0;
    for (std::size_t d = 0; d + 1 < rank; ++d) src = src * full[d] + idx[d];
    src *= full[rank - 1];
    fn(r * run, src, run);
  }
}

}  // namespace

template <typename T>
Tensor<T> slice_prefix(const Tensor<T>& x, const Shape& shape) {
  if (shape.size() != x.rank()) {
    throw DimensionError("slice_prefix: rank mismatch " + to_string(x.shape()) + " vs " +
                         to_string(shape));
  }
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (shape[d] == 0 || shape[d] > x.dim(d)) {
      throw DimensionError("slice_prefix: " + to_string(shape) + " is not a prefix of " +
                           to_string(x.shape()));
    }
  }
  std::vector<T> out(numel(shape));
  const Shape full = x.shape();
  for_each_prefix_run(full, shape, [&](std::size_t dst, std::size_t src, std::size_t run) {
    std::copy_n(x.data().begin() + src, run, out.begin() + dst);
  });
  return make_result<T>("slice_prefix", shape, std::move(out), {x},
                        [full, shape](NodeT<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for_each_prefix_run(full, shape, [&](std::size_t dst, std::size_t src,
                                                               std::size_t run) {
                            for (std::size_t i = 0; i < run; ++i) g[src + i] += self.grad[dst + i];
                          });
                        });
}

template <typename T>
Tensor<T> max_over_rows(const Tensor<T>& x) {
  require_rank("max_over_rows", x.shape(), 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<T> out(c, -std::numeric_limits<T>::infinity());
  auto arg = std::make_shared<std::vector<std::size_t>>(c, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const T v = x.data()[r * c + j];
      if (v > out[j]) {
        out[j] = v;
        (*arg)[j] = r;
      }
    }
  }
  return make_result<T>("max_over_rows", {1, c}, std::move(out), {x}, [arg, c](NodeT<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t j = 0; j < c; ++j) g[(*arg)[j] * c + j] += self.grad[j];
  });
}

template <typename T>
Tensor<T> concat_broadcast(const Tensor<T>& x, const Tensor<T>& g) {
  require_rank("concat_broadcast", x.shape(), 2);
  require_rank("concat_broadcast", g.shape(), 2);
  if (g.dim(0) != 1) {
    throw DimensionError("concat_broadcast: second operand must have one row, got " +
                         to_string(g.shape()));
  }
  const std::size_t n = x.dim(0), a = x.dim(1), b = g.dim(1), w = a + b;
  std::vector<T> out(n * w);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(x.data().begin() + r * a, a, out.begin() + r * w);
    std::copy_n(g.data().begin(), b, out.begin() + r * w + a);
  }
  return make_result<T>("concat_broadcast", {n, w}, std::move(out), {x, g},
                        [n, a, b, w](NodeT<T>& self) {
                          auto& px = *self.parents[0];
                          auto& pg = *self.parents[1];
                          if (px.requires_grad) {
                            auto& gx = px.ensure_grad();
                            for (std::size_t r = 0; r < n; ++r)
                              for (std::size_t j = 0; j < a; ++j) gx[r * a + j] += self.grad[r * w + j];
                          }
                          if (pg.requires_grad) {
                            auto& gg = pg.ensure_grad();
                            for (std::size_t r = 0; r < n; ++r)
                              for (std::size_t j = 0; j < b; ++j) gg[j] += self.grad[r * w + a + j];
                          }
                        });
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    std::span<T> running_mean, std::span<T> running_var, Mode mode,
                    std::size_t channel_axis, BatchNormOptions options) {
  if (channel_axis >= x.rank()) {
    throw DimensionError("batchnorm: channel axis " + std::to_string(channel_axis) +
                         " out of range for " + to_string(x.shape()));
  }
  const std::size_t c = x.dim(channel_axis);
  if (gamma.numel() != c || beta.numel() != c || running_mean.size() != c ||
      running_var.size() != c) {
    throw DimensionError("batchnorm: parameters do not match " + std::to_string(c) +
                         " channels of " + to_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < channel_axis; ++d) outer *= x.dim(d);
  for (std::size_t d = channel_axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  const std::size_t count = outer * inner;
  const bool train = mode == Mode::kTrain;
  if (train && count < 2) {
    throw ContractError("batchnorm: train mode needs at least 2 values per channel, got " +
                        std::to_string(count));
  }

  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(c);
  std::vector<T> out(x.numel());
  const auto in = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean, var;
    if (train) {
      double s = 0.0;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) s += in[(o * c + ch) * inner + i];
      mean = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = in[(o * c + ch) * inner + i] - mean;
          ss += d * d;
        }
      var = ss / static_cast<double>(count);
      const double m = options.momentum;
      running_mean[ch] = static_cast<T>((1.0 - m) * running_mean[ch] + m * mean);
      running_var[ch] = static_cast<T>((1.0 - m) * running_var[ch] +
                                       m * var * count / static_cast<double>(count - 1));
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    const double istd = 1.0 / std::sqrt(var + options.eps);
    (*inv_std)[ch] = static_cast<T>(istd);
    const double gm = gamma.data()[ch], bt = beta.data()[ch];
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = (o * c + ch) * inner + i;
        const double h = (in[k] - mean) * istd;
        (*xhat)[k] = static_cast<T>(h);
        out[k] = static_cast<T>(gm * h + bt);
      }
  }

  return make_result<T>(
      "batchnorm", x.shape(), std::move(out), {x, gamma, beta},
      [xhat, inv_std, outer, inner, c, count, train](NodeT<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const auto& g = self.grad;
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = (o * c + ch) * inner + i;
              sum_g += g[k];
              sum_gx += g[k] * (*xhat)[k];
            }
          if (pg.requires_grad) pg.ensure_grad()[ch] += static_cast<T>(sum_gx);
          if (pb.requires_grad) pb.ensure_grad()[ch] += static_cast<T>(sum_g);
          if (!px.requires_grad) continue;
          auto& gx = px.ensure_grad();
          const double gm = pg.value[ch];
          const double istd = (*inv_std)[ch];
          if (train) {
            // dxhat = g * gamma; dx = istd/n * (n*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
            const double n = static_cast<double>(count);
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = (o * c + ch) * inner + i;
                gx[k] += static_cast<T>(gm * istd / n *
                                        (n * g[k] - sum_g - (*xhat)[k] * sum_gx));
              }
          } else {
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = (o * c + ch) * inner + i;
                gx[k] += static_cast<T>(g[k] * gm * istd);
              }
          }
        }
      });
}

namespace {

// Flat input index (or -1 for padding) of every output site for one kernel
// offset of a dense 3D convolution.
struct DenseConvGeometry {
  std::size_t in_d, in_h, in_w, out_d, out_h, out_w, k;
  int stride, pad;
  std::size_t out_sites() const { return out_d * out_h * out_w; }
  std::size_t in_sites() const { return in_d * in_h * in_w; }

  void gather_indices(std::size_t offset, std::vector<std::int64_t>& idx) const {
    const int a = static_cast<int>(offset / (k * k));
    const int b = static_cast<int>((offset / k) % k);
    const int cc = static_cast<int>(offset % k);
    idx.resize(out_sites());
    std::size_t p = 0;
    for (std::size_t od = 0; od < out_d; ++od) {
      const long id = static_cast<long>(od) * stride + a - pad;
      for (std::size_t oh = 0; oh < out_h; ++oh) {
        const long ih = static_cast<long>(oh) * stride + b - pad;
        for (std::size_t ow = 0; ow < out_w; ++ow, ++p) {
          const long iw = static_cast<long>(ow) * stride + cc - pad;
          const bool inside = id >= 0 && ih >= 0 && iw >= 0 && id < static_cast<long>(in_d) &&
                              ih < static_cast<long>(in_h) && iw < static_cast<long>(in_w);
          idx[p] = inside ? (id * static_cast<long>(in_h) + ih) * static_cast<long>(in_w) + iw : -1;
        }
      }
    }
  }
};

}  // namespace

template <typename T>
Tensor<T> conv3d_dense(const Tensor<T>& input, const Tensor<T>& weight, int stride) {
  require_rank("conv3d_dense input", input.shape(), 4);
  require_rank("conv3d_dense weight", weight.shape(), 5);
  const std::size_t k = weight.dim(2);
  if (k % 2 == 0) {
    throw ContractError("conv3d_dense: unsupported even kernel size " + std::to_string(k));
  }
  if (weight.dim(3) != k || weight.dim(4) != k) {
    throw DimensionError("conv3d_dense: kernel must be cubic, got " + to_string(weight.shape()));
  }
  if (weight.dim(1) != input.dim(0)) {
    throw DimensionError("conv3d_dense: weight " + to_string(weight.shape()) +
                         " does not match input " + to_string(input.shape()));
  }
  if (stride < 1) throw ContractError("conv3d_dense: stride must be positive");
  const std::size_t cin = input.dim(0), cout = weight.dim(0), k3 = k * k * k;
  const std::size_t s = static_cast<std::size_t>(stride);
  DenseConvGeometry geo{input.dim(1), input.dim(2), input.dim(3),
                        (input.dim(1) - 1) / s + 1, (input.dim(2) - 1) / s + 1,
                        (input.dim(3) - 1) / s + 1, k, stride, static_cast<int>(k / 2)};
  const std::size_t p = geo.out_sites(), in_sites = geo.in_sites();

  std::vector<T> out(cout * p, T{0});
  MutMap<T> out_map(out.data(), cout, p);
  RowMat<T> gathered(cin, p);
  RowMat<T> wk(cout, cin);
  std::vector<std::int64_t> idx;
  const auto in = input.data();
  const auto w = weight.data();
  for (std::size_t off = 0; off < k3; ++off) {
    geo.gather_indices(off, idx);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* src = in.data() + ci * in_sites;
      for (std::size_t q = 0; q < p; ++q) gathered(ci, q) = idx[q] >= 0 ? src[idx[q]] : T{0};
    }
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t ci = 0; ci < cin; ++ci) wk(co, ci) = w[(co * cin + ci) * k3 + off];
    out_map.noalias() += wk * gathered;
  }
  MacCounter::add(cout * cin * p * k3);

  return make_result<T>(
      "conv3d_dense", {cout, geo.out_d, geo.out_h, geo.out_w}, std::move(out), {input, weight},
      [geo, cin, cout, k3, p, in_sites](NodeT<T>& self) {
        auto& pin = *self.parents[0];
        auto& pw = *self.parents[1];
        ConstMap<T> g(self.grad.data(), cout, p);
        RowMat<T> gathered(cin, p);
        RowMat<T> wk(cout, cin);
        std::vector<std::int64_t> idx;
        for (std::size_t off = 0; off < k3; ++off) {
          geo.gather_indices(off, idx);
          if (pw.requires_grad) {
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T* src = pin.value.data() + ci * in_sites;
              for (std::size_t q = 0; q < p; ++q) gathered(ci, q) = idx[q] >= 0 ? src[idx[q]] : T{0};
            }
            RowMat<T> gw = g * gathered.transpose();
            auto& gwv = pw.ensure_grad();
            for (std::size_t co = 0; co < cout; ++co)
              for (std::size_t ci = 0; ci < cin; ++ci) gwv[(co * cin + ci) * k3 + off] += gw(co, ci);
          }
          if (pin.requires_grad) {
            for (std::size_t co = 0; co < cout; ++co)
              for (std::size_t ci = 0; ci < cin; ++ci) wk(co, ci) = pw.value[(co * cin + ci) * k3 + off];
            RowMat<T> gs = wk.transpose() * g;
            auto& gin = pin.ensure_grad();
            for (std::size_t ci = 0; ci < cin; ++ci) {
              T* dst = gin.data() + ci * in_sites;
              for (std::size_t q = 0; q < p; ++q)
                if (idx[q] >= 0) dst[idx[q]] += gs(ci, q);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> cross_entropy_per_point(const Tensor<T>& logits, std::span<const std::uint32_t> labels) {
  require_rank("cross_entropy_per_point", logits.shape(), 2);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("cross_entropy_per_point: " + std::to_string(labels.size()) +
                         " labels for logits " + to_string(logits.shape()));
  }
  auto probs = std::make_shared<std::vector<T>>(n * k);
  std::vector<std::uint32_t> lab(labels.begin(), labels.end());
  double total = 0.0;
  const auto z = logits.data();
  for (std::size_t r = 0; r < n; ++r) {
    if (lab[r] >= k) {
      throw IndexError("cross_entropy_per_point: label " + std::to_string(lab[r]) + " at row " +
                       std::to_string(r) + " is outside [0, " + std::to_string(k) + ")");
    }
    double mx = z[r * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max<double>(mx, z[r * k + j]);
    double se = 0.0;
    for (std::size_t j = 0; j < k; ++j) se += std::exp(z[r * k + j] - mx);
    const double lse = mx + std::log(se);
    total += lse - z[r * k + lab[r]];
    for (std::size_t j = 0; j < k; ++j)
      (*probs)[r * k + j] = static_cast<T>(std::exp(z[r * k + j] - lse));
  }
  const T loss = static_cast<T>(total / static_cast<double>(n));
  return make_result<T>("cross_entropy", {1}, {loss}, {logits},
                        [probs, lab = std::move(lab), n, k](NodeT<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          const T s = self.grad[0] / static_cast<T>(n);
                          for (std::size_t r = 0; r < n; ++r) {
                            for (std::size_t j = 0; j < k; ++j) {
                              const T onehot = j == lab[r] ? T{1} : T{0};
                              g[r * k + j] += s * ((*probs)[r * k + j] - onehot);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> mean_abs_relative_error(const Tensor<T>& pred, std::span<const T> targets) {
  if (pred.numel() != targets.size()) {
    throw DimensionError("mean_abs_relative_error: " + std::to_string(targets.size()) +
                         " targets for prediction " + to_string(pred.shape()));
  }
  std::vector<T> t(targets.begin(), targets.end());
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > T{0})) throw ContractError("mean_abs_relative_error: targets must be positive");
    total += std::abs(static_cast<double>(pred.data()[i]) - t[i]) / t[i];
  }
  const T loss = static_cast<T>(total / static_cast<double>(t.size()));
  return make_result<T>("mean_abs_relative_error", {1}, {loss}, {pred},
                        [t = std::move(t)](NodeT<T>& self) {
                          auto& p = *self.parents[0];
                          auto& g = p.ensure_grad();
                          const T s = self.grad[0] / static_cast<T>(t.size());
                          for (std::size_t i = 0; i < t.size(); ++i) {
                            const T d = p.value[i] - t[i];
                            const T sign = d > T{0} ? T{1} : (d < T{0} ? T{-1} : T{0});
                            g[i] += s * sign / t[i];
                          }
                        });
}

#define PVKIT_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale(const Tensor<T>&, T);                                              \
  template Tensor<T> add_row_bias(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                         \
  template Tensor<T> exp(const Tensor<T>&);                                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                        \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> weighted_sum(const Tensor<T>&, std::span<const T>);                      \
  template Tensor<T> slice_prefix(const Tensor<T>&, const Shape&);                            \
  template Tensor<T> max_over_rows(const Tensor<T>&);                                         \
  template Tensor<T> concat_broadcast(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> batchnorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                               std::span<T>, std::span<T>, Mode, std::size_t,                 \
                               BatchNormOptions);                                             \
  template Tensor<T> conv3d_dense(const Tensor<T>&, const Tensor<T>&, int);                   \
  template Tensor<T> cross_entropy_per_point(const Tensor<T>&, std::span<const std::uint32_t>); \
  template Tensor<T> mean_abs_relative_error(const Tensor<T>&, std::span<const T>);

PVKIT_INSTANTIATE_OPS(float)
PVKIT_INSTANTIATE_OPS(double)

}  // namespace pvkit::ad
