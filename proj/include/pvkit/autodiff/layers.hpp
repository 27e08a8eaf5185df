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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvkit/autodiff/ops.hpp"
#include "pvkit/autodiff/tensor.hpp"
#include "pvkit/common/random.hpp"

namespace pvkit::ad {

// He-uniform initialisation: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
template <typename T>
Tensor<T> he_uniform(Shape shape, std::size_t fan_in, Rng& rng);

// x [N x in] . W [in x out] (+ b).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool bias, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }
  Tensor<T>& weight() { return weight_; }
  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }
  bool has_bias() const { return bias_.defined(); }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
};

template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels, BatchNormOptions options = {});

  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::size_t channel_axis);

  std::size_t channels() const { return gamma_.numel(); }
  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  std::vector<T>& running_mean() { return running_mean_; }
  std::vector<T>& running_var() { return running_var_; }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out);

 private:
  Tensor<T> gamma_;
  Tensor<T> beta_;
  std::vector<T> running_mean_;
  std::vector<T> running_var_;
  BatchNormOptions options_;
};

// Linear (no bias) -> BatchNorm -> LeakyReLU over per-row features.
template <typename T>
class SharedMlp {
 public:
  SharedMlp() = default;
  SharedMlp(std::size_t in, const std::vector<std::size_t>& widths, T slope, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);

  std::size_t out_features() const;
  std::size_t depth() const { return linears_.size(); }
  Linear<T>& linear(std::size_t i) { return linears_.at(i); }
  BatchNorm<T>& norm(std::size_t i) { return norms_.at(i); }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out);

 private:
  std::vector<Linear<T>> linears_;
  std::vector<BatchNorm<T>> norms_;
  T slope_ = T(0.1);
};

template <typename T>
std::size_t parameter_count(const std::vector<NamedParameter<T>>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

}  // namespace pvkit::ad
