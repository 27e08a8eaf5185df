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

#include "pvkit/autodiff/layers.hpp"

#include <cmath>

#include "pvkit/common/errors.hpp"

namespace pvkit::ad {

template <typename T>
Tensor<T> he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> values(numel(shape));
  for (auto& v : values) v = static_cast<T>(uniform_real(rng, -bound, bound));
  return Tensor<T>(std::move(shape), std::move(values), true);
}

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, bool bias, Rng& rng)
    : weight_(he_uniform<T>({in, out}, in, rng)) {
  if (bias) bias_ = Tensor<T>::zeros({out}, true);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y = matmul(x, weight_);
  return bias_.defined() ? add_row_bias(y, bias_) : y;
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  out.push_back({prefix + ".weight", weight_});
  if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
}

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels, BatchNormOptions options)
    : gamma_(Tensor<T>::full({channels}, T{1}, true)),
      beta_(Tensor<T>::zeros({channels}, true)),
      running_mean_(channels, T{0}),
      running_var_(channels, T{1}),
      options_(options) {}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode, std::size_t channel_axis) {
  return batchnorm(x, gamma_, beta_, std::span<T>(running_mean_), std::span<T>(running_var_),
                   mode, channel_axis, options_);
}

template <typename T>
void BatchNorm<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

template <typename T>
void BatchNorm<T>::collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) {
  out.push_back({prefix + ".running_mean", &running_mean_});
  out.push_back({prefix + ".running_var", &running_var_});
}

template <typename T>
SharedMlp<T>::SharedMlp(std::size_t in, const std::vector<std::size_t>& widths, T slope, Rng& rng)
    : slope_(slope) {
  std::size_t prev = in;
  for (std::size_t w : widths) {
    linears_.emplace_back(prev, w, false, rng);
    norms_.emplace_back(w);
    prev = w;
  }
}

template <typename T>
Tensor<T> SharedMlp<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = x;
  for (std::size_t i = 0; i < linears_.size(); ++i) {
    h = leaky_relu(norms_[i].forward(linears_[i].forward(h), mode, 1), slope_);
  }
  return h;
}

template <typename T>
std::size_t SharedMlp<T>::out_features() const {
  if (linears_.empty()) throw ContractError("SharedMlp has no layers");
  return linears_.back().out_features();
}

template <typename T>
void SharedMlp<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  for (std::size_t i = 0; i < linears_.size(); ++i) {
    linears_[i].collect(prefix + "." + std::to_string(i) + ".linear", out);
    norms_[i].collect(prefix + "." + std::to_string(i) + ".bn", out);
  }
}

template <typename T>
void SharedMlp<T>::collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) {
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    norms_[i].collect_buffers(prefix + "." + std::to_string(i) + ".bn", out);
  }
}

template Tensor<float> he_uniform(Shape, std::size_t, Rng&);
template Tensor<double> he_uniform(Shape, std::size_t, Rng&);
template class Linear<float>;
template class Linear<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;
template class SharedMlp<float>;
template class SharedMlp<double>;

}  // namespace pvkit::ad
