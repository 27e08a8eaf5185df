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
#include <span>

#include "pvkit/autodiff/tensor.hpp"

namespace pvkit::ad {

// [M x K] . [K x N] -> [M x N].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise sum of equally shaped tensors.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

// x [N x C] + bias [C], the bias repeated over rows.
template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope);

template <typename T>
Tensor<T> exp(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Sum of all elements, shape [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// sum_i x_i * weights_i, shape [1]. Projects any output to a scalar for
// gradient checking.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights);

// Leading sub-block x[0:shape[0], 0:shape[1], ...]. The backward pass
// scatters into the matching prefix of x, which is how candidate networks
// train a shared weight store.
template <typename T>
Tensor<T> slice_prefix(const Tensor<T>& x, const Shape& shape);

// Column-wise maximum of x [N x C] -> [1 x C]; ties resolve to the lowest row.
template <typename T>
Tensor<T> max_over_rows(const Tensor<T>& x);

// [N x A] and [1 x B] -> [N x (A + B)], the single row of g repeated.
template <typename T>
Tensor<T> concat_broadcast(const Tensor<T>& x, const Tensor<T>& g);

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

// Normalizes over every axis except `channel_axis`. In train mode batch
// statistics are used and the running statistics updated (unbiased variance);
// in eval mode the running statistics are used. The running spans may be a
// prefix view of larger storage.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    std::span<T> running_mean, std::span<T> running_var, Mode mode,
                    std::size_t channel_axis, BatchNormOptions options = {});

// Dense volumetric cross-correlation. input [C_in x D x H x W],
// weight [C_out x C_in x k x k x k] with odd k and zero padding (k-1)/2.
// Output extent per axis: floor((n - 1) / stride) + 1.
template <typename T>
Tensor<T> conv3d_dense(const Tensor<T>& input, const Tensor<T>& weight, int stride);

// Mean over rows of -log softmax(logits)[label]; logits [N x K].
template <typename T>
Tensor<T> cross_entropy_per_point(const Tensor<T>& logits,
                                  std::span<const std::uint32_t> labels);

// Mean of |pred_i - target_i| / target_i. Targets must be positive.
template <typename T>
Tensor<T> mean_abs_relative_error(const Tensor<T>& pred, std::span<const T> targets);

}  // namespace pvkit::ad
