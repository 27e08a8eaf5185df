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

#include "pvkit/autodiff/optimizer.hpp"

#include <cmath>

#include "pvkit/common/errors.hpp"

namespace pvkit::ad {

template <typename T>
void Optimizer<T>::step(std::span<NamedParameter<T>> params) {
  std::vector<std::vector<T>> grads;
  grads.reserve(params.size());
  for (auto& p : params) {
    if (p.tensor.has_grad()) {
      grads.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    } else {
      grads.emplace_back(p.tensor.numel(), T{0});
    }
  }
  step(params, grads);
}

template <typename T>
void Optimizer<T>::step(std::span<NamedParameter<T>> params,
                        std::span<const std::vector<T>> grads) {
  if (params.size() != grads.size()) {
    throw DimensionError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  // Validate everything before touching any parameter.
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].tensor.numel()) {
      throw DimensionError("optimizer: gradient size mismatch for " + params[i].name);
    }
    for (T g : grads[i]) {
      if (!std::isfinite(g)) {
        throw TrainingError("non-finite gradient in parameter " + params[i].name);
      }
    }
  }
  ++steps_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i].name, params[i].tensor.mutable_data(), grads[i]);
  }
}

template <typename T>
void Optimizer<T>::update(const std::string& name, std::span<T> value, std::span<const T> grad) {
  const double lr = config_.lr, wd = config_.weight_decay;
  if (config_.kind == OptimizerKind::kSgd) {
    if (config_.momentum == 0.0) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        value[i] -= static_cast<T>(lr * (grad[i] + wd * value[i]));
      }
      return;
    }
    auto& buf = first_[name];
    if (buf.size() != value.size()) buf.assign(value.size(), T{0});
    for (std::size_t i = 0; i < value.size(); ++i) {
      buf[i] = static_cast<T>(config_.momentum * buf[i] + grad[i] + wd * value[i]);
      value[i] -= static_cast<T>(lr * buf[i]);
    }
    return;
  }
  auto& m = first_[name];
  auto& v = second_[name];
  if (m.size() != value.size()) m.assign(value.size(), T{0});
  if (v.size() != value.size()) v.assign(value.size(), T{0});
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i] + wd * value[i];
    m[i] = static_cast<T>(b1 * m[i] + (1.0 - b1) * g);
    v[i] = static_cast<T>(b2 * v[i] + (1.0 - b2) * g * g);
    const double mh = m[i] / c1, vh = v[i] / c2;
    value[i] -= static_cast<T>(lr * mh / (std::sqrt(vh) + config_.eps));
  }
}

template <typename T>
std::map<std::string, std::vector<T>> Optimizer<T>::export_state() const {
  std::map<std::string, std::vector<T>> out;
  for (const auto& [k, v] : first_) out[k + "/m"] = v;
  for (const auto& [k, v] : second_) out[k + "/v"] = v;
  return out;
}

template <typename T>
void Optimizer<T>::import_state(const std::map<std::string, std::vector<T>>& state,
                                std::int64_t steps) {
  first_.clear();
  second_.clear();
  for (const auto& [k, v] : state) {
    if (k.size() > 2 && k.compare(k.size() - 2, 2, "/m") == 0) {
      first_[k.substr(0, k.size() - 2)] = v;
    } else if (k.size() > 2 && k.compare(k.size() - 2, 2, "/v") == 0) {
      second_[k.substr(0, k.size() - 2)] = v;
    }
  }
  steps_ = steps;
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace pvkit::ad
