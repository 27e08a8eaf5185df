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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pvkit/autodiff/tensor.hpp"

namespace pvkit::ad {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double momentum = 0.0;  // SGD only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// SGD with optional heavy-ball momentum, or Adam. State is keyed by
// parameter name so a resumed run picks up exactly where it stopped.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  // Uses each tensor's accumulated gradient (missing gradient == zero).
  void step(std::span<NamedParameter<T>> params);
  // Uses explicitly supplied gradients, one vector per parameter.
  void step(std::span<NamedParameter<T>> params, std::span<const std::vector<T>> grads);

  const OptimizerConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::int64_t steps() const { return steps_; }

  // Moment buffers as "<param>/m" and "<param>/v" plus the step count.
  std::map<std::string, std::vector<T>> export_state() const;
  void import_state(const std::map<std::string, std::vector<T>>& state, std::int64_t steps);

 private:
  void update(const std::string& name, std::span<T> value, std::span<const T> grad);

  OptimizerConfig config_;
  std::map<std::string, std::vector<T>> first_;
  std::map<std::string, std::vector<T>> second_;
  std::int64_t steps_ = 0;
};

}  // namespace pvkit::ad
