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

#include <cstddef>
#include <string>
#include <vector>

#include "pvkit/autodiff/tensor.hpp"
#include "pvkit/common/timing.hpp"
#include "pvkit/pointcloud/point_cloud.hpp"

namespace pvkit::pv {

// Per-point classifier over a normalized cloud; logits are [N x classes].
template <typename T>
class SegmentationModel {
 public:
  virtual ~SegmentationModel() = default;

  virtual ad::Tensor<T> forward(const cloud::PointCloud& pc, ad::Mode mode,
                                PhaseTimes* times = nullptr) = 0;
  virtual std::vector<ad::NamedParameter<T>> parameters() const = 0;
  virtual std::vector<ad::NamedBuffer<T>> buffers() = 0;
  virtual std::size_t in_channels() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::string kind() const = 0;
};

}  // namespace pvkit::pv
