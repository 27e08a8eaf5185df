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
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pvkit::train {

// Global confusion matrix over all evaluated points (scene-segmentation
// convention): rows are labels, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  void add(std::uint32_t prediction, std::uint32_t label);
  void add(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels);
  void merge(const ConfusionMatrix& other);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t label, std::size_t prediction) const { return cells_[label * classes_ + prediction]; }
  std::uint64_t total() const;

  // TP / (TP + FP + FN); empty when the class never occurs in either.
  std::optional<double> iou(std::size_t c) const;
  // Mean IoU over classes with a non-empty union (0 when none).
  double miou() const;
  double accuracy() const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> cells_;
};

// Row-wise argmax of [N x K] logits; ties go to the lowest class.
template <typename T>
std::vector<std::uint32_t> argmax_rows(std::span<const T> logits, std::size_t classes);

}  // namespace pvkit::train
