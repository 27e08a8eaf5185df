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

#include "pvkit/train/metrics.hpp"

#include <string>

#include "pvkit/common/errors.hpp"

namespace pvkit::train {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), cells_(classes * classes, 0) {
  if (classes == 0) throw ContractError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::uint32_t prediction, std::uint32_t label) {
  if (prediction >= classes_ || label >= classes_) {
    throw IndexError("class id out of range: prediction " + std::to_string(prediction) + ", label " +
                     std::to_string(label) + " with " + std::to_string(classes_) + " classes");
  }
  ++cells_[label * classes_ + prediction];
}

void ConfusionMatrix::add(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  for (std::size_t i = 0; i < labels.size(); ++i) add(predictions[i], labels[i]);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw DimensionError("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (auto v : cells_) n += v;
  return n;
}

std::optional<double> ConfusionMatrix::iou(std::size_t c) const {
  const std::uint64_t tp = at(c, c);
  std::uint64_t fp = 0, fn = 0;
  for (std::size_t k = 0; k < classes_; ++k) {
    if (k == c) continue;
    fp += at(k, c);
    fn += at(c, k);
  }
  const std::uint64_t uni = tp + fp + fn;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(uni);
}

double ConfusionMatrix::miou() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < classes_; ++c) {
    if (const auto v = iou(c)) {
      sum += *v;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double ConfusionMatrix::accuracy() const {
  std::uint64_t diag = 0;
  for (std::size_t c = 0; c < classes_; ++c) diag += at(c, c);
  const auto n = total();
  return n ? static_cast<double>(diag) / static_cast<double>(n) : 0.0;
}

template <typename T>
std::vector<std::uint32_t> argmax_rows(std::span<const T> logits, std::size_t classes) {
  if (classes == 0 || logits.size() % classes != 0) throw DimensionError("logit count is not a multiple of classes");
  std::vector<std::uint32_t> out(logits.size() / classes);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < classes; ++j)
      if (logits[i * classes + j] > logits[i * classes + best]) best = j;
    out[i] = static_cast<std::uint32_t>(best);
  }
  return out;
}

template std::vector<std::uint32_t> argmax_rows<float>(std::span<const float>, std::size_t);
template std::vector<std::uint32_t> argmax_rows<double>(std::span<const double>, std::size_t);

}  // namespace pvkit::train
