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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pvkit/autodiff/layers.hpp"
#include "pvkit/common/timing.hpp"
#include "pvkit/pvconv/segmentation_model.hpp"
#include "pvkit/pvconv/voxel_ops.hpp"

namespace pvkit::pv {

struct PVConvBlockConfig {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  int resolution = 8;
  int voxel_depth = 2;  // 0 keeps only the point branch
  std::vector<std::size_t> mlp_widths;  // empty means {out_channels}
  double slope = 0.1;

  std::vector<std::size_t> point_widths() const;
  void validate() const;
};

// Dense voxel branch (voxelize, conv3d/BN/leaky ReLU stack, trilinear
// devoxelize) added to a per-point MLP branch.
template <typename T>
class PVConvBlock {
 public:
  PVConvBlock(const PVConvBlockConfig& config, Rng& rng);

  // features [N x in] at normalized coords -> [N x out].
  ad::Tensor<T> forward(const ad::Tensor<T>& features, std::span<const Point3> coords, ad::Mode mode,
                        PhaseTimes* times = nullptr);

  const PVConvBlockConfig& config() const { return config_; }
  std::size_t voxel_depth() const { return conv_weights_.size(); }
  ad::Tensor<T>& conv_weight(std::size_t i) { return conv_weights_.at(i); }
  ad::BatchNorm<T>& conv_norm(std::size_t i) { return conv_norms_.at(i); }
  ad::SharedMlp<T>& point_mlp() { return mlp_; }

  void collect(const std::string& prefix, std::vector<ad::NamedParameter<T>>& out) const;
  void collect_buffers(const std::string& prefix, std::vector<ad::NamedBuffer<T>>& out);

 private:
  PVConvBlockConfig config_;
  std::vector<ad::Tensor<T>> conv_weights_;  // [out x in x 3 x 3 x 3]
  std::vector<ad::BatchNorm<T>> conv_norms_;
  ad::SharedMlp<T> mlp_;
};

struct PvcnnConfig {
  std::size_t in_channels = 3;
  std::size_t num_classes = 4;
  std::vector<PVConvBlockConfig> blocks;  // in_channels chained automatically
  std::vector<std::size_t> head_widths = {32};
  bool global_feature = true;
  double slope = 0.1;

  // Fills each block's in_channels from the chain; a block that names an
  // explicit, different in_channels is a config error.
  void resolve();
};

PvcnnConfig pvcnn_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PvcnnConfig& config);

// PVConv stack, per-point features concatenated with their max-pooled
// global feature, then a shared MLP head and a linear classifier.
template <typename T>
class Pvcnn : public SegmentationModel<T> {
 public:
  Pvcnn(PvcnnConfig config, std::uint64_t seed);

  ad::Tensor<T> forward(const cloud::PointCloud& pc, ad::Mode mode, PhaseTimes* times = nullptr) override;
  std::vector<ad::NamedParameter<T>> parameters() const override;
  std::vector<ad::NamedBuffer<T>> buffers() override;
  std::size_t in_channels() const override { return config_.in_channels; }
  std::size_t num_classes() const override { return config_.num_classes; }
  std::string kind() const override { return "pvcnn"; }

  const PvcnnConfig& config() const { return config_; }
  PVConvBlock<T>& block(std::size_t i) { return blocks_.at(i); }

 private:
  PvcnnConfig config_;
  std::vector<PVConvBlock<T>> blocks_;
  ad::SharedMlp<T> head_;
  ad::Linear<T> classifier_;
};

}  // namespace pvkit::pv
