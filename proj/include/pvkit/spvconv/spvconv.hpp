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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvkit/autodiff/layers.hpp"
#include "pvkit/pvconv/segmentation_model.hpp"
#include "pvkit/spvconv/sparse_ops.hpp"

namespace pvkit::sparse {

struct SPVConvBlockConfig {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  double voxel_size = 1.0 / 16;
  int voxel_depth = 2;
  std::vector<std::size_t> mlp_widths;  // empty means {out_channels}
  double slope = 0.1;

  std::vector<std::size_t> point_widths() const;
  void validate() const;
};

// Sparse voxel branch (hash-indexed voxelize, submanifold sparse conv stack
// with BN and leaky ReLU, trilinear devoxelize over active voxels) added to
// a per-point MLP branch.
template <typename T>
class SPVConvBlock {
 public:
  SPVConvBlock(const SPVConvBlockConfig& config, Rng& rng);

  ad::Tensor<T> forward(const ad::Tensor<T>& features, std::span<const Point3> coords, ad::Mode mode,
                        PhaseTimes* times = nullptr);

  const SPVConvBlockConfig& config() const { return config_; }
  std::size_t voxel_depth() const { return conv_weights_.size(); }
  ad::Tensor<T>& conv_weight(std::size_t i) { return conv_weights_.at(i); }  // [27 x in x out]
  ad::BatchNorm<T>& conv_norm(std::size_t i) { return conv_norms_.at(i); }
  ad::SharedMlp<T>& point_mlp() { return mlp_; }

  void collect(const std::string& prefix, std::vector<ad::NamedParameter<T>>& out) const;
  void collect_buffers(const std::string& prefix, std::vector<ad::NamedBuffer<T>>& out);

 private:
  SPVConvBlockConfig config_;
  std::vector<ad::Tensor<T>> conv_weights_;
  std::vector<ad::BatchNorm<T>> conv_norms_;
  ad::SharedMlp<T> mlp_;
};

struct SpvcnnConfig {
  std::size_t in_channels = 3;
  std::size_t num_classes = 4;
  std::vector<SPVConvBlockConfig> blocks;
  std::vector<std::size_t> head_widths = {32};
  bool global_feature = true;
  double slope = 0.1;

  void resolve();
};

SpvcnnConfig spvcnn_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SpvcnnConfig& config);

template <typename T>
class Spvcnn : public pv::SegmentationModel<T> {
 public:
  Spvcnn(SpvcnnConfig config, std::uint64_t seed);

  ad::Tensor<T> forward(const cloud::PointCloud& pc, ad::Mode mode, PhaseTimes* times = nullptr) override;
  std::vector<ad::NamedParameter<T>> parameters() const override;
  std::vector<ad::NamedBuffer<T>> buffers() override;
  std::size_t in_channels() const override { return config_.in_channels; }
  std::size_t num_classes() const override { return config_.num_classes; }
  std::string kind() const override { return "spvcnn"; }

  const SpvcnnConfig& config() const { return config_; }
  SPVConvBlock<T>& block(std::size_t i) { return blocks_.at(i); }

 private:
  SpvcnnConfig config_;
  std::vector<SPVConvBlock<T>> blocks_;
  ad::SharedMlp<T> head_;
  ad::Linear<T> classifier_;
};

}  // namespace pvkit::sparse
