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

#include "pvkit/spvconv/spvconv.hpp"

#include <string>

#include "pvkit/autodiff/ops.hpp"
#include "pvkit/common/errors.hpp"

namespace pvkit::sparse {

using ad::Mode;
using ad::Tensor;

std::vector<std::size_t> SPVConvBlockConfig::point_widths() const {
  return mlp_widths.empty() ? std::vector<std::size_t>{out_channels} : mlp_widths;
}

void SPVConvBlockConfig::validate() const {
  if (in_channels == 0 || out_channels == 0) throw ConfigError("block channels must be positive");
  if (voxel_depth < 0) throw ConfigError("voxel_depth must be non-negative");
  if (voxel_depth > 0 && !(voxel_size > 0.0 && voxel_size <= 1.0)) {
    throw ConfigError("voxel_size must lie in (0, 1], got " + std::to_string(voxel_size));
  }
  for (auto w : mlp_widths)
    if (w == 0) throw ConfigError("mlp widths must be positive");
  if (point_widths().back() != out_channels) {
    throw ConfigError("point branch ends at " + std::to_string(point_widths().back()) +
                      " channels but the block outputs " + std::to_string(out_channels));
  }
}

template <typename T>
SPVConvBlock<T>::SPVConvBlock(const SPVConvBlockConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  std::size_t prev = config_.in_channels;
  for (int i = 0; i < config_.voxel_depth; ++i) {
    conv_weights_.push_back(ad::he_uniform<T>({kKernelVolume, prev, config_.out_channels}, prev * 27, rng));
    conv_norms_.emplace_back(config_.out_channels);
    prev = config_.out_channels;
  }
  mlp_ = ad::SharedMlp<T>(config_.in_channels, config_.point_widths(), static_cast<T>(config_.slope), rng);
}

template <typename T>
Tensor<T> SPVConvBlock<T>::forward(const Tensor<T>& features, std::span<const Point3> coords, Mode mode,
                                   PhaseTimes* times) {
  if (features.rank() != 2 || features.dim(1) != config_.in_channels) {
    throw DimensionError("SPVConv block expects [N x " + std::to_string(config_.in_channels) +
                         "] features, got " + ad::to_string(features.shape()));
  }
  if (features.dim(0) != coords.size()) {
    throw DimensionError("SPVConv block: " + std::to_string(coords.size()) + " coordinates for " +
                         std::to_string(features.dim(0)) + " feature rows");
  }
  Tensor<T> point;
  {
    ScopedPhase phase(times ? &times->mlp_ns : nullptr);
    point = mlp_.forward(features, mode);
  }
  if (conv_weights_.empty()) return point;

  SparseAssignment assignment;
  Tensor<T> x;
  KernelMap map;
  {
    ScopedPhase phase(times ? &times->voxelize_ns : nullptr);
    assignment = assign_sparse(coords, config_.voxel_size);
    x = sparse_voxelize(features, assignment);
  }
  {
    ScopedPhase phase(times ? &times->conv_ns : nullptr);
    map = build_kernel_map(assignment.coords, 1, 1, assignment.hash.get());
    for (std::size_t i = 0; i < conv_weights_.size(); ++i) {
      x = sparse_conv(x, conv_weights_[i], map);
      x = conv_norms_[i].forward(x, mode, 1);
      x = ad::leaky_relu(x, static_cast<T>(config_.slope));
    }
  }
  Tensor<T> voxel;
  {
    ScopedPhase phase(times ? &times->devoxelize_ns : nullptr);
    voxel = pv::gather_rows(x, sparse_trilinear_stencil(coords, *assignment.hash, config_.voxel_size));
  }
  return ad::add(voxel, point);
}

template <typename T>
void SPVConvBlock<T>::collect(const std::string& prefix, std::vector<ad::NamedParameter<T>>& out) const {
  for (std::size_t i = 0; i < conv_weights_.size(); ++i) {
    const std::string p = prefix + ".voxel." + std::to_string(i);
    out.push_back({p + ".weight", conv_weights_[i]});
    conv_norms_[i].collect(p + ".bn", out);
  }
  mlp_.collect(prefix + ".point", out);
}

template <typename T>
void SPVConvBlock<T>::collect_buffers(const std::string& prefix, std::vector<ad::NamedBuffer<T>>& out) {
  for (std::size_t i = 0; i < conv_norms_.size(); ++i) {
    conv_norms_[i].collect_buffers(prefix + ".voxel." + std::to_string(i) + ".bn", out);
  }
  mlp_.collect_buffers(prefix + ".point", out);
}

void SpvcnnConfig::resolve() {
  if (in_channels == 0 || num_classes == 0) throw ConfigError("in_channels and num_classes must be positive");
  if (blocks.empty()) throw ConfigError("model needs at least one block");
  std::size_t prev = in_channels;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = blocks[i];
    if (b.in_channels != 0 && b.in_channels != prev) {
      throw ConfigError("block " + std::to_string(i) + " expects " + std::to_string(b.in_channels) +
                        " input channels but receives " + std::to_string(prev));
    }
    b.in_channels = prev;
    b.slope = slope;
    b.validate();
    prev = b.out_channels;
  }
  for (auto w : head_widths)
    if (w == 0) throw ConfigError("head widths must be positive");
}

SpvcnnConfig spvcnn_config_from_json(const nlohmann::json& j) {
  SpvcnnConfig c;
  try {
    c.in_channels = j.value("in_channels", c.in_channels);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.head_widths = j.value("head", c.head_widths);
    c.global_feature = j.value("global_feature", c.global_feature);
    c.slope = j.value("slope", c.slope);
    for (const auto& b : j.at("blocks")) {
      SPVConvBlockConfig bc;
      bc.in_channels = b.value("in", std::size_t{0});
      bc.out_channels = b.at("out").get<std::size_t>();
      bc.voxel_size = b.value("voxel_size", bc.voxel_size);
      bc.voxel_depth = b.value("voxel_depth", bc.voxel_depth);
      bc.mlp_widths = b.value("mlp", bc.mlp_widths);
      c.blocks.push_back(bc);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("spvcnn config: ") + e.what());
  }
  c.resolve();
  return c;
}

nlohmann::json to_json(const SpvcnnConfig& c) {
  nlohmann::json j;
  j["in_channels"] = c.in_channels;
  j["num_classes"] = c.num_classes;
  j["head"] = c.head_widths;
  j["global_feature"] = c.global_feature;
  j["slope"] = c.slope;
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : c.blocks) {
    j["blocks"].push_back({{"in", b.in_channels},
                           {"out", b.out_channels},
                           {"voxel_size", b.voxel_size},
                           {"voxel_depth", b.voxel_depth},
                           {"mlp", b.point_widths()}});
  }
  return j;
}

template <typename T>
Spvcnn<T>::Spvcnn(SpvcnnConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.resolve();
  Rng rng(seed);
  for (const auto& b : config_.blocks) blocks_.emplace_back(b, rng);
  std::size_t width = config_.blocks.back().out_channels;
  if (config_.global_feature) width *= 2;
  head_ = ad::SharedMlp<T>(width, config_.head_widths, static_cast<T>(config_.slope), rng);
  if (!config_.head_widths.empty()) width = config_.head_widths.back();
  classifier_ = ad::Linear<T>(width, config_.num_classes, true, rng);
}

template <typename T>
Tensor<T> Spvcnn<T>::forward(const cloud::PointCloud& pc, Mode mode, PhaseTimes* times) {
  if (!pc.normalized()) throw ContractError("spvcnn expects a normalized point cloud");
  if (pc.channels() != config_.in_channels) {
    throw DimensionError("spvcnn expects " + std::to_string(config_.in_channels) + " feature channels, got " +
                         std::to_string(pc.channels()));
  }
  Tensor<T> x = pv::feature_tensor<T>(pc);
  for (auto& b : blocks_) x = b.forward(x, pc.coords(), mode, times);
  ScopedPhase phase(times ? &times->mlp_ns : nullptr);
  if (config_.global_feature) x = ad::concat_broadcast(x, ad::max_over_rows(x));
  return classifier_.forward(head_.forward(x, mode));
}

template <typename T>
std::vector<ad::NamedParameter<T>> Spvcnn<T>::parameters() const {
  std::vector<ad::NamedParameter<T>> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("block" + std::to_string(i), out);
  head_.collect("head", out);
  classifier_.collect("classifier", out);
  return out;
}

template <typename T>
std::vector<ad::NamedBuffer<T>> Spvcnn<T>::buffers() {
  std::vector<ad::NamedBuffer<T>> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect_buffers("block" + std::to_string(i), out);
  head_.collect_buffers("head", out);
  return out;
}

template class SPVConvBlock<float>;
template class SPVConvBlock<double>;
template class Spvcnn<float>;
template class Spvcnn<double>;

}  // namespace pvkit::sparse
