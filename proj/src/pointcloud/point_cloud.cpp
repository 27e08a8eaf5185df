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

#include "pvkit/pointcloud/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "pvkit/common/errors.hpp"

namespace pvkit::cloud {

PointCloud::PointCloud(std::vector<Point3> coords, std::vector<float> features, std::size_t channels,
                       std::optional<std::vector<std::uint32_t>> labels, CoordSpace space)
    : coords_(std::move(coords)),
      features_(std::move(features)),
      channels_(channels),
      labels_(std::move(labels)),
      space_(space) {
  if (coords_.empty()) throw ContractError("point cloud must contain at least one point");
  if (channels_ == 0) throw ContractError("point cloud needs at least one feature channel");
  if (features_.size() != coords_.size() * channels_) {
    throw DimensionError("point cloud has " + std::to_string(coords_.size()) + " points but " +
                         std::to_string(features_.size()) + " feature values for " +
                         std::to_string(channels_) + " channels");
  }
  if (labels_ && labels_->size() != coords_.size()) {
    throw DimensionError("point cloud label count does not match point count");
  }
  for (const auto& p : coords_) {
    for (float v : p) {
      if (!std::isfinite(v)) throw ContractError("point cloud coordinates must be finite");
      if (space_ == CoordSpace::kNormalized && (v < 0.0f || v > 1.0f)) {
        throw ContractError("normalized coordinate " + std::to_string(v) + " outside [0, 1]");
      }
    }
  }
}

PointCloud PointCloud::with_features(std::vector<float> features, std::size_t channels) const {
  return PointCloud(coords_, std::move(features), channels, labels_, space_);
}

PointCloud PointCloud::permuted(std::span<const std::size_t> order) const {
  if (order.size() != size()) throw DimensionError("permutation length does not match cloud size");
  std::vector<Point3> coords(size());
  std::vector<float> features(features_.size());
  std::optional<std::vector<std::uint32_t>> labels;
  if (labels_) labels.emplace(size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t src = order[i];
    coords[i] = coords_.at(src);
    std::copy_n(features_.begin() + src * channels_, channels_, features.begin() + i * channels_);
    if (labels_) (*labels)[i] = (*labels_)[src];
  }
  return PointCloud(std::move(coords), std::move(features), channels_, std::move(labels), space_);
}

PointCloud normalize(const PointCloud& pc) {
  if (pc.normalized()) throw ContractError("normalize expects raw coordinates");
  const std::size_t n = pc.size();
  double mean[3] = {0, 0, 0};
  for (const auto& p : pc.coords())
    for (int d = 0; d < 3; ++d) mean[d] += p[d];
  for (double& m : mean) m /= static_cast<double>(n);
  double max_norm = 0.0;
  for (const auto& p : pc.coords()) {
    double s = 0.0;
    for (int d = 0; d < 3; ++d) s += (p[d] - mean[d]) * (p[d] - mean[d]);
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  std::vector<Point3> out(n);
  constexpr double kDegenerate = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      if (max_norm < kDegenerate) {
        out[i][d] = 0.5f;
      } else {
        const double unit = (pc.coords()[i][d] - mean[d]) / max_norm;
        out[i][d] = static_cast<float>(std::clamp(unit / 2.0 + 0.5, 0.0, 1.0));
      }
    }
  }
  std::vector<float> features(pc.features().begin(), pc.features().end());
  return PointCloud(std::move(out), std::move(features), pc.channels(), pc.labels(),
                    CoordSpace::kNormalized);
}

namespace {

std::uint64_t cell_key(const Point3& p, int r) {
  const std::uint64_t x = voxel_index(p[0], r), y = voxel_index(p[1], r), z = voxel_index(p[2], r);
  return (x << 42) | (y << 21) | z;
}

}  // namespace

std::vector<bool> sole_occupancy(const PointCloud& pc, int r) {
  if (!pc.normalized()) throw ContractError("sole_occupancy expects normalized coordinates");
  if (r < 1 || r > (1 << 21)) throw ContractError("resolution out of range: " + std::to_string(r));
  std::unordered_map<std::uint64_t, std::uint32_t> occupancy;
  occupancy.reserve(pc.size() * 2);
  for (const auto& p : pc.coords()) ++occupancy[cell_key(p, r)];
  std::vector<bool> sole(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) sole[i] = occupancy[cell_key(pc.coords()[i], r)] == 1;
  return sole;
}

DistinguishableCount count_distinguishable(const PointCloud& pc, int r) {
  const auto sole = sole_occupancy(pc, r);
  DistinguishableCount out;
  for (bool s : sole) out.count += s ? 1 : 0;
  out.fraction = static_cast<double>(out.count) / static_cast<double>(pc.size());
  return out;
}

void SceneBatch::add(PointCloud pc) {
  if (!clouds_.empty()) {
    const auto& first = clouds_.front();
    if (pc.channels() != first.channels() || pc.space() != first.space()) {
      throw ContractError("scene batch members must share feature width and coordinate space");
    }
  }
  clouds_.push_back(std::move(pc));
}

}  // namespace pvkit::cloud
