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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pvkit::cloud {

using Point3 = std::array<float, 3>;

enum class CoordSpace : std::uint8_t { kRaw, kNormalized };

// N points with coordinates, per-point features (row k pairs with point k)
// and optional labels. Immutable after construction.
class PointCloud {
 public:
  PointCloud(std::vector<Point3> coords, std::vector<float> features, std::size_t channels,
             std::optional<std::vector<std::uint32_t>> labels = std::nullopt,
             CoordSpace space = CoordSpace::kRaw);

  std::size_t size() const { return coords_.size(); }
  std::size_t channels() const { return channels_; }
  CoordSpace space() const { return space_; }
  bool normalized() const { return space_ == CoordSpace::kNormalized; }

  std::span<const Point3> coords() const { return coords_; }
  std::span<const float> features() const { return features_; }
  std::span<const float> feature_row(std::size_t k) const {
    return std::span<const float>(features_).subspan(k * channels_, channels_);
  }
  bool has_labels() const { return labels_.has_value(); }
  const std::optional<std::vector<std::uint32_t>>& labels() const { return labels_; }

  PointCloud with_features(std::vector<float> features, std::size_t channels) const;
  PointCloud permuted(std::span<const std::size_t> order) const;

 private:
  std::vector<Point3> coords_;
  std::vector<float> features_;
  std::size_t channels_;
  std::optional<std::vector<std::uint32_t>> labels_;
  CoordSpace space_;
};

// Cell index of a normalized coordinate at resolution r: floor(p * r)
// clamped to [0, r - 1], so p == 1 lands in the last cell.
inline int voxel_index(float p, int r) {
  const double scaled = static_cast<double>(p) * r;
  int i = scaled <= 0.0 ? 0 : static_cast<int>(scaled);
  return i >= r ? r - 1 : i;
}

// Centers on the coordinate mean, scales into the unit ball by the largest
// point norm and maps [-1, 1]^3 onto [0, 1]^3. Coincident points map to the
// cube center.
PointCloud normalize(const PointCloud& pc);

struct DistinguishableCount {
  std::size_t count = 0;
  double fraction = 0.0;
};

// Per-point flag: true when the point is the sole occupant of its voxel.
std::vector<bool> sole_occupancy(const PointCloud& pc, int r);
DistinguishableCount count_distinguishable(const PointCloud& pc, int r);

// Scenes processed together; all members share feature width and space.
class SceneBatch {
 public:
  void add(PointCloud pc);
  std::size_t size() const { return clouds_.size(); }
  const PointCloud& operator[](std::size_t i) const { return clouds_.at(i); }
  std::span<const PointCloud> clouds() const { return clouds_; }

 private:
  std::vector<PointCloud> clouds_;
};

}  // namespace pvkit::cloud
