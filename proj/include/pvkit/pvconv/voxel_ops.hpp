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
#include <cstdint>
#include <span>
#include <vector>

#include "pvkit/autodiff/tensor.hpp"
#include "pvkit/pointcloud/point_cloud.hpp"

namespace pvkit::pv {

using cloud::Point3;

// Flat cell id of a dense r^3 grid, (u * r + v) * r + w.
inline std::uint32_t flat_cell(int u, int v, int w, int r) {
  return static_cast<std::uint32_t>((u * r + v) * r + w);
}

// Point-to-cell assignment for a dense grid, built in one pass.
struct VoxelAssignment {
  int resolution = 0;
  std::vector<std::uint32_t> cell;    // per point
  std::vector<std::uint32_t> counts;  // per cell, r^3 entries
  std::uint64_t scatter_ops = 0;      // points visited while building
};

VoxelAssignment assign_voxels(std::span<const Point3> coords, int r);

// Averaged features [C x r^3] with occupancy counts.
struct DenseVoxelGrid {
  int resolution = 0;
  std::size_t channels = 0;
  std::vector<float> features;  // channel-major
  std::vector<std::uint32_t> counts;
  std::uint64_t scatter_ops = 0;

  float at(std::size_t c, int u, int v, int w) const {
    return features[c * counts.size() + flat_cell(u, v, w, resolution)];
  }
};

// Scatter-averages the point features into an r^3 grid, one pass over the
// points. Requires normalized coordinates.
DenseVoxelGrid voxelize(const cloud::PointCloud& pc, int r);

// Differentiable form: features [N x C] -> grid [C x r x r x r].
template <typename T>
ad::Tensor<T> voxelize(const ad::Tensor<T>& features, const VoxelAssignment& assignment);

// Per-point interpolation weights over up to 8 source rows. Index -1 marks a
// corner that contributes nothing (outside the grid or inactive).
struct Stencil {
  std::vector<std::array<std::int64_t, 8>> index;
  std::vector<std::array<double, 8>> weight;
  std::size_t sources = 0;  // number of addressable source sites

  std::size_t points() const { return index.size(); }
};

// Trilinear weights around voxel centers ((u + 0.5) / r, ...). Corners
// outside the grid are dropped without renormalising.
Stencil trilinear_stencil(std::span<const Point3> coords, int r);

// Nearest cell, weight 1: every point in a cell reads the same value.
Stencil nearest_stencil(std::span<const Point3> coords, int r);

// grid [C x sites...] (channel-major) -> [N x C].
template <typename T>
ad::Tensor<T> gather_channel_major(const ad::Tensor<T>& grid, const Stencil& stencil);

// rows [sites x C] -> [N x C].
template <typename T>
ad::Tensor<T> gather_rows(const ad::Tensor<T>& rows, const Stencil& stencil);

template <typename T>
ad::Tensor<T> devoxelize_trilinear(const ad::Tensor<T>& grid, std::span<const Point3> coords) {
  return gather_channel_major(grid, trilinear_stencil(coords, static_cast<int>(grid.dim(1))));
}

template <typename T>
ad::Tensor<T> devoxelize_nearest(const ad::Tensor<T>& grid, std::span<const Point3> coords) {
  return gather_channel_major(grid, nearest_stencil(coords, static_cast<int>(grid.dim(1))));
}

// Row-major copy of a cloud's features, converted to T.
template <typename T>
ad::Tensor<T> feature_tensor(const cloud::PointCloud& pc) {
  std::vector<T> values(pc.features().begin(), pc.features().end());
  return ad::Tensor<T>({pc.size(), pc.channels()}, std::move(values));
}

}  // namespace pvkit::pv
