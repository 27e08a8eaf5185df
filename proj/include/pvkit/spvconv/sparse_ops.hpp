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
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "pvkit/autodiff/tensor.hpp"
#include "pvkit/pointcloud/point_cloud.hpp"
#include "pvkit/pvconv/voxel_ops.hpp"
#include "pvkit/spvconv/coord_hash.hpp"

namespace pvkit::sparse {

using cloud::Point3;

// Active voxels with per-row features. Coordinates are in units of the
// finest voxel, so every u, v, w is a multiple of `stride`.
template <typename T>
class SparseTensor {
 public:
  SparseTensor(std::vector<VoxelCoord> coords, ad::Tensor<T> features, int stride,
               std::shared_ptr<const CoordHashTable> hash = nullptr);

  std::size_t size() const { return coords_.size(); }
  std::size_t channels() const { return features_.dim(1); }
  int stride() const { return stride_; }
  const std::vector<VoxelCoord>& coords() const { return coords_; }
  const ad::Tensor<T>& features() const { return features_; }
  const CoordHashTable& hash() const { return *hash_; }
  const std::shared_ptr<const CoordHashTable>& shared_hash() const { return hash_; }

 private:
  std::vector<VoxelCoord> coords_;
  ad::Tensor<T> features_;
  int stride_;
  std::shared_ptr<const CoordHashTable> hash_;
};

// Number of cells per axis for a voxel size in (0, 1].
int grid_cells(double voxel_size);
int sparse_cell(float p, double voxel_size, int cells);

// Point-to-voxel assignment over the active cells, in first-appearance
// order. `probes` counts every hash slot inspected (build and queries).
struct SparseAssignment {
  double voxel_size = 0.0;
  std::vector<VoxelCoord> coords;
  std::vector<std::uint32_t> point_to_voxel;
  std::vector<std::uint32_t> counts;
  std::uint64_t probes = 0;
  std::shared_ptr<CoordHashTable> hash;
};

// Hash-indexed: O(m + n) expected probes.
SparseAssignment assign_sparse(std::span<const Point3> coords, double voxel_size, int batch = 0);
// Linear search through the active list for every point: O(m n). Same
// output as assign_sparse; `probes` counts coordinate comparisons.
SparseAssignment assign_sparse_naive(std::span<const Point3> coords, double voxel_size, int batch = 0);

// Differentiable per-voxel mean: features [N x C] -> [M x C].
template <typename T>
ad::Tensor<T> sparse_voxelize(const ad::Tensor<T>& features, const SparseAssignment& assignment);

struct SparseVoxelization {
  SparseTensor<float> tensor;
  std::vector<std::uint32_t> point_to_voxel;
  std::uint64_t probes = 0;
};

SparseVoxelization sparse_voxelize(const cloud::PointCloud& pc, double voxel_size);
SparseVoxelization sparse_voxelize_naive(const cloud::PointCloud& pc, double voxel_size);

inline constexpr int kKernelVolume = 27;

// Offset index of (dx, dy, dz) in {-1, 0, 1}^3; 13 is the center.
inline int offset_index(int dx, int dy, int dz) { return (dx + 1) * 9 + (dy + 1) * 3 + (dz + 1); }
inline std::array<int, 3> offset_delta(int index) { return {index / 9 - 1, index / 3 % 3 - 1, index % 3 - 1}; }

// Pairs (input row, output row) per kernel offset. For a forward map the
// input neighbour of output o under offset d sits at out_coords[o] +
// d * in_stride.
struct KernelMap {
  int in_stride = 1;
  int out_stride = 1;
  bool transposed = false;
  std::vector<VoxelCoord> in_coords;
  std::vector<VoxelCoord> out_coords;
  std::array<std::vector<std::pair<std::int32_t, std::int32_t>>, kKernelVolume> pairs;

  std::size_t in_count() const { return in_coords.size(); }
  std::size_t out_count() const { return out_coords.size(); }
  std::size_t total_pairs() const;
};

// conv_stride 1 keeps the input coordinates; 2 downsamples to the unique
// floor(c / (2 s)) * 2 s sites in first-appearance order.
KernelMap build_kernel_map(const std::vector<VoxelCoord>& in_coords, int in_stride, int conv_stride,
                           const CoordHashTable* in_hash = nullptr);

// Upsampling map that sends every coarse site back to the fine inputs it
// was reduced from.
KernelMap transpose_kernel_map(const KernelMap& down);

// Gather-GEMM-scatter over the map: features [M_in x C_in], weight
// [27 x C_in x C_out] -> [M_out x C_out]. Counts pairs * C_in * C_out MACs.
template <typename T>
ad::Tensor<T> sparse_conv(const ad::Tensor<T>& features, const ad::Tensor<T>& weight, const KernelMap& map);

template <typename T>
SparseTensor<T> sparse_conv(const SparseTensor<T>& in, const ad::Tensor<T>& weight, const KernelMap& map);

// Trilinear weights over active voxel centers of a stride-s tensor; corners
// that miss in the hash contribute nothing.
pv::Stencil sparse_trilinear_stencil(std::span<const Point3> coords, const CoordHashTable& hash,
                                     double voxel_size, int stride = 1, int batch = 0);

template <typename T>
ad::Tensor<T> sparse_devoxelize_trilinear(const SparseTensor<T>& st, std::span<const Point3> coords,
                                          double voxel_size, int batch = 0) {
  return pv::gather_rows(st.features(), sparse_trilinear_stencil(coords, st.hash(), voxel_size, st.stride(), batch));
}

}  // namespace pvkit::sparse
