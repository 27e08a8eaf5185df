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

#include "pvkit/pvconv/voxel_ops.hpp"

#include <cmath>
#include <string>

#include "pvkit/common/errors.hpp"

namespace pvkit::pv {

using ad::Shape;
using ad::Tensor;
template <typename T>
using NodeT = ad::detail::Node<T>;

namespace {

void check_resolution(int r) {
  // r^3 must fit a 32-bit cell id.
  if (r < 1 || r > 1024) throw ContractError("voxel resolution out of range: " + std::to_string(r));
}

void check_normalized(std::span<const Point3> coords) {
  for (const auto& p : coords)
    for (float v : p)
      if (!(v >= 0.0f && v <= 1.0f)) throw ContractError("coordinates must be normalized to [0, 1]");
}

// Lower corner and fractional offset along one axis for center-aligned
// interpolation: x = p * r - 0.5.
void axis_weights(float p, int r, int& lo, double& t) {
  const double x = static_cast<double>(p) * r - 0.5;
  const double f = std::floor(x);
  lo = static_cast<int>(f);
  t = x - f;
}

}  // namespace

VoxelAssignment assign_voxels(std::span<const Point3> coords, int r) {
  check_resolution(r);
  check_normalized(coords);
  VoxelAssignment a;
  a.resolution = r;
  a.cell.resize(coords.size());
  a.counts.assign(static_cast<std::size_t>(r) * r * r, 0);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto& p = coords[k];
    const auto c = flat_cell(cloud::voxel_index(p[0], r), cloud::voxel_index(p[1], r),
                             cloud::voxel_index(p[2], r), r);
    a.cell[k] = c;
    ++a.counts[c];
    ++a.scatter_ops;
  }
  return a;
}

DenseVoxelGrid voxelize(const cloud::PointCloud& pc, int r) {
  if (!pc.normalized()) throw ContractError("voxelize expects a normalized point cloud");
  check_resolution(r);
  DenseVoxelGrid grid;
  grid.resolution = r;
  grid.channels = pc.channels();
  const std::size_t cells = static_cast<std::size_t>(r) * r * r, c = pc.channels();
  grid.counts.assign(cells, 0);
  std::vector<double> sums(c * cells, 0.0);
  for (std::size_t k = 0; k < pc.size(); ++k) {
    const auto& p = pc.coords()[k];
    const auto cell = flat_cell(cloud::voxel_index(p[0], r), cloud::voxel_index(p[1], r),
                                cloud::voxel_index(p[2], r), r);
    ++grid.counts[cell];
    const auto row = pc.feature_row(k);
    for (std::size_t j = 0; j < c; ++j) sums[j * cells + cell] += row[j];
    ++grid.scatter_ops;
  }
  grid.features.assign(c * cells, 0.0f);
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t cell = 0; cell < cells; ++cell)
      if (grid.counts[cell]) {
        grid.features[j * cells + cell] = static_cast<float>(sums[j * cells + cell] / grid.counts[cell]);
      }
  return grid;
}

template <typename T>
Tensor<T> voxelize(const Tensor<T>& features, const VoxelAssignment& a) {
  if (features.rank() != 2 || features.dim(0) != a.cell.size()) {
    throw DimensionError("voxelize: features " + ad::to_string(features.shape()) + " for " +
                         std::to_string(a.cell.size()) + " assigned points");
  }
  const std::size_t n = features.dim(0), c = features.dim(1), cells = a.counts.size();
  const std::size_t r = static_cast<std::size_t>(a.resolution);
  std::vector<T> out(c * cells, T{0});
  const auto f = features.data();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < c; ++j) out[j * cells + a.cell[k]] += f[k * c + j];
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t cell = 0; cell < cells; ++cell)
      if (a.counts[cell] > 1) out[j * cells + cell] /= static_cast<T>(a.counts[cell]);
  auto cell_of = std::make_shared<std::vector<std::uint32_t>>(a.cell);
  auto counts = std::make_shared<std::vector<std::uint32_t>>(a.counts);
  return ad::make_result<T>("voxelize", Shape{c, r, r, r}, std::move(out), {features},
                            [cell_of, counts, n, c, cells](NodeT<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              for (std::size_t k = 0; k < n; ++k) {
                                const auto cell = (*cell_of)[k];
                                const T inv = T{1} / static_cast<T>((*counts)[cell]);
                                for (std::size_t j = 0; j < c; ++j)
                                  g[k * c + j] += self.grad[j * cells + cell] * inv;
                              }
                            });
}

Stencil trilinear_stencil(std::span<const Point3> coords, int r) {
  check_resolution(r);
  check_normalized(coords);
  Stencil s;
  s.sources = static_cast<std::size_t>(r) * r * r;
  s.index.resize(coords.size());
  s.weight.resize(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    int lo[3];
    double t[3];
    for (int d = 0; d < 3; ++d) axis_weights(coords[k][d], r, lo[d], t[d]);
    for (int corner = 0; corner < 8; ++corner) {
      int idx[3];
      double w = 1.0;
      bool inside = true;
      for (int d = 0; d < 3; ++d) {
        const int bit = (corner >> (2 - d)) & 1;
        idx[d] = lo[d] + bit;
        w *= bit ? t[d] : 1.0 - t[d];
        inside = inside && idx[d] >= 0 && idx[d] < r;
      }
      s.index[k][corner] = inside ? static_cast<std::int64_t>(flat_cell(idx[0], idx[1], idx[2], r)) : -1;
      s.weight[k][corner] = inside ? w : 0.0;
    }
  }
  return s;
}

Stencil nearest_stencil(std::span<const Point3> coords, int r) {
  check_resolution(r);
  check_normalized(coords);
  Stencil s;
  s.sources = static_cast<std::size_t>(r) * r * r;
  s.index.resize(coords.size());
  s.weight.resize(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    s.index[k].fill(-1);
    s.weight[k].fill(0.0);
    s.index[k][0] = flat_cell(cloud::voxel_index(coords[k][0], r), cloud::voxel_index(coords[k][1], r),
                              cloud::voxel_index(coords[k][2], r), r);
    s.weight[k][0] = 1.0;
  }
  return s;
}

namespace {

// Shared body of both gathers; `stride_site` / `stride_chan` describe how a
// (site, channel) pair maps to a flat offset in the source.
template <typename T>
Tensor<T> stencil_gather(const char* op, const Tensor<T>& src, const Stencil& st, std::size_t c,
                         std::size_t stride_site, std::size_t stride_chan) {
  const std::size_t n = st.points();
  std::vector<T> out(n * c, T{0});
  const auto v = src.data();
  for (std::size_t k = 0; k < n; ++k) {
    for (int corner = 0; corner < 8; ++corner) {
      const auto idx = st.index[k][corner];
      if (idx < 0) continue;
      const T w = static_cast<T>(st.weight[k][corner]);
      for (std::size_t j = 0; j < c; ++j) out[k * c + j] += w * v[idx * stride_site + j * stride_chan];
    }
  }
  auto shared = std::make_shared<Stencil>(st);
  return ad::make_result<T>(op, Shape{n, c}, std::move(out), {src},
                            [shared, n, c, stride_site, stride_chan](NodeT<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              for (std::size_t k = 0; k < n; ++k) {
                                for (int corner = 0; corner < 8; ++corner) {
                                  const auto idx = shared->index[k][corner];
                                  if (idx < 0) continue;
                                  const T w = static_cast<T>(shared->weight[k][corner]);
                                  for (std::size_t j = 0; j < c; ++j)
                                    g[idx * stride_site + j * stride_chan] += w * self.grad[k * c + j];
                                }
                              }
                            });
}

}  // namespace

template <typename T>
Tensor<T> gather_channel_major(const Tensor<T>& grid, const Stencil& stencil) {
  if (grid.rank() < 2 || grid.numel() != grid.dim(0) * stencil.sources) {
    throw DimensionError("gather_channel_major: grid " + ad::to_string(grid.shape()) + " does not have " +
                         std::to_string(stencil.sources) + " sites");
  }
  return stencil_gather("devoxelize", grid, stencil, grid.dim(0), 1, stencil.sources);
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& rows, const Stencil& stencil) {
  if (rows.rank() != 2 || rows.dim(0) != stencil.sources) {
    throw DimensionError("gather_rows: source " + ad::to_string(rows.shape()) + " does not have " +
                         std::to_string(stencil.sources) + " rows");
  }
  return stencil_gather("sparse_devoxelize", rows, stencil, rows.dim(1), rows.dim(1), 1);
}

#define PVKIT_INSTANTIATE_VOXEL_OPS(T)                                                  \
  template Tensor<T> voxelize<T>(const Tensor<T>&, const VoxelAssignment&);             \
  template Tensor<T> gather_channel_major<T>(const Tensor<T>&, const Stencil&);         \
  template Tensor<T> gather_rows<T>(const Tensor<T>&, const Stencil&);

PVKIT_INSTANTIATE_VOXEL_OPS(float)
PVKIT_INSTANTIATE_VOXEL_OPS(double)

}  // namespace pvkit::pv
