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

#include "pvkit/spvconv/sparse_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "pvkit/common/counters.hpp"
#include "pvkit/common/errors.hpp"

namespace pvkit::sparse {

using ad::Shape;
using ad::Tensor;
template <typename T>
using NodeT = ad::detail::Node<T>;

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::int32_t floor_to_multiple(std::int32_t v, std::int32_t m) {
  std::int32_t q = v / m;
  if (v % m != 0 && v < 0) --q;
  return q * m;
}

void check_voxel_size(double voxel_size) {
  if (!(voxel_size > 0.0 && voxel_size <= 1.0)) {
    throw ContractError("voxel_size must lie in (0, 1], got " + std::to_string(voxel_size));
  }
  if (grid_cells(voxel_size) > INT16_MAX) throw ContractError("voxel_size too small for 16-bit coordinates");
}

VoxelCoord point_cell(const Point3& p, double voxel_size, int cells, int batch) {
  return {batch, sparse_cell(p[0], voxel_size, cells), sparse_cell(p[1], voxel_size, cells),
          sparse_cell(p[2], voxel_size, cells)};
}

void check_normalized(std::span<const Point3> coords) {
  for (const auto& p : coords)
    for (float v : p)
      if (!(v >= 0.0f && v <= 1.0f)) throw ContractError("coordinates must be normalized to [0, 1]");
}

}  // namespace

template <typename T>
SparseTensor<T>::SparseTensor(std::vector<VoxelCoord> coords, Tensor<T> features, int stride,
                              std::shared_ptr<const CoordHashTable> hash)
    : coords_(std::move(coords)), features_(std::move(features)), stride_(stride), hash_(std::move(hash)) {
  if (coords_.empty()) throw ContractError("sparse tensor needs at least one active voxel");
  if (stride_ < 1) throw ContractError("sparse tensor stride must be positive");
  if (features_.rank() != 2 || features_.dim(0) != coords_.size()) {
    throw DimensionError("sparse tensor: " + std::to_string(coords_.size()) + " coordinates but features " +
                         ad::to_string(features_.shape()));
  }
  for (const auto& c : coords_) {
    for (int d = 1; d < 4; ++d) {
      if (c[d] % stride_ != 0) {
        throw ContractError("coordinate " + to_string(c) + " is not a multiple of stride " + std::to_string(stride_));
      }
    }
  }
  if (!hash_) {
    hash_ = std::make_shared<CoordHashTable>(coords_);
  } else if (hash_->size() != coords_.size()) {
    throw ContractError("sparse tensor hash does not index its coordinates");
  }
}

int grid_cells(double voxel_size) {
  return std::max(1, static_cast<int>(std::ceil(1.0 / voxel_size - 1e-9)));
}

int sparse_cell(float p, double voxel_size, int cells) {
  const double scaled = static_cast<double>(p) / voxel_size;
  int i = scaled <= 0.0 ? 0 : static_cast<int>(scaled);
  return i >= cells ? cells - 1 : i;
}

SparseAssignment assign_sparse(std::span<const Point3> coords, double voxel_size, int batch) {
  check_voxel_size(voxel_size);
  check_normalized(coords);
  SparseAssignment a;
  a.voxel_size = voxel_size;
  a.hash = std::make_shared<CoordHashTable>();
  a.point_to_voxel.resize(coords.size());
  const int cells = grid_cells(voxel_size);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto [row, inserted] = a.hash->insert(point_cell(coords[k], voxel_size, cells, batch));
    if (inserted) a.counts.push_back(0);
    ++a.counts[row];
    a.point_to_voxel[k] = static_cast<std::uint32_t>(row);
  }
  a.coords = a.hash->keys();
  a.probes = a.hash->insert_probes();
  return a;
}

SparseAssignment assign_sparse_naive(std::span<const Point3> coords, double voxel_size, int batch) {
  check_voxel_size(voxel_size);
  check_normalized(coords);
  SparseAssignment a;
  a.voxel_size = voxel_size;
  a.point_to_voxel.resize(coords.size());
  const int cells = grid_cells(voxel_size);
  // Linear scan over packed keys; each component fits in 16 bits.
  auto pack = [](const VoxelCoord& c) {
    std::uint64_t k = 0;
    for (auto v : c) k = (k << 16) | static_cast<std::uint16_t>(v);
    return k;
  };
  std::vector<std::uint64_t> keys;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto c = point_cell(coords[k], voxel_size, cells, batch);
    const auto key = pack(c);
    const std::size_t row = static_cast<std::size_t>(std::find(keys.begin(), keys.end(), key) - keys.begin());
    a.probes += row == keys.size() ? row : row + 1;
    if (row == keys.size()) {
      keys.push_back(key);
      a.coords.push_back(c);
      a.counts.push_back(0);
    }
    ++a.counts[row];
    a.point_to_voxel[k] = static_cast<std::uint32_t>(row);
  }
  a.hash = std::make_shared<CoordHashTable>(a.coords);
  return a;
}

template <typename T>
Tensor<T> sparse_voxelize(const Tensor<T>& features, const SparseAssignment& a) {
  if (features.rank() != 2 || features.dim(0) != a.point_to_voxel.size()) {
    throw DimensionError("sparse_voxelize: features " + ad::to_string(features.shape()) + " for " +
                         std::to_string(a.point_to_voxel.size()) + " assigned points");
  }
  const std::size_t n = features.dim(0), c = features.dim(1), m = a.coords.size();
  std::vector<T> out(m * c, T{0});
  const auto f = features.data();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < c; ++j) out[a.point_to_voxel[k] * c + j] += f[k * c + j];
  for (std::size_t row = 0; row < m; ++row)
    if (a.counts[row] > 1)
      for (std::size_t j = 0; j < c; ++j) out[row * c + j] /= static_cast<T>(a.counts[row]);
  auto p2v = std::make_shared<std::vector<std::uint32_t>>(a.point_to_voxel);
  auto counts = std::make_shared<std::vector<std::uint32_t>>(a.counts);
  return ad::make_result<T>("sparse_voxelize", Shape{m, c}, std::move(out), {features},
                            [p2v, counts, n, c](NodeT<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              for (std::size_t k = 0; k < n; ++k) {
                                const auto row = (*p2v)[k];
                                const T inv = T{1} / static_cast<T>((*counts)[row]);
                                for (std::size_t j = 0; j < c; ++j) g[k * c + j] += self.grad[row * c + j] * inv;
                              }
                            });
}

namespace {

SparseVoxelization finish_voxelization(const cloud::PointCloud& pc, SparseAssignment a) {
  if (!pc.normalized()) throw ContractError("sparse_voxelize expects a normalized point cloud");
  auto features = sparse_voxelize(pv::feature_tensor<float>(pc), a);
  std::shared_ptr<const CoordHashTable> hash = a.hash;
  return {SparseTensor<float>(std::move(a.coords), features.detach(), 1, hash), std::move(a.point_to_voxel),
          a.probes};
}

}  // namespace

SparseVoxelization sparse_voxelize(const cloud::PointCloud& pc, double voxel_size) {
  if (!pc.normalized()) throw ContractError("sparse_voxelize expects a normalized point cloud");
  return finish_voxelization(pc, assign_sparse(pc.coords(), voxel_size));
}

SparseVoxelization sparse_voxelize_naive(const cloud::PointCloud& pc, double voxel_size) {
  if (!pc.normalized()) throw ContractError("sparse_voxelize expects a normalized point cloud");
  return finish_voxelization(pc, assign_sparse_naive(pc.coords(), voxel_size));
}

std::size_t KernelMap::total_pairs() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.size();
  return n;
}

KernelMap build_kernel_map(const std::vector<VoxelCoord>& in_coords, int in_stride, int conv_stride,
                           const CoordHashTable* in_hash) {
  if (in_stride < 1) throw ContractError("kernel map: input stride must be positive");
  if (conv_stride != 1 && conv_stride != 2) {
    throw ContractError("kernel map: unsupported convolution stride " + std::to_string(conv_stride));
  }
  std::unique_ptr<CoordHashTable> owned;
  if (!in_hash) {
    owned = std::make_unique<CoordHashTable>(in_coords);
    in_hash = owned.get();
  }
  KernelMap map;
  map.in_stride = in_stride;
  map.out_stride = in_stride * conv_stride;
  map.in_coords = in_coords;
  if (conv_stride == 1) {
    map.out_coords = in_coords;
  } else {
    CoordHashTable out_hash;
    for (const auto& c : in_coords) {
      out_hash.insert({c[0], floor_to_multiple(c[1], map.out_stride), floor_to_multiple(c[2], map.out_stride),
                       floor_to_multiple(c[3], map.out_stride)});
    }
    map.out_coords = out_hash.keys();
  }
  for (int off = 0; off < kKernelVolume; ++off) {
    const auto d = offset_delta(off);
    auto& list = map.pairs[off];
    for (std::size_t o = 0; o < map.out_coords.size(); ++o) {
      const auto& oc = map.out_coords[o];
      const VoxelCoord q = {oc[0], oc[1] + d[0] * in_stride, oc[2] + d[1] * in_stride, oc[3] + d[2] * in_stride};
      const auto i = in_hash->find(q);
      if (i != CoordHashTable::kMiss) list.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(o));
    }
  }
  return map;
}

KernelMap transpose_kernel_map(const KernelMap& down) {
  KernelMap up;
  up.in_stride = down.out_stride;
  up.out_stride = down.in_stride;
  up.transposed = !down.transposed;
  up.in_coords = down.out_coords;
  up.out_coords = down.in_coords;
  for (int off = 0; off < kKernelVolume; ++off) {
    up.pairs[off].reserve(down.pairs[off].size());
    for (const auto& [i, o] : down.pairs[off]) up.pairs[off].emplace_back(o, i);
  }
  return up;
}

template <typename T>
Tensor<T> sparse_conv(const Tensor<T>& features, const Tensor<T>& weight, const KernelMap& map) {
  if (features.rank() != 2 || features.dim(0) != map.in_count()) {
    throw ContractError("sparse_conv: kernel map expects " + std::to_string(map.in_count()) +
                        " input rows, got features " + ad::to_string(features.shape()));
  }
  if (weight.rank() != 3 || weight.dim(0) != kKernelVolume || weight.dim(1) != features.dim(1)) {
    throw DimensionError("sparse_conv: weight " + ad::to_string(weight.shape()) + " does not match features " +
                         ad::to_string(features.shape()));
  }
  const std::size_t cin = weight.dim(1), cout = weight.dim(2), m_out = map.out_count();
  std::vector<T> out(m_out * cout, T{0});
  const auto f = features.data();
  const auto w = weight.data();
  RowMat<T> gathered, product;
  std::uint64_t macs = 0;
  for (int off = 0; off < kKernelVolume; ++off) {
    const auto& list = map.pairs[off];
    if (list.empty()) continue;
    gathered.resize(static_cast<Eigen::Index>(list.size()), static_cast<Eigen::Index>(cin));
    for (std::size_t p = 0; p < list.size(); ++p)
      for (std::size_t j = 0; j < cin; ++j) gathered(p, j) = f[list[p].first * cin + j];
    Eigen::Map<const RowMat<T>> wk(w.data() + off * cin * cout, cin, cout);
    product.noalias() = gathered * wk;
    for (std::size_t p = 0; p < list.size(); ++p)
      for (std::size_t j = 0; j < cout; ++j) out[list[p].second * cout + j] += product(p, j);
    macs += list.size() * cin * cout;
  }
  MacCounter::add(macs);
  auto shared = std::make_shared<std::array<std::vector<std::pair<std::int32_t, std::int32_t>>, kKernelVolume>>(
      map.pairs);
  return ad::make_result<T>(
      "sparse_conv", Shape{m_out, cout}, std::move(out), {features, weight},
      [shared, cin, cout](NodeT<T>& self) {
        auto& pf = *self.parents[0];
        auto& pw = *self.parents[1];
        RowMat<T> gathered, gout;
        for (int off = 0; off < kKernelVolume; ++off) {
          const auto& list = (*shared)[off];
          if (list.empty()) continue;
          const auto n = static_cast<Eigen::Index>(list.size());
          gout.resize(n, static_cast<Eigen::Index>(cout));
          for (std::size_t p = 0; p < list.size(); ++p)
            for (std::size_t j = 0; j < cout; ++j) gout(p, j) = self.grad[list[p].second * cout + j];
          if (pw.requires_grad) {
            gathered.resize(n, static_cast<Eigen::Index>(cin));
            for (std::size_t p = 0; p < list.size(); ++p)
              for (std::size_t j = 0; j < cin; ++j) gathered(p, j) = pf.value[list[p].first * cin + j];
            Eigen::Map<RowMat<T>>(pw.ensure_grad().data() + off * cin * cout, cin, cout).noalias() +=
                gathered.transpose() * gout;
          }
          if (pf.requires_grad) {
            Eigen::Map<const RowMat<T>> wk(pw.value.data() + off * cin * cout, cin, cout);
            RowMat<T> gin = gout * wk.transpose();
            auto& g = pf.ensure_grad();
            for (std::size_t p = 0; p < list.size(); ++p)
              for (std::size_t j = 0; j < cin; ++j) g[list[p].first * cin + j] += gin(p, j);
          }
        }
      });
}

template <typename T>
SparseTensor<T> sparse_conv(const SparseTensor<T>& in, const Tensor<T>& weight, const KernelMap& map) {
  if (in.stride() != map.in_stride) {
    throw ContractError("sparse_conv: tensor stride " + std::to_string(in.stride()) + " but map built for " +
                        std::to_string(map.in_stride));
  }
  auto out = sparse_conv(in.features(), weight, map);
  std::shared_ptr<const CoordHashTable> hash = map.transposed || map.out_stride != map.in_stride
                                                   ? nullptr
                                                   : in.shared_hash();
  return SparseTensor<T>(map.out_coords, std::move(out), map.out_stride, std::move(hash));
}

pv::Stencil sparse_trilinear_stencil(std::span<const Point3> coords, const CoordHashTable& hash,
                                     double voxel_size, int stride, int batch) {
  check_voxel_size(voxel_size);
  check_normalized(coords);
  pv::Stencil s;
  s.sources = hash.size();
  s.index.resize(coords.size());
  s.weight.resize(coords.size());
  const double cell = voxel_size * stride;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    int lo[3];
    double t[3];
    for (int d = 0; d < 3; ++d) {
      const double x = static_cast<double>(coords[k][d]) / cell - 0.5;
      const double f = std::floor(x);
      lo[d] = static_cast<int>(f);
      t[d] = x - f;
    }
    for (int corner = 0; corner < 8; ++corner) {
      VoxelCoord q = {batch, 0, 0, 0};
      double w = 1.0;
      for (int d = 0; d < 3; ++d) {
        const int bit = (corner >> (2 - d)) & 1;
        q[d + 1] = (lo[d] + bit) * stride;
        w *= bit ? t[d] : 1.0 - t[d];
      }
      const auto row = hash.find(q);
      s.index[k][corner] = row;
      s.weight[k][corner] = row == CoordHashTable::kMiss ? 0.0 : w;
    }
  }
  return s;
}

#define PVKIT_INSTANTIATE_SPARSE(T)                                                                  \
  template class SparseTensor<T>;                                                                    \
  template Tensor<T> sparse_voxelize<T>(const Tensor<T>&, const SparseAssignment&);                  \
  template Tensor<T> sparse_conv<T>(const Tensor<T>&, const Tensor<T>&, const KernelMap&);           \
  template SparseTensor<T> sparse_conv<T>(const SparseTensor<T>&, const Tensor<T>&, const KernelMap&);

PVKIT_INSTANTIATE_SPARSE(float)
PVKIT_INSTANTIATE_SPARSE(double)

}  // namespace pvkit::sparse
