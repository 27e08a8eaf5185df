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

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "pvkit/autodiff/ops.hpp"
#include "pvkit/common/counters.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/spvconv/coord_hash.hpp"
#include "pvkit/spvconv/sparse_ops.hpp"
#include "pvkit/spvconv/spvconv.hpp"

namespace pvkit::sparse {
namespace {

using ad::Mode;
using ad::Tensor;
using testing::max_gradient_error;
using testing::random_tensor;

std::vector<VoxelCoord> random_unique_coords(std::size_t n, int extent, Rng& rng, int stride = 1) {
  std::set<VoxelCoord> seen;
  std::vector<VoxelCoord> out;
  while (out.size() < n) {
    VoxelCoord c = {static_cast<int>(uniform_int(rng, 0, 1)), 0, 0, 0};
    for (int d = 1; d < 4; ++d) c[d] = static_cast<int>(uniform_int(rng, 0, extent / stride - 1)) * stride;
    if (seen.insert(c).second) out.push_back(c);
  }
  return out;
}

cloud::PointCloud random_cloud(std::size_t n, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point3> coords(n);
  for (auto& p : coords)
    for (float& v : p) v = static_cast<float>(uniform01(rng));
  std::vector<float> f(n * c);
  for (float& v : f) v = static_cast<float>(uniform_real(rng, -2, 2));
  return cloud::PointCloud(std::move(coords), std::move(f), c, std::nullopt, cloud::CoordSpace::kNormalized);
}

TEST(CoordHash, HitAndMiss) {
  const std::vector<VoxelCoord> coords = {{0, 0, 0, 0}};
  const CoordHashTable table(coords);
  EXPECT_EQ(table.find({0, 0, 0, 0}), 0);
  EXPECT_EQ(table.find({0, 1, 1, 1}), CoordHashTable::kMiss);
  EXPECT_GE(table.capacity(), 2 * table.size());
}

TEST(CoordHash, SelfLookupAndLinearScanAgree) {
  Rng rng(1);
  const auto coords = random_unique_coords(1000, 64, rng);
  const CoordHashTable table(coords);
  for (std::size_t i = 0; i < coords.size(); ++i) EXPECT_EQ(table.find(coords[i]), static_cast<std::int64_t>(i));
  EXPECT_LE(2 * table.size(), table.capacity());
  for (int q = 0; q < 500; ++q) {
    VoxelCoord c = {static_cast<int>(uniform_int(rng, 0, 2)), static_cast<int>(uniform_int(rng, -2, 64)),
                    static_cast<int>(uniform_int(rng, 0, 64)), static_cast<int>(uniform_int(rng, 0, 64))};
    std::int64_t expect = CoordHashTable::kMiss;
    for (std::size_t i = 0; i < coords.size(); ++i)
      if (coords[i] == c) expect = static_cast<std::int64_t>(i);
    std::uint64_t probes = 0;
    EXPECT_EQ(table.find(c, &probes), expect);
    EXPECT_LE(probes, table.max_probe_length() + 1);
  }
}

TEST(CoordHash, DuplicateNamesCoordinate) {
  const std::vector<VoxelCoord> coords = {{0, 1, 2, 3}, {0, 4, 5, 6}, {0, 1, 2, 3}};
  try {
    CoordHashTable table(coords);
    FAIL() << "expected a duplicate error";
  } catch (const DuplicateCoordinateError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 1, 2, 3)"), std::string::npos);
  }
}

TEST(CoordHash, OutOfRangeRejected) {
  CoordHashTable table;
  EXPECT_THROW(table.insert({0, 40000, 0, 0}), ContractError);
}

TEST(CoordHash, FnvMatchesReference) {
  // FNV-1a of eight zero bytes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < 8; ++i) h = (h ^ 0u) * 0x100000001b3ULL;
  EXPECT_EQ(hash_coord({0, 0, 0, 0}), h);
  EXPECT_NE(hash_coord({0, 0, 0, 1}), hash_coord({0, 0, 1, 0}));
}

TEST(CoordHash, IncrementalInsertKeepsLoadAndProbeBounds) {
  Rng rng(2);
  const auto coords = random_unique_coords(5000, 128, rng);
  CoordHashTable table;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto [row, inserted] = table.insert(coords[i]);
    EXPECT_TRUE(inserted);
    EXPECT_EQ(row, static_cast<std::int64_t>(i));
  }
  EXPECT_EQ(table.insert(coords[17]).first, 17);
  EXPECT_LE(2 * table.size(), table.capacity());
  EXPECT_LT(table.max_probe_length(), CoordHashTable::kProbeLimit);
}

TEST(SparseVoxelize, DistinctCellsAreBijective) {
  const cloud::PointCloud pc({{0.1f, 0.1f, 0.1f}, {0.6f, 0.1f, 0.1f}, {0.1f, 0.9f, 0.6f}}, {1, 2, 3}, 1, std::nullopt,
                             cloud::CoordSpace::kNormalized);
  const auto v = sparse_voxelize(pc, 0.5);
  EXPECT_EQ(v.tensor.size(), 3u);
  std::set<std::uint32_t> rows(v.point_to_voxel.begin(), v.point_to_voxel.end());
  EXPECT_EQ(rows.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(v.tensor.features().at(v.point_to_voxel[k]), pc.features()[k]);
}

TEST(SparseVoxelize, SingleCellAverages) {
  const cloud::PointCloud pc({{0.1f, 0.1f, 0.1f}, {0.2f, 0.3f, 0.4f}, {0.45f, 0.0f, 0.2f}}, {1, 2, 6}, 1,
                             std::nullopt, cloud::CoordSpace::kNormalized);
  const auto v = sparse_voxelize(pc, 0.5);
  ASSERT_EQ(v.tensor.size(), 1u);
  EXPECT_FLOAT_EQ(v.tensor.features().item(), 3.0f);
}

TEST(SparseVoxelize, MatchesNaiveLinearSearch) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 500 + seed * 500;
    const auto pc = random_cloud(n, 3, seed);
    const double vs = seed % 2 ? 1.0 / 24 : 0.07;
    const auto fast = sparse_voxelize(pc, vs);
    const auto slow = sparse_voxelize_naive(pc, vs);
    ASSERT_EQ(fast.point_to_voxel, slow.point_to_voxel);
    ASSERT_EQ(fast.tensor.coords(), slow.tensor.coords());
    const auto a = fast.tensor.features().data(), b = slow.tensor.features().data();
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
  }
}

TEST(SparseVoxelize, ProbesGrowLinearly) {
  // Fixed occupancy: voxel size shrinks with N so points per voxel stay ~1.
  std::vector<double> log_n, log_probes;
  for (std::size_t n : {2000u, 4000u, 8000u, 16000u}) {
    const auto pc = random_cloud(n, 1, n);
    const double vs = 1.0 / std::cbrt(static_cast<double>(n));
    const auto a = assign_sparse(pc.coords(), vs);
    EXPECT_LE(a.probes, 4 * (a.coords.size() + n));
    log_n.push_back(std::log(static_cast<double>(n)));
    log_probes.push_back(std::log(static_cast<double>(a.probes)));
  }
  const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / 4;
  const double my = std::accumulate(log_probes.begin(), log_probes.end(), 0.0) / 4;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (log_n[i] - mx) * (log_probes[i] - my);
    sxx += (log_n[i] - mx) * (log_n[i] - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_GE(slope, 0.9);
  EXPECT_LE(slope, 1.5);
}

// Brute force: every (input, output, offset) triple.
KernelMap brute_force_map(const std::vector<VoxelCoord>& in, const std::vector<VoxelCoord>& out, int in_stride) {
  KernelMap map;
  for (int off = 0; off < kKernelVolume; ++off) {
    const auto d = offset_delta(off);
    for (std::size_t o = 0; o < out.size(); ++o)
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i][0] == out[o][0] && in[i][1] == out[o][1] + d[0] * in_stride &&
            in[i][2] == out[o][2] + d[1] * in_stride && in[i][3] == out[o][3] + d[2] * in_stride) {
          map.pairs[off].emplace_back(static_cast<int>(i), static_cast<int>(o));
        }
      }
  }
  return map;
}

TEST(KernelMap, SingleVoxel) {
  const auto map = build_kernel_map({{0, 2, 2, 2}}, 1, 1);
  EXPECT_EQ(map.total_pairs(), 1u);
  EXPECT_EQ(map.pairs[13].size(), 1u);
}

TEST(KernelMap, AdjacentPair) {
  const auto map = build_kernel_map({{0, 1, 1, 1}, {0, 2, 1, 1}}, 1, 1);
  EXPECT_EQ(map.pairs[offset_index(0, 0, 0)].size(), 2u);
  EXPECT_EQ(map.pairs[offset_index(1, 0, 0)].size(), 1u);
  EXPECT_EQ(map.pairs[offset_index(-1, 0, 0)].size(), 1u);
  EXPECT_EQ(map.total_pairs(), 4u);
}

TEST(KernelMap, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto in = random_unique_coords(20 + seed * 4, 4, rng);
    const auto map = build_kernel_map(in, 1, 1);
    const auto expect = brute_force_map(in, map.out_coords, 1);
    for (int off = 0; off < kKernelVolume; ++off) EXPECT_EQ(map.pairs[off], expect.pairs[off]);

    const auto down = build_kernel_map(in, 1, 2);
    std::set<VoxelCoord> sites;
    for (const auto& c : in) sites.insert({c[0], c[1] / 2 * 2, c[2] / 2 * 2, c[3] / 2 * 2});
    EXPECT_EQ(std::set<VoxelCoord>(down.out_coords.begin(), down.out_coords.end()), sites);
    const auto expect_down = brute_force_map(in, down.out_coords, 1);
    for (int off = 0; off < kKernelVolume; ++off) EXPECT_EQ(down.pairs[off], expect_down.pairs[off]);

    const auto down2 = build_kernel_map(down.out_coords, 2, 2);
    const auto expect2 = brute_force_map(down.out_coords, down2.out_coords, 2);
    for (int off = 0; off < kKernelVolume; ++off) EXPECT_EQ(down2.pairs[off], expect2.pairs[off]);
  }
}

TEST(KernelMap, PairCountsArePermutationInvariant) {
  Rng rng(5);
  auto in = random_unique_coords(60, 5, rng);
  const auto a = build_kernel_map(in, 1, 2);
  for (std::size_t i = in.size(); i > 1; --i) std::swap(in[i - 1], in[uniform_int(rng, 0, i - 1)]);
  const auto b = build_kernel_map(in, 1, 2);
  for (int off = 0; off < kKernelVolume; ++off) EXPECT_EQ(a.pairs[off].size(), b.pairs[off].size());
}

TEST(KernelMap, TransposeInvertsPairs) {
  Rng rng(6);
  const auto in = random_unique_coords(30, 6, rng);
  const auto down = build_kernel_map(in, 1, 2);
  const auto up = transpose_kernel_map(down);
  EXPECT_EQ(up.out_coords, in);
  EXPECT_EQ(up.in_stride, 2);
  EXPECT_EQ(up.out_stride, 1);
  EXPECT_EQ(up.total_pairs(), down.total_pairs());
  EXPECT_EQ(transpose_kernel_map(up).pairs, down.pairs);
}

TEST(SparseConv, IdentityCenterWeight) {
  Rng rng(7);
  const auto coords = random_unique_coords(15, 4, rng);
  const auto map = build_kernel_map(coords, 1, 1);
  auto f = random_tensor({15, 3}, rng, false);
  std::vector<double> w(27 * 9, 0.0);
  for (int i = 0; i < 3; ++i) w[13 * 9 + i * 3 + i] = 1.0;
  const auto out = sparse_conv(f, Tensor<double>({27, 3, 3}, w), map);
  for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_EQ(out.at(i), f.at(i));
}

TEST(SparseConv, MacsEqualPairsTimesChannels) {
  const auto map = build_kernel_map({{0, 0, 0, 0}}, 1, 1);
  const auto f = Tensor<float>::full({1, 2}, 1.0f);
  const auto w = Tensor<float>::full({27, 2, 3}, 0.5f);
  ScopedMacCount count;
  sparse_conv(f, w, map);
  EXPECT_EQ(count.elapsed(), 6u);

  Rng rng(8);
  const auto coords = random_unique_coords(40, 5, rng);
  const auto big = build_kernel_map(coords, 1, 1);
  ScopedMacCount count2;
  sparse_conv(Tensor<float>::full({40, 4}, 1.0f), Tensor<float>::full({27, 4, 5}, 0.1f), big);
  EXPECT_EQ(count2.elapsed(), big.total_pairs() * 4 * 5);
}

TEST(SparseConv, MapMismatchIsContractError) {
  const auto map = build_kernel_map({{0, 0, 0, 0}, {0, 1, 0, 0}}, 1, 1);
  EXPECT_THROW(sparse_conv(Tensor<float>::zeros({3, 2}), Tensor<float>::zeros({27, 2, 2}), map), ContractError);
  EXPECT_THROW(sparse_conv(Tensor<float>::zeros({2, 2}), Tensor<float>::zeros({27, 3, 2}), map), DimensionError);
}

// Scatter sparse rows into a channel-major dense grid of extent r.
Tensor<float> densify(const std::vector<VoxelCoord>& coords, std::span<const float> f, std::size_t c, int r) {
  std::vector<float> grid(c * r * r * r, 0.0f);
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (std::size_t j = 0; j < c; ++j)
      grid[j * r * r * r + pv::flat_cell(coords[i][1], coords[i][2], coords[i][3], r)] = f[i * c + j];
  return Tensor<float>({c, static_cast<std::size_t>(r), static_cast<std::size_t>(r), static_cast<std::size_t>(r)},
                       grid);
}

TEST(SparseConv, EquivalentToDenseAtActiveSites) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int r = 4 + static_cast<int>(seed % 3);
    const std::size_t cin = 2, cout = 3;
    std::vector<VoxelCoord> coords;
    for (const auto& c : random_unique_coords(12 + seed, r, rng)) coords.push_back({0, c[1], c[2], c[3]});
    std::set<VoxelCoord> unique(coords.begin(), coords.end());
    coords.assign(unique.begin(), unique.end());
    std::vector<float> f(coords.size() * cin), wd(cout * cin * 27);
    for (auto& v : f) v = static_cast<float>(uniform_real(rng, -1, 1));
    for (auto& v : wd) v = static_cast<float>(uniform_real(rng, -1, 1));
    // Dense [co][ci][x][y][z] tap (d + 1) is the sparse weight at offset d.
    std::vector<float> ws(27 * cin * cout);
    for (int off = 0; off < 27; ++off)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t co = 0; co < cout; ++co) ws[(off * cin + ci) * cout + co] = wd[(co * cin + ci) * 27 + off];
    const Tensor<float> feats({coords.size(), cin}, f), wsparse({27, cin, cout}, ws),
        wdense({cout, cin, 3, 3, 3}, wd);
    const auto grid = densify(coords, f, cin, r);
    for (int stride : {1, 2}) {
      const auto map = build_kernel_map(coords, 1, stride);
      const auto out = sparse_conv(feats, wsparse, map);
      const auto dense = ad::conv3d_dense(grid, wdense, stride);
      const std::size_t ro = dense.dim(1), sites = ro * ro * ro;
      double worst = 0.0;
      for (std::size_t o = 0; o < map.out_count(); ++o) {
        const auto& oc = map.out_coords[o];
        const auto cell = pv::flat_cell(oc[1] / stride, oc[2] / stride, oc[3] / stride, static_cast<int>(ro));
        for (std::size_t co = 0; co < cout; ++co)
          worst = std::max(worst, static_cast<double>(std::abs(out.at(o * cout + co) - dense.at(co * sites + cell))));
      }
      EXPECT_LT(worst, 1e-5) << "seed " << seed << " stride " << stride;
    }
  }
}

TEST(SparseConv, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto coords = random_unique_coords(10, 3, rng);
    const int stride = seed % 2 ? 2 : 1;
    const auto map = build_kernel_map(coords, 1, stride);
    auto f = random_tensor({10, 2}, rng);
    auto w = random_tensor({27, 2, 3}, rng);
    const auto proj = testing::random_values(map.out_count() * 3, rng);
    EXPECT_LT(max_gradient_error({f, w}, [&] { return ad::weighted_sum(sparse_conv(f, w, map), std::span<const double>(proj)); }),
              1e-4);
    const auto up = transpose_kernel_map(map);
    auto g = random_tensor({map.out_count(), 3}, rng);
    auto wu = random_tensor({27, 3, 2}, rng);
    const auto proj_up = testing::random_values(10 * 2, rng);
    EXPECT_LT(max_gradient_error({g, wu}, [&] { return ad::weighted_sum(sparse_conv(g, wu, up), std::span<const double>(proj_up)); }),
              1e-4);
  }
}

TEST(SparseTensor, ValidatesInvariants) {
  EXPECT_THROW(SparseTensor<float>({}, Tensor<float>::zeros({1, 1}), 1), ContractError);
  EXPECT_THROW(SparseTensor<float>({{0, 1, 0, 0}}, Tensor<float>::zeros({1, 1}), 2), ContractError);
  EXPECT_THROW(SparseTensor<float>({{0, 0, 0, 0}, {0, 0, 0, 0}}, Tensor<float>::zeros({2, 1}), 1),
               DuplicateCoordinateError);
  EXPECT_THROW(SparseTensor<float>({{0, 0, 0, 0}}, Tensor<float>::zeros({2, 1}), 1), DimensionError);
  const SparseTensor<float> ok({{0, 2, 4, 0}}, Tensor<float>::zeros({1, 3}), 2);
  EXPECT_EQ(ok.hash().find({0, 2, 4, 0}), 0);
}

TEST(SparseDevoxelize, ActiveCenterIsVerbatim) {
  const double vs = 0.25;
  const SparseTensor<double> st({{0, 1, 2, 3}}, Tensor<double>({1, 2}, {1.5, -2.0}), 1);
  const std::vector<Point3> p = {{1.5f * 0.25f, 2.5f * 0.25f, 3.5f * 0.25f}};
  const auto out = sparse_devoxelize_trilinear(st, p, vs);
  EXPECT_NEAR(out.at(0), 1.5, 1e-6);
  EXPECT_NEAR(out.at(1), -2.0, 1e-6);
}

TEST(SparseDevoxelize, ConstantWhenAllCornersActive) {
  std::vector<VoxelCoord> coords;
  for (int u = 0; u < 2; ++u)
    for (int v = 0; v < 2; ++v)
      for (int w = 0; w < 2; ++w) coords.push_back({0, 1 + u, 1 + v, 1 + w});
  const SparseTensor<double> st(coords, Tensor<double>::full({8, 1}, 0.7), 1);
  Rng rng(3);
  std::vector<Point3> pts;
  for (int i = 0; i < 50; ++i) {
    Point3 p;
    for (float& v : p) v = static_cast<float>(uniform_real(rng, 1.5 * 0.2, 2.5 * 0.2));
    pts.push_back(p);
  }
  const auto out = sparse_devoxelize_trilinear(st, pts, 0.2);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(out.at(i), 0.7, 1e-6);
}

TEST(SparseDevoxelize, MatchesDenseTrilinear) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const int r = 5;
    std::vector<VoxelCoord> coords;
    for (const auto& c : random_unique_coords(40, r, rng)) coords.push_back({0, c[1], c[2], c[3]});
    std::set<VoxelCoord> unique(coords.begin(), coords.end());
    coords.assign(unique.begin(), unique.end());
    std::vector<float> f(coords.size() * 2);
    for (auto& v : f) v = static_cast<float>(uniform_real(rng, -1, 1));
    const SparseTensor<float> st(coords, Tensor<float>({coords.size(), 2}, f), 1);
    const auto grid = densify(coords, f, 2, r);
    std::vector<Point3> pts(100);
    for (auto& p : pts)
      for (float& v : p) v = static_cast<float>(uniform01(rng));
    const auto a = sparse_devoxelize_trilinear(st, pts, 1.0 / r);
    const auto b = pv::devoxelize_trilinear(grid, pts);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.at(i), b.at(i), 1e-6);
  }
}

TEST(SparseDevoxelize, StrideTwoCenters) {
  // A stride-2 voxel at u = 2 spans [2, 4) fine cells; its center is 3 * vs.
  const double vs = 0.1;
  const SparseTensor<double> st({{0, 2, 2, 2}}, Tensor<double>({1, 1}, {4.0}), 2);
  const std::vector<Point3> p = {{0.3f, 0.3f, 0.3f}};
  EXPECT_NEAR(sparse_devoxelize_trilinear(st, p, vs).item(), 4.0, 1e-6);
}

TEST(SparseDevoxelize, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<VoxelCoord> coords;
    for (const auto& c : random_unique_coords(20, 3, rng)) coords.push_back({0, c[1], c[2], c[3]});
    std::set<VoxelCoord> unique(coords.begin(), coords.end());
    coords.assign(unique.begin(), unique.end());
    auto f = random_tensor({coords.size(), 2}, rng);
    const SparseTensor<double> st(coords, f, 1);
    std::vector<Point3> pts(8);
    for (auto& p : pts)
      for (float& v : p) v = static_cast<float>(uniform01(rng));
    const auto proj = testing::random_values(16, rng);
    EXPECT_LT(max_gradient_error(
                  {f}, [&] { return ad::weighted_sum(sparse_devoxelize_trilinear(st, pts, 1.0 / 3), std::span<const double>(proj)); }),
              1e-4);
  }
}

SPVConvBlockConfig spv_block(std::size_t in, std::size_t out, double vs, int depth) {
  SPVConvBlockConfig c;
  c.in_channels = in;
  c.out_channels = out;
  c.voxel_size = vs;
  c.voxel_depth = depth;
  return c;
}

TEST(SPVConvBlock, ZeroSparseWeightsLeavePointBranch) {
  Rng rng(1);
  SPVConvBlock<double> block(spv_block(3, 4, 0.25, 2), rng);
  for (std::size_t i = 0; i < block.voxel_depth(); ++i)
    for (auto& v : block.conv_weight(i).mutable_data()) v = 0.0;
  const auto pc = random_cloud(30, 3, 2);
  const auto x = pv::feature_tensor<double>(pc);
  const auto out = block.forward(x, pc.coords(), Mode::kTrain);
  const auto point = block.point_mlp().forward(x, Mode::kTrain);
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out.at(i), point.at(i), 1e-12);
}

TEST(SPVConvBlock, IdentityBranchesDoubleTheInput) {
  Rng rng(2);
  const std::size_t c = 2;
  const double vs = 0.25;
  SPVConvBlock<double> block(spv_block(c, c, vs, 1), rng);
  auto w = block.conv_weight(0).mutable_data();
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < c; ++i) w[13 * c * c + i * c + i] = 1.0;
  auto lin = block.point_mlp().linear(0).weight().mutable_data();
  std::fill(lin.begin(), lin.end(), 0.0);
  for (std::size_t i = 0; i < c; ++i) lin[i * c + i] = 1.0;
  auto center = [vs](int u, int v, int w) {
    return Point3{static_cast<float>((u + 0.5) * vs), static_cast<float>((v + 0.5) * vs),
                  static_cast<float>((w + 0.5) * vs)};
  };
  const std::vector<Point3> pts = {center(0, 0, 0), center(1, 2, 3), center(3, 3, 0), center(2, 1, 1)};
  std::vector<double> f;
  for (std::size_t i = 0; i < pts.size() * c; ++i) f.push_back(0.25 + 0.5 * static_cast<double>(i));
  const auto out = block.forward(Tensor<double>({pts.size(), c}, f), pts, Mode::kEval);
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out.at(i), 2.0 * f[i], 1e-4 * f[i]);
}

TEST(SPVConvBlock, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    SPVConvBlock<double> block(spv_block(2, 3, 1.0 / 3, 1), rng);
    const auto pc = random_cloud(10, 2, 50 + seed);
    auto x = random_tensor({10, 2}, rng);
    std::vector<ad::NamedParameter<double>> named;
    block.collect("b", named);
    std::vector<Tensor<double>> params = {x};
    for (auto& p : named) params.push_back(p.tensor);
    const auto w = testing::random_values(30, rng);
    const auto coords = pc.coords();
    EXPECT_LT(max_gradient_error(params,
                                 [&] {
                                   return ad::weighted_sum(block.forward(x, coords, Mode::kTrain),
                                                           std::span<const double>(w));
                                 }),
              1e-4)
        << "seed " << seed;
  }
}

TEST(Spvcnn, ShapeAndPermutation) {
  SpvcnnConfig config;
  config.in_channels = 3;
  config.num_classes = 4;
  config.blocks = {spv_block(0, 8, 0.1, 1), spv_block(0, 8, 0.25, 1)};
  config.head_widths = {8};
  Spvcnn<double> model(config, 4);
  const auto pc = random_cloud(80, 3, 9);
  const auto a = model.forward(pc, Mode::kEval);
  EXPECT_EQ(a.shape(), (ad::Shape{80, 4}));
  std::vector<std::size_t> order(80);
  std::iota(order.rbegin(), order.rend(), 0);
  const auto b = model.forward(pc.permuted(order), Mode::kEval);
  for (std::size_t i = 0; i < 80; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(b.at(i * 4 + j), a.at(order[i] * 4 + j), 1e-9);
  EXPECT_EQ(spvcnn_config_from_json(to_json(model.config())).blocks.size(), 2u);
}

}  // namespace
}  // namespace pvkit::sparse
