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

// Acceptance suite: one PASS/FAIL line per criterion. Criteria may be
// selected by name on the command line (e.g. `acceptance AC1 AC5`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gradcheck.hpp"
#include "pvkit/autodiff/ops.hpp"
#include "pvkit/bench/benchmarks.hpp"
#include "pvkit/cli/cli.hpp"
#include "pvkit/cli/commands.hpp"
#include "pvkit/cli/run_dir.hpp"
#include "pvkit/common/counters.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/common/timing.hpp"
#include "pvkit/nas/evolution.hpp"
#include "pvkit/nas/latency.hpp"
#include "pvkit/nas/search_space.hpp"
#include "pvkit/nas/supernet.hpp"
#include "pvkit/pointcloud/synthetic.hpp"
#include "pvkit/pvconv/pvconv.hpp"
#include "pvkit/pvconv/voxel_ops.hpp"
#include "pvkit/spvconv/sparse_ops.hpp"
#include "pvkit/spvconv/spvconv.hpp"
#include "pvkit/train/trainer.hpp"

namespace fs = std::filesystem;

namespace pvkit::acceptance {
namespace {

using ad::Mode;
using ad::Tensor;
using cloud::Point3;
using testing::max_gradient_error;
using testing::random_tensor;
using testing::random_values;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
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

std::vector<Point3> random_coords(std::size_t n, Rng& rng) {
  std::vector<Point3> coords(n);
  for (auto& p : coords)
    for (float& v : p) v = static_cast<float>(uniform01(rng));
  return coords;
}

std::vector<cloud::PointCloud> default_scenes(std::size_t n, std::uint64_t first_seed) {
  std::vector<cloud::PointCloud> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(cloud::normalize(cloud::generate_synthetic_scene(cloud::default_scene_config(), first_seed + i)));
  }
  return out;
}

// ------------------------------------------------------------------- AC1

Outcome sparse_matches_dense() {
  double worst = 0.0;
  int tensors = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(derive_seed(11, seed));
    const int r = 3 + static_cast<int>(seed % 4);  // grids 3^3 .. 6^3
    const std::size_t cin = 1 + seed % 3, cout = 1 + (seed / 3) % 4;
    const auto cells = static_cast<std::size_t>(r * r * r);
    const auto active = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(cells / 2)));
    std::set<sparse::VoxelCoord> unique;
    while (unique.size() < active) {
      unique.insert({0, static_cast<int>(uniform_int(rng, 0, r - 1)), static_cast<int>(uniform_int(rng, 0, r - 1)),
                     static_cast<int>(uniform_int(rng, 0, r - 1))});
    }
    const std::vector<sparse::VoxelCoord> coords(unique.begin(), unique.end());
    std::vector<float> f(coords.size() * cin), wd(cout * cin * 27);
    for (auto& v : f) v = static_cast<float>(uniform_real(rng, -1, 1));
    for (auto& v : wd) v = static_cast<float>(uniform_real(rng, -1, 1));
    // Dense tap [co][ci][k] is the sparse weight [k][ci][co].
    std::vector<float> ws(27 * cin * cout);
    for (int k = 0; k < 27; ++k)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t co = 0; co < cout; ++co) ws[(k * cin + ci) * cout + co] = wd[(co * cin + ci) * 27 + k];
    std::vector<float> grid(cin * cells, 0.0f);
    for (std::size_t i = 0; i < coords.size(); ++i)
      for (std::size_t j = 0; j < cin; ++j)
        grid[j * cells + pv::flat_cell(coords[i][1], coords[i][2], coords[i][3], r)] = f[i * cin + j];
    const auto ur = static_cast<std::size_t>(r);
    const Tensor<float> feats({coords.size(), cin}, f), wsparse({27, cin, cout}, ws), wdense({cout, cin, 3, 3, 3}, wd),
        dense_in({cin, ur, ur, ur}, grid);
    for (int stride : {1, 2}) {
      const auto map = sparse::build_kernel_map(coords, 1, stride);
      const auto out = sparse::sparse_conv(feats, wsparse, map);
      const auto dense = ad::conv3d_dense(dense_in, wdense, stride);
      const std::size_t ro = dense.dim(1), sites = ro * ro * ro;
      for (std::size_t o = 0; o < map.out_count(); ++o) {
        const auto& oc = map.out_coords[o];
        const auto cell = pv::flat_cell(oc[1] / stride, oc[2] / stride, oc[3] / stride, static_cast<int>(ro));
        for (std::size_t co = 0; co < cout; ++co) {
          worst = std::max(worst, static_cast<double>(std::abs(out.at(o * cout + co) - dense.at(co * sites + cell))));
        }
      }
    }
    ++tensors;
  }
  return {worst < 1e-5, std::to_string(tensors) + " tensors x strides {1,2}, max abs diff " + fmt(worst) + " (< 1e-5)"};
}

// ------------------------------------------------------------------- AC2

Outcome hash_matches_naive() {
  int mismatched = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 500 * (seed + 1);  // 500 .. 10000
    const auto pc = random_cloud(n, 3, derive_seed(22, seed));
    const double vs = seed % 2 ? 1.0 / 24 : 0.07;
    const auto fast = sparse::sparse_voxelize(pc, vs);
    const auto slow = sparse::sparse_voxelize_naive(pc, vs);
    bool same = fast.point_to_voxel == slow.point_to_voxel && fast.tensor.coords() == slow.tensor.coords();
    const auto a = fast.tensor.features().data(), b = slow.tensor.features().data();
    same = same && a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
    mismatched += same ? 0 : 1;
  }
  bench::HashVsNaiveConfig config;
  config.sizes = {100000};
  config.options.warmup = 1;
  const auto report = bench::bench_hash_vs_naive(config);
  const double speedup = report.results().at("speedup@100000");
  return {mismatched == 0 && speedup >= 10.0, "20 clouds (N 500..10000), " + std::to_string(mismatched) +
                                                  " mismatched; speedup at N=1e5 " + fmt(speedup) + "x (>= 10x)"};
}

// ------------------------------------------------------------------- AC3

Outcome gradient_suite() {
  std::map<std::string, double> worst;
  auto record = [&](const std::string& op, double err) { worst[op] = std::max(worst[op], err); };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(33, seed));
    {
      auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
      const auto w = random_values(6, rng);
      record("matmul", max_gradient_error({a, b}, [&] { return ad::weighted_sum<double>(ad::matmul(a, b), w); }));
    }
    {
      const int stride = seed % 2 ? 2 : 1;
      auto in = random_tensor({2, 3, 3, 3}, rng), w = random_tensor({2, 2, 3, 3, 3}, rng);
      const auto proj = random_values(stride == 1 ? 2 * 27 : 2 * 8, rng);
      record("conv3d", max_gradient_error({in, w}, [&] { return ad::weighted_sum<double>(ad::conv3d_dense(in, w, stride), proj); }));
    }
    {
      auto x = random_tensor({3, 3}, rng), gamma = random_tensor({3}, rng, true, 0.5, 1.5), beta = random_tensor({3}, rng);
      const auto proj = random_values(9, rng);
      std::vector<double> mean(3, 0.0), var(3, 1.0);
      for (Mode mode : {Mode::kTrain, Mode::kEval}) {
        record("batchnorm", max_gradient_error({x, gamma, beta}, [&] {
                 return ad::weighted_sum<double>(
                     ad::batchnorm(x, gamma, beta, std::span<double>(mean), std::span<double>(var), mode, 1), proj);
               }));
      }
    }
    {
      auto x = random_tensor({4, 3}, rng);
      const auto proj = random_values(12, rng);
      record("leaky_relu", max_gradient_error({x}, [&] { return ad::weighted_sum<double>(ad::leaky_relu(x, 0.1), proj); }));
    }
    {
      auto logits = random_tensor({5, 3}, rng);
      const std::vector<std::uint32_t> labels{0, 1, 2, 1, 0};
      record("cross_entropy", max_gradient_error({logits}, [&] { return ad::cross_entropy_per_point(logits, labels); }));
    }
    {
      const auto coords = random_coords(12, rng);
      const auto a = pv::assign_voxels(coords, 2);
      auto f = random_tensor({12, 3}, rng);
      const auto w = random_values(3 * 8, rng);
      record("voxelize", max_gradient_error({f}, [&] { return ad::weighted_sum(pv::voxelize(f, a), std::span<const double>(w)); }));
    }
    {
      auto grid = random_tensor({2, 3, 3, 3}, rng);
      const auto coords = random_coords(10, rng);
      const auto w = random_values(20, rng);
      record("trilinear_devoxelize", max_gradient_error({grid}, [&] {
               return ad::weighted_sum(pv::devoxelize_trilinear(grid, coords), std::span<const double>(w));
             }));
    }
    {
      std::set<sparse::VoxelCoord> unique;
      while (unique.size() < 10) {
        unique.insert({static_cast<int>(uniform_int(rng, 0, 1)), static_cast<int>(uniform_int(rng, 0, 2)),
                       static_cast<int>(uniform_int(rng, 0, 2)), static_cast<int>(uniform_int(rng, 0, 2))});
      }
      const std::vector<sparse::VoxelCoord> coords(unique.begin(), unique.end());
      const auto map = sparse::build_kernel_map(coords, 1, seed % 2 ? 2 : 1);
      auto f = random_tensor({10, 2}, rng), w = random_tensor({27, 2, 3}, rng);
      const auto proj = random_values(map.out_count() * 3, rng);
      record("sparse_conv", max_gradient_error({f, w}, [&] {
               return ad::weighted_sum(sparse::sparse_conv(f, w, map), std::span<const double>(proj));
             }));
    }
    auto block_error = [&](auto& block, std::uint64_t cloud_seed) {
      const auto pc = random_cloud(10, 2, cloud_seed);
      auto x = random_tensor({10, 2}, rng);
      std::vector<ad::NamedParameter<double>> named;
      block.collect("b", named);
      std::vector<Tensor<double>> params = {x};
      for (auto& p : named) params.push_back(p.tensor);
      const auto w = random_values(30, rng);
      const auto coords = pc.coords();
      return max_gradient_error(params, [&] {
        return ad::weighted_sum(block.forward(x, coords, Mode::kTrain), std::span<const double>(w));
      });
    };
    {
      pv::PVConvBlockConfig c;
      c.in_channels = 2;
      c.out_channels = 3;
      c.resolution = 3;
      c.voxel_depth = 1;
      pv::PVConvBlock<double> block(c, rng);
      record("pvconv_block", block_error(block, derive_seed(34, seed)));
    }
    {
      sparse::SPVConvBlockConfig c;
      c.in_channels = 2;
      c.out_channels = 3;
      c.voxel_size = 1.0 / 3;
      c.voxel_depth = 1;
      sparse::SPVConvBlock<double> block(c, rng);
      record("spvconv_block", block_error(block, derive_seed(35, seed)));
    }
  }
  bool pass = true;
  std::string detail = "20 seeds each, max rel err:";
  for (const auto& [op, err] : worst) {
    pass = pass && err < 1e-4;
    detail += " " + op + "=" + fmt(err);
  }
  return {pass, detail + " (< 1e-4)"};
}

// ------------------------------------------------------------------- AC4

Outcome voxel_properties() {
  double bucket_worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pc = random_cloud(500, 3, derive_seed(44, seed));
    const int r = 4 + static_cast<int>(seed % 3) * 4;
    const auto grid = pv::voxelize(pc, r);
    std::map<std::tuple<int, int, int>, std::pair<std::vector<double>, int>> buckets;
    for (std::size_t k = 0; k < pc.size(); ++k) {
      const auto& p = pc.coords()[k];
      auto cell = [&](int d) { return std::min(static_cast<int>(std::floor(static_cast<double>(p[d]) * r)), r - 1); };
      auto& b = buckets[{cell(0), cell(1), cell(2)}];
      b.first.resize(3, 0.0);
      for (int j = 0; j < 3; ++j) b.first[j] += pc.feature_row(k)[j];
      ++b.second;
    }
    for (int u = 0; u < r; ++u)
      for (int v = 0; v < r; ++v)
        for (int w = 0; w < r; ++w)
          for (int j = 0; j < 3; ++j) {
            const auto it = buckets.find({u, v, w});
            const double expect = it == buckets.end() ? 0.0 : it->second.first[j] / it->second.second;
            bucket_worst = std::max(bucket_worst, std::abs(expect - grid.at(j, u, v, w)));
          }
  }

  double unity_worst = 0.0;
  Rng rng(45);
  for (int r : {3, 5, 8}) {
    const double c = uniform_real(rng, -3, 3);
    const auto ur = static_cast<std::size_t>(r);
    const auto grid = Tensor<double>::full({1, ur, ur, ur}, c);
    std::vector<Point3> pts(500);
    for (auto& p : pts)
      for (float& v : p) v = static_cast<float>(uniform_real(rng, 0.5 / r, 1.0 - 0.5 / r));
    const auto out = pv::devoxelize_trilinear(grid, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) unity_worst = std::max(unity_worst, std::abs(out.at(i) - c));
  }

  // Nearest: every pair of points in one voxel must read identical rows.
  std::size_t pairs = 0, differing = 0;
  {
    const int r = 4;
    const auto grid = random_tensor({3, 4, 4, 4}, rng, false);
    const auto pts = random_coords(400, rng);
    const auto out = pv::devoxelize_nearest(grid, pts);
    std::map<std::uint32_t, std::size_t> first;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const auto cell = pv::flat_cell(cloud::voxel_index(pts[k][0], r), cloud::voxel_index(pts[k][1], r),
                                      cloud::voxel_index(pts[k][2], r), r);
      const auto [it, fresh] = first.emplace(cell, k);
      if (fresh) continue;
      ++pairs;
      for (int c = 0; c < 3; ++c) differing += out.at(k * 3 + c) != out.at(it->second * 3 + c) ? 1 : 0;
    }
  }
  const bool pass = bucket_worst < 1e-6 && unity_worst < 1e-6 && differing == 0 && pairs > 0;
  return {pass, "voxelize vs bucket oracle " + fmt(bucket_worst) + " (< 1e-6); partition of unity " + fmt(unity_worst) +
                    " (< 1e-6); nearest: " + std::to_string(pairs) + " same-voxel pairs, " + std::to_string(differing) +
                    " differing values"};
}

// ------------------------------------------------------------------- AC5

Outcome depth_expectation() {
  const nas::SearchSpace space(std::vector<nas::StageSpec>(4, nas::StageSpec{3, {4}, 1}));
  const std::vector<int> floors(4, 1);
  Rng rng(55);
  const int samples = 100000;
  double total = 0.0;
  int full = 0;
  for (int i = 0; i < samples; ++i) {
    const auto arch = nas::sample_uniform(space, floors, rng);
    const auto d = arch.total_depth();
    total += static_cast<double>(d);
    full += d == 12 ? 1 : 0;
  }
  const double mean = total / samples;
  const double freq = static_cast<double>(full) / samples, expect = 1.0 / 81.0;
  const double rel = std::abs(freq - expect) / expect;
  return {std::abs(mean - 8.0) <= 0.05 && rel <= 0.3,
          "mean total depth " + fmt(mean) + " (8 +- 0.05); full-depth frequency " + fmt(freq) + " vs 1/81, rel " +
              fmt(rel) + " (<= 0.3)"};
}

// ------------------------------------------------------------------- AC6

Outcome macs_estimator() {
  const auto config = nas::default_supernet_config();
  nas::SuperNet net(config, 6);
  const auto scenes = default_scenes(20, 600);
  const nas::MacsEstimator estimator(config, scenes);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto arch = nas::sample_uniform(net.space(), nas::full_depth_floors(net.space()), derive_seed(66, seed));
    double measured = 0.0;
    for (const auto& pc : scenes) {
      ScopedMacCount count;
      net.forward(arch, pc, Mode::kEval);
      measured += static_cast<double>(count.elapsed());
    }
    measured /= static_cast<double>(scenes.size());
    worst = std::max(worst, std::abs(estimator.estimate(arch) - measured) / measured);
  }
  return {worst < 1e-6, "10 archs x 20 scenes, max rel err " + fmt(worst) + " (< 1e-6)"};
}

// ------------------------------------------------------------------- AC7

Outcome evolution_optimality() {
  const nas::SearchSpace space({{3, {4, 8, 12}, 1}, {3, {8, 12, 16}, 2}});
  const auto all = nas::enumerate(space);
  auto distance_fitness = [&](const std::vector<double>& target) {
    return [&space, target](const nas::ArchSpec& a) {
      const auto v = nas::encode(space, a);
      double d = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) d += (v[i] - target[i]) * (v[i] - target[i]);
      return -d;
    };
  };

  int found = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(77, seed));
    const auto target = nas::encode(space, all[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(all.size()) - 1))]);
    const auto fitness = distance_fitness(target);
    // Exhaustive argmax is the oracle.
    const auto best = *std::max_element(all.begin(), all.end(),
                                        [&](const auto& a, const auto& b) { return fitness(a) < fitness(b); });
    nas::EvolutionConfig config;
    config.seed = seed;
    found += nas::evolutionary_search(space, fitness, std::nullopt, config).best == best ? 1 : 0;
  }

  // Binding MACs budget: half of the maximal arch, whose encoding is also
  // the unconstrained optimum.
  nas::SupernetConfig sc;
  sc.space = space;
  sc.voxel_size = 1.0 / 16;
  const nas::MacsEstimator estimator(sc, default_scenes(4, 700));
  const auto usage = [&](const nas::ArchSpec& a) { return estimator.estimate(a); };
  const double budget = 0.5 * usage(nas::maximal_arch(space));
  const auto fitness = distance_fitness(nas::encode(space, nas::maximal_arch(space)));
  std::size_t evaluations = 0, violations = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    nas::EvolutionConfig config;
    config.seed = seed;
    nas::evolutionary_search(
        space,
        [&](const nas::ArchSpec& a) {
          ++evaluations;
          violations += usage(a) > budget ? 1 : 0;
          return fitness(a);
        },
        nas::ResourceConstraint{nas::ResourceKind::kMacs, budget, usage}, config);
  }
  const bool binding = usage(nas::maximal_arch(space)) > budget;
  return {found >= 19 && violations == 0 && binding,
          "space " + std::to_string(all.size()) + " archs; optimum found in " + std::to_string(found) +
              "/20 runs (>= 19); MACs budget " + fmt(budget) + " (binding: " + (binding ? "yes" : "no") + "), " +
              std::to_string(violations) + " violating of " + std::to_string(evaluations) + " evaluations"};
}

// ------------------------------------------------------------------- AC8

Outcome latency_predictor() {
  nas::SuperNet net(nas::default_supernet_config(), 0);
  const auto pc = cloud::normalize(cloud::generate_scene_with_points(4096, derive_seed(0, 1)));
  const auto samples = nas::latency_campaign(net, pc, 500, 0);
  nas::PredictorReport report;
  nas::LatencyPredictor::fit(samples, nas::PredictorConfig{}, &report);
  return {report.holdout_mre < 0.05, std::to_string(samples.size()) + " measured pairs, holdout " +
                                         std::to_string(report.holdout_size) + " pairs, mean relative error " +
                                         fmt(report.holdout_mre) + " (< 0.05)"};
}

// ------------------------------------------------------------------- AC9

nlohmann::json model_config(const std::vector<std::size_t>& widths, std::size_t head, const char* grid_key,
                            double grid_value, int voxel_depth) {
  nlohmann::json blocks = nlohmann::json::array();
  for (auto w : widths) {
    nlohmann::json b = {{"out", w}, {"voxel_depth", voxel_depth}};
    if (grid_key) b[grid_key] = grid_value;
    blocks.push_back(b);
  }
  return {{"in_channels", 3}, {"num_classes", 4}, {"head", {head}}, {"blocks", blocks}};
}

std::size_t parameter_count(pv::SegmentationModel<float>& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters()) n += p.tensor.numel();
  return n;
}

Outcome end_to_end_accuracy() {
  std::vector<cloud::PointCloud> train_set, test_set;
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto pc = cloud::normalize(cloud::generate_synthetic_scene(cloud::default_scene_config(), 1000 + s));
    (s < 160 ? train_set : test_set).push_back(std::move(pc));
  }
  train::TrainConfig tc;
  tc.epochs = 8;
  tc.optimizer.lr = 3e-3;
  auto run = [&](const std::string& kind, const nlohmann::json& config, std::size_t* params) {
    auto model = cli::make_model(kind, config, 0);
    *params = parameter_count(*model);
    ad::Optimizer<float> opt(tc.optimizer);
    train::fit<float>(*model, opt, train_set, {}, tc);
    return train::evaluate<float>(*model, test_set).miou();
  };

  const auto pv_config = model_config({16, 32, 32}, 32, "resolution", 8, 2);
  std::size_t pv_params = 0;
  const double pv = run("pvcnn", pv_config, &pv_params);
  // Point-only baseline: widths (w, 2w, 2w) with w chosen to match the
  // PVCNN parameter count as closely as possible.
  nlohmann::json mlp_config;
  std::size_t mlp_params = 0;
  for (std::size_t w = 8, best_gap = SIZE_MAX; w <= 256; ++w) {
    const auto c = model_config({w, 2 * w, 2 * w}, 2 * w, nullptr, 0, 0);
    const auto n = parameter_count(*cli::make_model("pointmlp", c, 0));
    const auto gap = n > pv_params ? n - pv_params : pv_params - n;
    if (gap < best_gap) {
      best_gap = gap;
      mlp_config = c;
      mlp_params = n;
    }
  }
  const double mlp = run("pointmlp", mlp_config, &mlp_params);
  std::size_t spv_params = 0;
  const double spv = run("spvcnn", model_config({16, 32, 32}, 32, "voxel_size", 1.0 / 32, 2), &spv_params);
  const double param_gap = std::abs(static_cast<double>(mlp_params) - static_cast<double>(pv_params)) / pv_params;
  const bool pass = pv >= mlp + 0.05 && spv >= pv && param_gap < 0.05;
  return {pass, "mIoU PVCNN(r=8, " + std::to_string(pv_params) + " params) " + fmt(pv) + " vs point MLP(" +
                    std::to_string(mlp_params) + " params) " + fmt(mlp) + " (need +0.05); SPVCNN(voxel 1/32) " +
                    fmt(spv) + " (need >= PVCNN r=8)"};
}

// ------------------------------------------------------------------ AC10

Outcome benchmark_directions() {
  bench::AccessPatternConfig access;
  access.options.warmup = 1;
  const auto a = bench::bench_access_pattern(access);
  double ratio = 0.0;
  for (const auto& [key, value] : a.results())
    if (key.rfind("random_over_sequential@", 0) == 0) ratio = std::max(ratio, value);

  bool cubic = true;
  for (int r = 1; r <= 256; r *= 2) cubic = cubic && bench::dense_grid_bytes(2 * r, 16, 2) == 8 * bench::dense_grid_bytes(r, 16, 2);
  const auto m = bench::bench_memory_model({});
  cubic = cubic && m.results().at("bytes_cubic_exact") == 1.0 && m.results().at("doubling_ratio_min") == 8.0 &&
          m.results().at("doubling_ratio_max") == 8.0;

  bench::CrossoverConfig crossover;
  crossover.options.warmup = 1;
  const auto c = bench::bench_primitive_crossover(crossover);
  const double pv_slope = c.results().at("pvconv_slope"), spv_slope = c.results().at("spvconv_slope");
  const auto cross = c.results().find("crossover_r");
  const bool has_cross = cross != c.results().end();
  const bool pass = ratio > 0.0 && ratio <= 1.0 && cubic && pv_slope > spv_slope && has_cross;
  return {pass, "random/sequential throughput " + fmt(ratio) + " (<= 1); dense bytes x8 per doubling: " +
                    (cubic ? "exact" : "NOT exact") + "; slopes PVConv " + fmt(pv_slope) + " vs SPVConv " +
                    fmt(spv_slope) + "; crossover r=" + (has_cross ? fmt(cross->second) : std::string("none"))};
}

// ------------------------------------------------------------------ AC11

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "pvkit_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) { return cli::run_cli(args, out, err); };
  auto p = [&](const std::string& name) { return (root / name).string(); };

  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  check(run({"gen-data", "--out", p("data"), "--scenes", "10", "--seed", "3"}) == 0, "gen-data");
  for (const char* model : {"pvcnn", "spvcnn"}) {
    const std::string a = p(std::string(model) + "_a"), b = p(std::string(model) + "_b");
    check(run({"train", "--data", p("data"), "--run", a, "--model", model, "--epochs", "2", "--max-scenes", "3",
               "--seed", "5"}) == 0,
          std::string("train ") + model);
    check(run({"train", "--config", a + "/config.snapshot", "--run", b}) == 0, std::string("train rerun ") + model);
    check(slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv") && !slurp(a + "/metrics.csv").empty(),
          std::string("train metrics ") + model);
  }
  check(run({"train", "--data", p("data"), "--run", p("sn"), "--supernet", "--epochs", "2", "--max-scenes", "3"}) == 0,
        "supernet train");
  check(run({"train", "--config", p("sn/config.snapshot"), "--run", p("sn2")}) == 0, "supernet rerun");
  check(slurp(p("sn/metrics.csv")) == slurp(p("sn2/metrics.csv")), "supernet metrics");
  check(run({"search", "--supernet-run", p("sn"), "--out", p("s1"), "--macs", "1e6", "--generations", "4",
             "--population", "8", "--parents", "4", "--val-scenes", "1", "--calib-scenes", "2"}) == 0,
        "search");
  check(run({"search", "--config", p("s1/config.snapshot"), "--out", p("s2")}) == 0, "search rerun");
  check(slurp(p("s1/metrics.csv")) == slurp(p("s2/metrics.csv")), "search metrics");
  check(slurp(p("s1/best_arch.json")) == slurp(p("s2/best_arch.json")) && !slurp(p("s1/best_arch.json")).empty(),
        "best arch");
  fs::remove_all(root);
  std::string detail = "train (pvcnn, spvcnn, supernet) and search reruns from config.snapshot: ";
  if (failures.empty()) return {true, detail + "identical metrics and best arch"};
  for (const auto& f : failures) detail += f + " differs/failed; ";
  return {false, detail + err.str()};
}

}  // namespace
}  // namespace pvkit::acceptance

int main(int argc, char** argv) {
  using namespace pvkit::acceptance;
  pvkit::pin_allocator_for_timing();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1", sparse_matches_dense},   {"AC2", hash_matches_naive},    {"AC3", gradient_suite},
      {"AC4", voxel_properties},       {"AC5", depth_expectation},     {"AC6", macs_estimator},
      {"AC7", evolution_optimality},   {"AC8", latency_predictor},     {"AC9", end_to_end_accuracy},
      {"AC10", benchmark_directions},  {"AC11", cli_determinism},
  };
  const std::set<std::string> selected(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!selected.empty() && !selected.count(name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s %s [%.1fs]\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
