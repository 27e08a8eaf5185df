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

#include "pvkit/bench/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "pvkit/common/errors.hpp"
#include "pvkit/common/random.hpp"
#include "pvkit/pvconv/pvconv.hpp"
#include "pvkit/spvconv/spvconv.hpp"

namespace pvkit::bench {

std::size_t last_level_cache_bytes() {
  std::size_t best = 0;
  for (int i = 0; i < 8; ++i) {
    std::ifstream in("/sys/devices/system/cpu/cpu0/cache/index" + std::to_string(i) + "/size");
    std::string s;
    if (!(in >> s) || s.empty()) continue;
    std::size_t mult = 1;
    if (s.back() == 'K') mult = 1024;
    if (s.back() == 'M') mult = 1024 * 1024;
    if (mult != 1) s.pop_back();
    try {
      best = std::max(best, std::stoul(s) * mult);
    } catch (const std::exception&) {
    }
  }
  return best ? best : std::size_t{32} << 20;
}

std::size_t default_large_array_elements() {
  return std::max(4 * last_level_cache_bytes(), std::size_t{64} << 20) / sizeof(float);
}

namespace {

// Keeps results observable so the gathers are not optimized away.
volatile double g_sink = 0.0;

double gather_sum(const std::vector<float>& data, const std::vector<std::uint32_t>& idx) {
  double s = 0.0;
  for (auto i : idx) s += data[i];
  return s;
}

}  // namespace

BenchReport bench_access_pattern(const AccessPatternConfig& config) {
  config.options.validate();
  BenchReport report("access_pattern", {"array_elements", "index_count", "pattern"}, {"gathers_per_s"});
  auto sizes = config.array_elements;
  if (sizes.empty()) sizes.push_back(default_large_array_elements());
  report.notes().push_back("last-level cache " + std::to_string(last_level_cache_bytes()) + " bytes");
  report.notes().push_back(
      "DRAM access energy is not measured here; the random/sequential gap is a proxy for access cost");
  Rng rng(config.seed);
  for (auto n : sizes) {
    if (n == 0 || n > UINT32_MAX) throw ConfigError("array size must lie in [1, 2^32)");
    const std::string ns = std::to_string(n), ks = std::to_string(config.index_count);
    if (config.index_count == 0) {
      report.add_skipped({ns, ks, "sequential"}, "zero-work cell");
      report.add_skipped({ns, ks, "random"}, "zero-work cell");
      continue;
    }
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(i % 1024) * 0.001f;
    std::vector<std::uint32_t> seq(config.index_count), rnd(config.index_count);
    for (std::size_t i = 0; i < config.index_count; ++i) {
      seq[i] = static_cast<std::uint32_t>(i % n);
      rnd[i] = static_cast<std::uint32_t>(uniform_int(rng, 0, static_cast<std::int64_t>(n) - 1));
    }
    {
      // Equivalence gate: over a constant array both patterns gather the
      // same total.
      const std::vector<float> ones(n, 1.0f);
      if (gather_sum(ones, seq) != gather_sum(ones, rnd)) throw ContractError("gather patterns disagree");
    }
    double throughput[2];
    const std::vector<std::uint32_t>* patterns[2] = {&seq, &rnd};
    const char* names[2] = {"sequential", "random"};
    for (int p = 0; p < 2; ++p) {
      auto samples = time_repeated([&] { g_sink = gather_sum(data, *patterns[p]); }, config.options);
      const double med = summarize(samples).median;
      throughput[p] = static_cast<double>(config.index_count) / (med * 1e-9);
      report.add({ns, ks, names[p]}, std::move(samples), {{"gathers_per_s", throughput[p]}});
    }
    report.results()["random_over_sequential@" + ns] = throughput[1] / throughput[0];
  }
  return report;
}

std::uint64_t dense_grid_bytes(int r, std::size_t channels, std::size_t batch) {
  if (r < 1) throw ContractError("resolution must be positive");
  const auto rr = static_cast<std::uint64_t>(r);
  return static_cast<std::uint64_t>(batch) * channels * rr * rr * rr * sizeof(float);
}

BenchReport bench_memory_model(const MemoryModelConfig& config) {
  if (config.resolutions.empty()) throw ConfigError("memory model needs at least one resolution");
  if (!std::is_sorted(config.resolutions.begin(), config.resolutions.end())) {
    throw ContractError("resolution sweep must be sorted");
  }
  if (config.scenes < 5) throw ConfigError("memory model needs at least 5 scenes");
  std::vector<cloud::PointCloud> scenes;
  for (int s = 0; s < config.scenes; ++s) {
    scenes.push_back(cloud::normalize(
        cloud::generate_synthetic_scene(config.scene, derive_seed(config.seed, static_cast<std::uint64_t>(s)))));
  }
  BenchReport report("memory_model", {"r", "channels", "batch"}, {"dense_bytes"}, "fraction");
  std::vector<double> medians;
  for (int r : config.resolutions) {
    std::vector<double> fractions;
    for (const auto& pc : scenes) fractions.push_back(cloud::count_distinguishable(pc, r).fraction);
    const auto bytes = dense_grid_bytes(r, config.channels, config.batch);
    report.add({std::to_string(r), std::to_string(config.channels), std::to_string(config.batch)},
               std::move(fractions), {{"dense_bytes", static_cast<double>(bytes)}});
    medians.push_back(report.cells().back().summary.median);
  }
  bool cubic = true, increasing = true;
  double min_ratio = 0.0, max_ratio = 0.0;
  for (std::size_t i = 1; i < config.resolutions.size(); ++i) {
    const auto a = dense_grid_bytes(config.resolutions[i - 1], config.channels, config.batch);
    const auto b = dense_grid_bytes(config.resolutions[i], config.channels, config.batch);
    const auto ra = static_cast<std::uint64_t>(config.resolutions[i - 1]);
    const auto rb = static_cast<std::uint64_t>(config.resolutions[i]);
    cubic = cubic && b * ra * ra * ra == a * rb * rb * rb;
    if (rb == 2 * ra) {
      const double ratio = static_cast<double>(b) / static_cast<double>(a);
      min_ratio = min_ratio == 0.0 ? ratio : std::min(min_ratio, ratio);
      max_ratio = std::max(max_ratio, ratio);
    }
    increasing = increasing && medians[i] > medians[i - 1];
  }
  report.results()["bytes_cubic_exact"] = cubic ? 1.0 : 0.0;
  if (max_ratio > 0.0) {
    report.results()["doubling_ratio_min"] = min_ratio;
    report.results()["doubling_ratio_max"] = max_ratio;
  }
  report.results()["fraction_strictly_increasing"] = increasing ? 1.0 : 0.0;
  return report;
}

BenchReport bench_primitive_crossover(const CrossoverConfig& config) {
  config.options.validate();
  if (config.resolutions.empty()) throw ConfigError("crossover sweep needs at least one resolution");
  if (!std::is_sorted(config.resolutions.begin(), config.resolutions.end())) {
    throw ContractError("resolution sweep must be sorted");
  }
  if (config.points == 0 || config.channels == 0 || config.voxel_depth < 1) {
    throw ConfigError("crossover needs points, channels and voxel_depth >= 1");
  }
  BenchReport report("primitive_crossover", {"primitive", "r", "points", "channels"},
                     {"voxelize_ns", "conv_ns", "devoxelize_ns", "mlp_ns", "active_voxels"});
  const auto pc = cloud::normalize(cloud::generate_scene_with_points(config.points, config.seed));
  const auto features = pv::feature_tensor<float>(pc);
  const std::string np = std::to_string(pc.size()), nc = std::to_string(config.channels);

  std::vector<double> pv_ms, spv_ms, rs;
  for (int r : config.resolutions) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    pv::PVConvBlockConfig pc_cfg;
    pc_cfg.in_channels = pc.channels();
    pc_cfg.out_channels = config.channels;
    pc_cfg.resolution = r;
    pc_cfg.voxel_depth = config.voxel_depth;
    pv::PVConvBlock<float> dense(pc_cfg, rng);
    sparse::SPVConvBlockConfig sc_cfg;
    sc_cfg.in_channels = pc.channels();
    sc_cfg.out_channels = config.channels;
    sc_cfg.voxel_size = 1.0 / r;
    sc_cfg.voxel_depth = config.voxel_depth;
    sparse::SPVConvBlock<float> sparse_block(sc_cfg, rng);

    const auto a = dense.forward(features, pc.coords(), ad::Mode::kEval);
    const auto b = sparse_block.forward(features, pc.coords(), ad::Mode::kEval);
    if (a.shape() != b.shape()) throw ContractError("PVConv and SPVConv outputs differ in shape");

    const double active = static_cast<double>(sparse::assign_sparse(pc.coords(), 1.0 / r).coords.size());
    auto run = [&](auto& block, const char* name, std::vector<double>& medians) {
      PhaseTimes phases;
      int calls = 0;
      auto samples = time_repeated(
          [&] {
            PhaseTimes* t = ++calls > config.options.warmup ? &phases : nullptr;
            block.forward(features, pc.coords(), ad::Mode::kEval, t);
          },
          config.options);
      const double reps = static_cast<double>(config.options.repetitions);
      std::map<std::string, double> extras = {{"voxelize_ns", static_cast<double>(phases.voxelize_ns) / reps},
                                              {"conv_ns", static_cast<double>(phases.conv_ns) / reps},
                                              {"devoxelize_ns", static_cast<double>(phases.devoxelize_ns) / reps},
                                              {"mlp_ns", static_cast<double>(phases.mlp_ns) / reps}};
      if (std::string(name) == "spvconv") extras["active_voxels"] = active;
      auto& cell = report.add({name, std::to_string(r), np, nc}, std::move(samples), std::move(extras));
      medians.push_back(cell.summary.median);
    };
    run(dense, "pvconv", pv_ms);
    run(sparse_block, "spvconv", spv_ms);
    rs.push_back(r);
  }

  std::vector<double> fx, fpv, fspv;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (rs[i] >= config.fit_from) {
      fx.push_back(rs[i]);
      fpv.push_back(pv_ms[i]);
      fspv.push_back(spv_ms[i]);
    }
  }
  if (fx.size() >= 2) {
    report.results()["pvconv_slope"] = loglog_slope(fx, fpv);
    report.results()["spvconv_slope"] = loglog_slope(fx, fspv);
  } else {
    report.notes().push_back("fewer than two resolutions at or above fit_from; no slopes fitted");
  }
  bool found = false;
  for (std::size_t i = 1; i < rs.size() && !found; ++i) {
    if (pv_ms[i - 1] <= spv_ms[i - 1] && pv_ms[i] > spv_ms[i]) {
      report.results()["crossover_r"] = rs[i];
      found = true;
    }
  }
  if (!found) {
    if (rs.size() < 2) {
      report.notes().push_back("single-resolution sweep; no crossover reported");
    } else if (pv_ms.front() > spv_ms.front()) {
      report.notes().push_back("PVConv is already slower at the smallest resolution; crossover lies below the sweep");
    } else {
      report.notes().push_back("PVConv stays faster across the sweep; no crossover");
    }
  }
  return report;
}

BenchReport bench_hash_vs_naive(const HashVsNaiveConfig& config) {
  config.options.validate();
  if (config.sizes.empty()) throw ConfigError("hash benchmark needs at least one size");
  BenchReport report("hash_vs_naive", {"n", "method"}, {"active_voxels", "speedup"});
  std::vector<double> ns, hash_ms, naive_ms;
  for (std::size_t n : config.sizes) {
    if (n == 0) {
      report.add_skipped({"0", "hash"}, "zero-work cell");
      report.add_skipped({"0", "naive"}, "zero-work cell");
      continue;
    }
    Rng rng(derive_seed(config.seed, n));
    std::vector<cloud::Point3> coords(n);
    for (auto& p : coords)
      for (auto& v : p) v = static_cast<float>(uniform01(rng));
    std::vector<float> features;
    features.reserve(3 * n);
    for (const auto& p : coords) features.insert(features.end(), p.begin(), p.end());
    const cloud::PointCloud pc(std::move(coords), std::move(features), 3, std::nullopt, cloud::CoordSpace::kNormalized);

    const auto h = sparse::sparse_voxelize(pc, config.voxel_size);
    const auto v = sparse::sparse_voxelize_naive(pc, config.voxel_size);
    if (h.tensor.coords() != v.tensor.coords() || h.point_to_voxel != v.point_to_voxel ||
        !std::equal(h.tensor.features().data().begin(), h.tensor.features().data().end(),
                    v.tensor.features().data().begin(), v.tensor.features().data().end())) {
      throw ContractError("hash and naive voxelization disagree at n = " + std::to_string(n));
    }
    const double active = static_cast<double>(h.tensor.size());
    auto hs = time_repeated([&] { (void)sparse::sparse_voxelize(pc, config.voxel_size); }, config.options);
    auto vs = time_repeated([&] { (void)sparse::sparse_voxelize_naive(pc, config.voxel_size); }, config.options);
    const double hm = summarize(hs).median, vm = summarize(vs).median;
    const std::string key = std::to_string(n);
    report.add({key, "hash"}, std::move(hs), {{"active_voxels", active}, {"speedup", vm / hm}});
    report.add({key, "naive"}, std::move(vs), {{"active_voxels", active}});
    report.results()["speedup@" + key] = vm / hm;
    ns.push_back(static_cast<double>(n));
    hash_ms.push_back(hm);
    naive_ms.push_back(vm);
  }
  if (ns.size() >= 2 && ns.back() / ns.front() >= 100.0) {
    report.results()["hash_exponent"] = loglog_slope(ns, hash_ms);
    report.results()["naive_exponent"] = loglog_slope(ns, naive_ms);
  } else {
    report.notes().push_back("size sweep spans less than two decades; growth exponents not fitted");
  }
  return report;
}

}  // namespace pvkit::bench
