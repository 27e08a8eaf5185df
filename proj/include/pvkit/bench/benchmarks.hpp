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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pvkit/bench/report.hpp"
#include "pvkit/pointcloud/synthetic.hpp"

namespace pvkit::bench {

// Last-level cache size from sysfs; 32 MiB when unavailable.
std::size_t last_level_cache_bytes();
// Float count of an array four times the last-level cache (at least 64 MiB).
std::size_t default_large_array_elements();

struct AccessPatternConfig {
  std::vector<std::size_t> array_elements;  // empty: one cache-exceeding size
  std::size_t index_count = std::size_t{1} << 22;
  std::uint64_t seed = 0;
  BenchOptions options;
};

// Gather throughput with sequential versus uniform-random indices. Both
// patterns gather the same multiset size, and their sums over a constant
// array are checked equal before timing.
BenchReport bench_access_pattern(const AccessPatternConfig& config);

struct MemoryModelConfig {
  std::vector<int> resolutions = {8, 16, 32, 64, 128};
  std::size_t channels = 1;
  std::size_t batch = 1;
  int scenes = 5;
  std::uint64_t seed = 0;
  cloud::SceneConfig scene = cloud::default_scene_config();
};

// Dense grid footprint in bytes (f32): batch * C * r^3 * 4.
std::uint64_t dense_grid_bytes(int r, std::size_t channels, std::size_t batch);

// Analytic dense-grid bytes per resolution and the measured fraction of
// distinguishable points over generated scenes (one sample per scene).
BenchReport bench_memory_model(const MemoryModelConfig& config);

struct CrossoverConfig {
  std::size_t points = 8192;
  std::vector<int> resolutions = {8, 16, 32, 64};
  std::size_t channels = 16;
  int voxel_depth = 1;
  int fit_from = 16;  // slopes use resolutions >= fit_from
  std::uint64_t seed = 0;
  BenchOptions options;
};

// PVConv (dense grid at resolution r) and SPVConv (voxel size 1/r) blocks
// with identical channels, timed in eval mode with a per-phase breakdown.
// Reports fitted log-log slopes and the first resolution where PVConv
// becomes slower, if the sweep contains one.
BenchReport bench_primitive_crossover(const CrossoverConfig& config);

struct HashVsNaiveConfig {
  std::vector<std::size_t> sizes = {1000, 10000, 100000};
  double voxel_size = 1.0 / 64;
  std::uint64_t seed = 0;
  BenchOptions options;
};

// Hash-indexed sparse voxelization against the linear-search oracle on
// uniform clouds. Outputs are compared exactly before timing; growth
// exponents are fitted when the sweep spans two decades.
BenchReport bench_hash_vs_naive(const HashVsNaiveConfig& config);

}  // namespace pvkit::bench
