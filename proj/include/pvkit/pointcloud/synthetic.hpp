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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pvkit/pointcloud/point_cloud.hpp"

namespace pvkit::cloud {

// Label ids are fixed by kind so every generated dataset shares one vocabulary.
enum class PrimitiveKind : std::uint32_t { kPlane = 0, kSphere = 1, kBox = 2, kPole = 3 };
inline constexpr std::uint32_t kNumPrimitiveKinds = 4;

std::string_view primitive_name(PrimitiveKind kind);
std::optional<PrimitiveKind> parse_primitive(std::string_view name);

struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::kPlane;
  int count = 1;
  int points_per_instance = 256;
};

// Outdoor-like scene on a ground plane, `extent` metres across. Poles are
// thin (radius 0.6% of the extent), so at coarse resolutions they fall into a
// handful of voxels.
struct SceneConfig {
  std::vector<PrimitiveSpec> primitives;
  double extent = 20.0;
  double jitter = 0.002;  // gaussian noise, fraction of the extent
  bool shuffle = true;
};

// Features are the raw coordinates divided by the extent (3 channels);
// each point is labelled with the kind of primitive that generated it.
PointCloud generate_synthetic_scene(const SceneConfig& config, std::uint64_t seed);

// Default 4-class mix used by the CLI and the end-to-end tests.
SceneConfig default_scene_config(int points_scale = 1);

// Default mix scaled up to at least `points` points, then truncated to
// exactly `points` (the generator shuffles, so a prefix is a uniform
// subsample).
PointCloud generate_scene_with_points(std::size_t points, std::uint64_t seed);

}  // namespace pvkit::cloud
