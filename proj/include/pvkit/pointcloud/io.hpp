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
#include <string>
#include <vector>

#include "pvkit/pointcloud/point_cloud.hpp"

namespace pvkit::cloud {

// .pvpc layout (little-endian): "PVPC", version u32, N u64, C u32,
// flags u32 (bit0 labels, bit1 normalized), coords f32[N*3],
// features f32[N*C], labels u32[N] when present.
inline constexpr std::uint32_t kPvpcVersion = 1;

std::vector<std::uint8_t> encode_point_cloud(const PointCloud& pc);
PointCloud decode_point_cloud(const std::vector<std::uint8_t>& bytes,
                              const std::string& context = "point cloud");

void save_point_cloud(const std::string& path, const PointCloud& pc);
PointCloud load_point_cloud(const std::string& path);

}  // namespace pvkit::cloud
