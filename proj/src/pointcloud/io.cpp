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

#include "pvkit/pointcloud/io.hpp"

#include "pvkit/common/binary_io.hpp"
#include "pvkit/common/errors.hpp"

namespace pvkit::cloud {
namespace {

constexpr char kMagic[] = "PVPC";
constexpr std::uint32_t kHasLabels = 1u << 0;
constexpr std::uint32_t kNormalized = 1u << 1;

}  // namespace

std::vector<std::uint8_t> encode_point_cloud(const PointCloud& pc) {
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put_uint<std::uint32_t>(kPvpcVersion);
  w.put_uint<std::uint64_t>(pc.size());
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(pc.channels()));
  std::uint32_t flags = 0;
  if (pc.has_labels()) flags |= kHasLabels;
  if (pc.normalized()) flags |= kNormalized;
  w.put_uint<std::uint32_t>(flags);
  for (const auto& p : pc.coords())
    for (float v : p) w.put_f32(v);
  for (float v : pc.features()) w.put_f32(v);
  if (pc.has_labels()) {
    for (std::uint32_t l : *pc.labels()) w.put_uint<std::uint32_t>(l);
  }
  return w.bytes();
}

PointCloud decode_point_cloud(const std::vector<std::uint8_t>& bytes, const std::string& context) {
  ByteReader r(bytes, context);
  if (r.remaining() < 4 || r.get_bytes(4) != kMagic) {
    throw IoError(IoErrorKind::kBadMagic, context + ": not a .pvpc file (bad magic)");
  }
  const auto version = r.get_uint<std::uint32_t>();
  if (version != kPvpcVersion) {
    throw IoError(IoErrorKind::kVersionMismatch, context + ": unsupported .pvpc version " +
                                                     std::to_string(version));
  }
  const auto n = r.get_uint<std::uint64_t>();
  const auto c = r.get_uint<std::uint32_t>();
  const auto flags = r.get_uint<std::uint32_t>();
  if (flags & ~(kHasLabels | kNormalized)) {
    throw IoError(IoErrorKind::kFormat, context + ": unknown flag bits");
  }
  const bool has_labels = flags & kHasLabels;
  // Check the payload size before allocating, so a corrupt header can't
  // request absurd amounts of memory.
  const std::uint64_t per_point = 4ull * (3 + c) + (has_labels ? 4 : 0);
  if (n != 0 && per_point > r.remaining() / n) {
    r.need(r.remaining() + 1);
  }
  std::vector<Point3> coords(n);
  for (auto& p : coords)
    for (float& v : p) v = r.get_f32();
  std::vector<float> features(n * c);
  for (float& v : features) v = r.get_f32();
  std::optional<std::vector<std::uint32_t>> labels;
  if (has_labels) {
    labels.emplace(n);
    for (auto& l : *labels) l = r.get_uint<std::uint32_t>();
  }
  if (r.remaining() != 0) throw IoError(IoErrorKind::kFormat, context + ": trailing bytes");
  try {
    return PointCloud(std::move(coords), std::move(features), c, std::move(labels),
                      (flags & kNormalized) ? CoordSpace::kNormalized : CoordSpace::kRaw);
  } catch (const Error& e) {
    throw IoError(IoErrorKind::kFormat, context + ": " + e.what());
  }
}

void save_point_cloud(const std::string& path, const PointCloud& pc) {
  write_file_bytes(path, encode_point_cloud(pc));
}

PointCloud load_point_cloud(const std::string& path) {
  return decode_point_cloud(read_file_bytes(path), path);
}

}  // namespace pvkit::cloud
