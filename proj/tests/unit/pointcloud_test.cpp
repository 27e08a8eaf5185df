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
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <tuple>

#include <gtest/gtest.h>

#include "pvkit/common/binary_io.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/common/random.hpp"
#include "pvkit/pointcloud/io.hpp"
#include "pvkit/pointcloud/point_cloud.hpp"
#include "pvkit/pointcloud/synthetic.hpp"

namespace pvkit::cloud {
namespace {

PointCloud raw_cloud(std::vector<Point3> coords) {
  std::vector<float> features(coords.size(), 1.0f);
  return PointCloud(std::move(coords), std::move(features), 1);
}

PointCloud random_normalized(std::size_t n, std::uint64_t seed, bool labels = false) {
  Rng rng(seed);
  std::vector<Point3> coords(n);
  for (auto& p : coords)
    for (float& v : p) v = static_cast<float>(uniform01(rng));
  std::vector<float> features(n * 2);
  for (float& v : features) v = static_cast<float>(uniform_real(rng, -1, 1));
  std::optional<std::vector<std::uint32_t>> l;
  if (labels) {
    l.emplace(n);
    for (auto& x : *l) x = static_cast<std::uint32_t>(uniform_int(rng, 0, 3));
  }
  return PointCloud(std::move(coords), std::move(features), 2, std::move(l), CoordSpace::kNormalized);
}

// Bucket points with an ordered map keyed by the integer cell triple.
std::size_t bucket_oracle(const PointCloud& pc, int r) {
  std::map<std::tuple<int, int, int>, int> buckets;
  auto cell = [r](float v) {
    int i = static_cast<int>(std::floor(static_cast<double>(v) * r));
    return std::min(std::max(i, 0), r - 1);
  };
  for (const auto& p : pc.coords()) ++buckets[{cell(p[0]), cell(p[1]), cell(p[2])}];
  std::size_t count = 0;
  for (const auto& [key, n] : buckets) count += n == 1 ? 1 : 0;
  return count;
}

TEST(PointCloud, RejectsInvalidConstruction) {
  EXPECT_THROW(PointCloud({}, {}, 1), ContractError);
  EXPECT_THROW(PointCloud({{0, 0, 0}}, {1.0f, 2.0f}, 1), DimensionError);
  EXPECT_THROW(PointCloud({{NAN, 0, 0}}, {1.0f}, 1), ContractError);
  EXPECT_THROW(PointCloud({{1.5f, 0, 0}}, {1.0f}, 1, std::nullopt, CoordSpace::kNormalized),
               ContractError);
  EXPECT_THROW(PointCloud({{0, 0, 0}}, {1.0f}, 1, std::vector<std::uint32_t>{0, 1}), DimensionError);
}

TEST(Normalize, SymmetricPair) {
  const auto out = normalize(raw_cloud({{-1, 0, 0}, {1, 0, 0}}));
  ASSERT_TRUE(out.normalized());
  EXPECT_FLOAT_EQ(out.coords()[0][0], 0.0f);
  EXPECT_FLOAT_EQ(out.coords()[0][1], 0.5f);
  EXPECT_FLOAT_EQ(out.coords()[0][2], 0.5f);
  EXPECT_FLOAT_EQ(out.coords()[1][0], 1.0f);
  EXPECT_FLOAT_EQ(out.coords()[1][1], 0.5f);
}

TEST(Normalize, DegenerateMapsToCenter) {
  for (const auto& cloud : {raw_cloud({{3.0f, -7.0f, 11.0f}}), raw_cloud({{2, 2, 2}, {2, 2, 2}})}) {
    const auto out = normalize(cloud);
    for (const auto& p : out.coords())
      for (float v : p) EXPECT_EQ(v, 0.5f);
  }
}

TEST(Normalize, RejectsNormalizedInput) {
  EXPECT_THROW(normalize(random_normalized(4, 1)), ContractError);
}

TEST(Normalize, UnitBallInvariants) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<Point3> coords(50);
    for (auto& p : coords)
      for (float& v : p) v = static_cast<float>(uniform_real(rng, -30, 80));
    const auto out = normalize(raw_cloud(coords));
    double max_norm = 0, mean[3] = {0, 0, 0};
    for (const auto& p : out.coords()) {
      double s = 0;
      for (int d = 0; d < 3; ++d) {
        const double u = 2.0 * p[d] - 1.0;
        s += u * u;
        mean[d] += u / 50.0;
      }
      max_norm = std::max(max_norm, std::sqrt(s));
    }
    EXPECT_NEAR(max_norm, 1.0, 1e-6);
    for (double m : mean) EXPECT_NEAR(m, 0.0, 1e-6);

    // The centered/scaled representation normalizes to itself.
    std::vector<Point3> unit(out.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      for (int d = 0; d < 3; ++d) unit[i][d] = 2.0f * out.coords()[i][d] - 1.0f;
    const auto again = normalize(raw_cloud(unit));
    for (std::size_t i = 0; i < out.size(); ++i)
      for (int d = 0; d < 3; ++d) EXPECT_NEAR(again.coords()[i][d], out.coords()[i][d], 1e-6);
  }
}

TEST(VoxelIndex, ClampsBoundary) {
  EXPECT_EQ(voxel_index(1.0f, 8), 7);
  EXPECT_EQ(voxel_index(0.0f, 8), 0);
  EXPECT_EQ(voxel_index(0.125f, 8), 1);
  EXPECT_EQ(voxel_index(0.99f, 1), 0);
}

TEST(Distinguishable, DistinctAndShared) {
  std::vector<Point3> distinct = {{0.1f, 0.1f, 0.1f}, {0.9f, 0.1f, 0.1f}, {0.1f, 0.9f, 0.6f}};
  const PointCloud a(distinct, std::vector<float>(3, 0.0f), 1, std::nullopt, CoordSpace::kNormalized);
  const auto da = count_distinguishable(a, 2);
  EXPECT_EQ(da.count, 3u);
  EXPECT_DOUBLE_EQ(da.fraction, 1.0);

  std::vector<Point3> same(5, Point3{0.2f, 0.2f, 0.2f});
  const PointCloud b(same, std::vector<float>(5, 0.0f), 1, std::nullopt, CoordSpace::kNormalized);
  EXPECT_EQ(count_distinguishable(b, 4).count, 0u);
  EXPECT_THROW(count_distinguishable(raw_cloud({{0, 0, 0}}), 4), ContractError);
}

TEST(Distinguishable, MatchesBucketOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pc = random_normalized(300 + 70 * seed, seed);
    for (int r : {1, 3, 5, 8, 13, 16, 32, 64}) {
      EXPECT_EQ(count_distinguishable(pc, r).count, bucket_oracle(pc, r)) << "seed " << seed << " r " << r;
    }
  }
}

TEST(Distinguishable, NonDecreasingOnNestedGrids) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pc = random_normalized(1000, 100 + seed);
    double previous = -1.0;
    for (int r : {8, 16, 32, 64, 128}) {
      const double f = count_distinguishable(pc, r).fraction;
      EXPECT_GE(f, previous) << "r " << r;
      previous = f;
    }
  }
}

TEST(Synthetic, SinglePlaneHasOneLabel) {
  SceneConfig config;
  config.primitives = {{PrimitiveKind::kPlane, 1, 200}};
  const auto pc = generate_synthetic_scene(config, 42);
  ASSERT_TRUE(pc.has_labels());
  EXPECT_EQ(pc.size(), 200u);
  for (auto l : *pc.labels()) EXPECT_EQ(l, 0u);
}

TEST(Synthetic, Deterministic) {
  const auto config = default_scene_config();
  const auto a = encode_point_cloud(generate_synthetic_scene(config, 9));
  const auto b = encode_point_cloud(generate_synthetic_scene(config, 9));
  const auto c = encode_point_cloud(generate_synthetic_scene(config, 10));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Synthetic, LabelCountsFollowConfig) {
  const auto config = default_scene_config();
  const auto pc = generate_synthetic_scene(config, 3);
  std::vector<std::size_t> counts(kNumPrimitiveKinds, 0);
  for (auto l : *pc.labels()) ++counts.at(l);
  for (const auto& spec : config.primitives) {
    EXPECT_EQ(counts[static_cast<std::size_t>(spec.kind)],
              static_cast<std::size_t>(spec.count * spec.points_per_instance));
  }
  EXPECT_EQ(pc.channels(), 3u);
}

TEST(Synthetic, EmptyConfigRejected) {
  EXPECT_THROW(generate_synthetic_scene(SceneConfig{}, 1), ConfigError);
  SceneConfig zero;
  zero.primitives = {{PrimitiveKind::kBox, 0, 10}};
  EXPECT_THROW(generate_synthetic_scene(zero, 1), ConfigError);
}

TEST(Synthetic, PolesLoseMorePointsThanPlanes) {
  SceneConfig config;
  config.primitives = {{PrimitiveKind::kPlane, 1, 64}, {PrimitiveKind::kPole, 1, 64}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pc = normalize(generate_synthetic_scene(config, seed));
    const auto sole = sole_occupancy(pc, 8);
    double hit[2] = {0, 0}, total[2] = {0, 0};
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const int k = (*pc.labels())[i] == 0 ? 0 : 1;
      total[k] += 1;
      hit[k] += sole[i] ? 1 : 0;
    }
    EXPECT_LT(hit[1] / total[1], hit[0] / total[0]) << "seed " << seed;
  }
}

TEST(Synthetic, PrimitiveNames) {
  for (std::uint32_t k = 0; k < kNumPrimitiveKinds; ++k) {
    const auto kind = static_cast<PrimitiveKind>(k);
    EXPECT_EQ(parse_primitive(primitive_name(kind)), kind);
  }
  EXPECT_FALSE(parse_primitive("cone").has_value());
}

TEST(PvpcIo, RoundTripIsBitExact) {
  for (bool labels : {true, false}) {
    const auto pc = random_normalized(37, 5, labels);
    const auto bytes = encode_point_cloud(pc);
    const auto back = decode_point_cloud(bytes);
    EXPECT_EQ(encode_point_cloud(back), bytes);
    EXPECT_EQ(back.has_labels(), labels);
    EXPECT_TRUE(back.normalized());
    EXPECT_EQ(back.channels(), 2u);
  }
  const auto raw = generate_synthetic_scene(default_scene_config(), 1);
  const auto path = (std::filesystem::temp_directory_path() / "pvkit_io_test.pvpc").string();
  save_point_cloud(path, raw);
  const auto loaded = load_point_cloud(path);
  std::filesystem::remove(path);
  EXPECT_EQ(encode_point_cloud(loaded), encode_point_cloud(raw));
  EXPECT_FALSE(loaded.normalized());
}

TEST(PvpcIo, HeaderLayout) {
  const auto bytes = encode_point_cloud(random_normalized(2, 1, true));
  ASSERT_GE(bytes.size(), 24u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PVPC");
  ByteReader r(bytes, "t");
  r.get_bytes(4);
  EXPECT_EQ(r.get_uint<std::uint32_t>(), kPvpcVersion);
  EXPECT_EQ(r.get_uint<std::uint64_t>(), 2u);
  EXPECT_EQ(r.get_uint<std::uint32_t>(), 2u);
  EXPECT_EQ(r.get_uint<std::uint32_t>(), 3u);
  EXPECT_EQ(bytes.size(), 24u + 2 * 12 + 2 * 8 + 2 * 4);
}

IoErrorKind decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_point_cloud(bytes);
  } catch (const IoError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return IoErrorKind::kOpen;
}

TEST(PvpcIo, TypedErrors) {
  const auto bytes = encode_point_cloud(random_normalized(10, 2, true));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, std::size_t{30}, bytes.size() - 1}) {
    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + cut);
    const auto kind = decode_error(truncated);
    EXPECT_TRUE(kind == IoErrorKind::kTruncated || (cut < 4 && kind == IoErrorKind::kBadMagic)) << cut;
  }
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(decode_error(bad), IoErrorKind::kBadMagic);
  auto version = bytes;
  version[4] = 7;
  EXPECT_EQ(decode_error(version), IoErrorKind::kVersionMismatch);
  auto huge = bytes;
  huge[15] = 0x7f;  // top byte of N
  EXPECT_EQ(decode_error(huge), IoErrorKind::kTruncated);
  EXPECT_THROW(load_point_cloud("/nonexistent/dir/x.pvpc"), IoError);
}

TEST(SceneBatch, RequiresSharedWidth) {
  SceneBatch batch;
  batch.add(random_normalized(4, 1));
  batch.add(random_normalized(6, 2));
  EXPECT_EQ(batch.size(), 2u);
  EXPECT_THROW(batch.add(raw_cloud({{0, 0, 0}})), ContractError);
}

}  // namespace
}  // namespace pvkit::cloud
