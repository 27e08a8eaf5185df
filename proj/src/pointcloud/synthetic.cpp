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

#include "pvkit/pointcloud/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pvkit/common/errors.hpp"
#include "pvkit/common/random.hpp"

namespace pvkit::cloud {
namespace {

constexpr double kTwoPi = 6.283185307179586;

struct Sampler {
  Rng rng;
  double extent;

  double u(double lo, double hi) { return uniform_real(rng, lo, hi); }
  double ground_coord() { return u(-0.4 * extent, 0.4 * extent); }

  void plane(int n, std::vector<Point3>& out) {
    const double cx = u(-0.2, 0.2) * extent, cy = u(-0.2, 0.2) * extent;
    const double half = 0.5 * u(0.6, 1.0) * extent;
    for (int i = 0; i < n; ++i) {
      out.push_back({static_cast<float>(cx + u(-half, half)), static_cast<float>(cy + u(-half, half)), 0.0f});
    }
  }

  void sphere(int n, std::vector<Point3>& out) {
    const double radius = u(0.04, 0.08) * extent;
    const double cx = ground_coord(), cy = ground_coord();
    for (int i = 0; i < n; ++i) {
      // Uniform on the sphere via z ~ U(-1, 1), phi ~ U(0, 2pi).
      const double z = u(-1.0, 1.0), phi = u(0.0, kTwoPi);
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      out.push_back({static_cast<float>(cx + radius * rho * std::cos(phi)),
                     static_cast<float>(cy + radius * rho * std::sin(phi)),
                     static_cast<float>(radius + radius * z)});
    }
  }

  void box(int n, std::vector<Point3>& out) {
    const double sx = u(0.05, 0.12) * extent, sy = u(0.05, 0.12) * extent, sz = u(0.05, 0.12) * extent;
    const double cx = ground_coord(), cy = ground_coord();
    const double areas[3] = {sy * sz, sx * sz, sx * sy};  // faces normal to x, y, z
    const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
    for (int i = 0; i < n; ++i) {
      double pick = u(0.0, total);
      int face = 0;
      while (face < 5 && pick >= areas[face / 2]) {
        pick -= areas[face / 2];
        ++face;
      }
      const int axis = face / 2;
      const double sign = face % 2 ? 0.5 : -0.5;
      double p[3] = {u(-0.5, 0.5) * sx, u(-0.5, 0.5) * sy, u(0.0, 1.0) * sz};
      if (axis == 0) p[0] = sign * sx;
      if (axis == 1) p[1] = sign * sy;
      if (axis == 2) p[2] = (sign + 0.5) * sz;
      out.push_back({static_cast<float>(cx + p[0]), static_cast<float>(cy + p[1]), static_cast<float>(p[2])});
    }
  }

  void pole(int n, std::vector<Point3>& out) {
    const double radius = 0.006 * extent;
    const double height = u(0.12, 0.2) * extent;
    const double cx = ground_coord(), cy = ground_coord();
    for (int i = 0; i < n; ++i) {
      const double phi = u(0.0, kTwoPi);
      out.push_back({static_cast<float>(cx + radius * std::cos(phi)),
                     static_cast<float>(cy + radius * std::sin(phi)), static_cast<float>(u(0.0, height))});
    }
  }
};

}  // namespace

std::string_view primitive_name(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::kPlane:
      return "plane";
    case PrimitiveKind::kSphere:
      return "sphere";
    case PrimitiveKind::kBox:
      return "box";
    case PrimitiveKind::kPole:
      return "pole";
  }
  return "unknown";
}

std::optional<PrimitiveKind> parse_primitive(std::string_view name) {
  for (std::uint32_t k = 0; k < kNumPrimitiveKinds; ++k) {
    if (primitive_name(static_cast<PrimitiveKind>(k)) == name) return static_cast<PrimitiveKind>(k);
  }
  return std::nullopt;
}

PointCloud generate_synthetic_scene(const SceneConfig& config, std::uint64_t seed) {
  if (config.primitives.empty()) throw ConfigError("scene config names no primitives");
  if (!(config.extent > 0.0)) throw ConfigError("scene extent must be positive");
  std::size_t total = 0;
  for (const auto& spec : config.primitives) {
    if (spec.count < 0 || spec.points_per_instance < 0) {
      throw ConfigError("primitive counts must be non-negative");
    }
    total += static_cast<std::size_t>(spec.count) * spec.points_per_instance;
  }
  if (total == 0) throw ConfigError("scene config generates no points");

  Sampler sampler{Rng(seed), config.extent};
  std::vector<Point3> coords;
  std::vector<std::uint32_t> labels;
  coords.reserve(total);
  labels.reserve(total);
  for (const auto& spec : config.primitives) {
    for (int c = 0; c < spec.count; ++c) {
      switch (spec.kind) {
        case PrimitiveKind::kPlane:
          sampler.plane(spec.points_per_instance, coords);
          break;
        case PrimitiveKind::kSphere:
          sampler.sphere(spec.points_per_instance, coords);
          break;
        case PrimitiveKind::kBox:
          sampler.box(spec.points_per_instance, coords);
          break;
        case PrimitiveKind::kPole:
          sampler.pole(spec.points_per_instance, coords);
          break;
      }
      labels.resize(coords.size(), static_cast<std::uint32_t>(spec.kind));
    }
  }
  const double sigma = config.jitter * config.extent;
  if (sigma > 0.0) {
    for (auto& p : coords)
      for (auto& v : p) v = static_cast<float>(v + normal(sampler.rng, 0.0, sigma));
  }

  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_int(sampler.rng, 0, static_cast<std::int64_t>(i) - 1)]);
    }
  }
  std::vector<Point3> out_coords(coords.size());
  std::vector<std::uint32_t> out_labels(coords.size());
  std::vector<float> features(coords.size() * 3);
  for (std::size_t i = 0; i < order.size(); ++i) {
    out_coords[i] = coords[order[i]];
    out_labels[i] = labels[order[i]];
    for (int d = 0; d < 3; ++d) {
      features[i * 3 + d] = static_cast<float>(out_coords[i][d] / config.extent);
    }
  }
  return PointCloud(std::move(out_coords), std::move(features), 3, std::move(out_labels),
                    CoordSpace::kRaw);
}

SceneConfig default_scene_config(int points_scale) {
  SceneConfig config;
  config.extent = 40.0;
  config.primitives = {
      {PrimitiveKind::kPlane, 1, 256 * points_scale},
      {PrimitiveKind::kSphere, 2, 64 * points_scale},
      {PrimitiveKind::kBox, 2, 64 * points_scale},
      {PrimitiveKind::kPole, 3, 32 * points_scale},
  };
  return config;
}

PointCloud generate_scene_with_points(std::size_t points, std::uint64_t seed) {
  if (points == 0) throw ConfigError("scene needs at least one point");
  std::size_t base = 0;
  for (const auto& p : default_scene_config().primitives) base += static_cast<std::size_t>(p.count) * p.points_per_instance;
  const int scale = static_cast<int>((points + base - 1) / base);
  auto pc = generate_synthetic_scene(default_scene_config(scale), seed);
  if (pc.size() == points) return pc;
  const std::size_t c = pc.channels();
  const auto n = static_cast<std::ptrdiff_t>(points);
  return PointCloud(std::vector<Point3>(pc.coords().begin(), pc.coords().begin() + n),
                    std::vector<float>(pc.features().begin(), pc.features().begin() + n * static_cast<std::ptrdiff_t>(c)),
                    c, std::vector<std::uint32_t>(pc.labels()->begin(), pc.labels()->begin() + n), pc.space());
}

}  // namespace pvkit::cloud
