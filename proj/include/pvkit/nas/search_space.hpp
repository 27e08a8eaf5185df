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
#include <string>
#include <vector>

#include "json.hpp"
#include "pvkit/common/random.hpp"

namespace pvkit::nas {

struct StageSpec {
  int max_depth = 1;
  std::vector<std::size_t> channels;  // sorted, unique, non-empty
  int stride = 1;                     // 2 downsamples in the stage's first layer
};

// Elastic depth per stage and a channel choice per layer; kernel size is
// fixed at 3 everywhere.
class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<StageSpec> stages);

  const std::vector<StageSpec>& stages() const { return stages_; }
  std::size_t num_stages() const { return stages_.size(); }
  std::size_t total_slots() const;
  std::size_t vector_length() const { return num_stages() + total_slots(); }
  // Number of distinct architectures (sum over depths of channel products).
  double size() const;

  // Multiples of `quantum` between 25% and 100% of `max_channels`.
  static std::vector<std::size_t> default_channels(std::size_t max_channels, std::size_t quantum = 4);

 private:
  std::vector<StageSpec> stages_;
};

// A concrete candidate: per-stage depth and the channels of its active
// layers only.
struct ArchSpec {
  std::vector<int> depths;
  std::vector<std::vector<std::size_t>> channels;

  bool operator==(const ArchSpec&) const = default;
  std::size_t total_depth() const;
};

// Throws ContractError naming the offending gene.
void validate(const SearchSpace& space, const ArchSpec& arch);
bool is_valid(const SearchSpace& space, const ArchSpec& arch);
ArchSpec maximal_arch(const SearchSpace& space);

// Fixed-length encoding: d_s / m_s per stage, then channel / stage max for
// every layer slot, 0 for slots beyond the stage depth.
std::vector<double> encode(const SearchSpace& space, const ArchSpec& arch);
// Inverse of encode; rejects vectors that do not name a valid arch.
ArchSpec decode(const SearchSpace& space, const std::vector<double>& vector);

// Depth uniform over [floor_s, m_s], then each active layer's channels
// uniform over its stage's choices.
ArchSpec sample_uniform(const SearchSpace& space, const std::vector<int>& depth_floors, Rng& rng);
ArchSpec sample_uniform(const SearchSpace& space, const std::vector<int>& depth_floors, std::uint64_t seed);
std::vector<int> full_depth_floors(const SearchSpace& space);  // floors of 1

// Per-epoch depth floor for progressive shrinking: epochs split into m
// near-equal segments (earlier segments take the remainder), segment k
// (1-based) admits depths [m - k + 1, m].
std::vector<int> depth_shrink_schedule(int max_depth, int total_epochs);

// Every architecture of the space, in a fixed order. Intended for small
// spaces (tests, exhaustive baselines).
std::vector<ArchSpec> enumerate(const SearchSpace& space, std::size_t limit = 1u << 20);

SearchSpace search_space_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SearchSpace& space);
ArchSpec arch_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ArchSpec& arch);
std::string to_string(const ArchSpec& arch);

}  // namespace pvkit::nas
