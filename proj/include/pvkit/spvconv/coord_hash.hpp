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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pvkit::sparse {

// (batch, u, v, w). Components must fit in 16 bits.
using VoxelCoord = std::array<std::int32_t, 4>;

std::string to_string(const VoxelCoord& c);

// 64-bit FNV-1a over the four coordinates packed as little-endian int16.
std::uint64_t hash_coord(const VoxelCoord& c);

// Open addressing with linear probing, load factor at most 0.5. An insert
// that would probe past the limit triggers a rebuild at twice the capacity,
// so every lookup is bounded by max_probe_length() + 1 slots.
class CoordHashTable {
 public:
  static constexpr std::int64_t kMiss = -1;
  static constexpr std::size_t kProbeLimit = 32;

  CoordHashTable() = default;
  // Maps coords[i] -> i. Duplicates raise DuplicateCoordinateError.
  explicit CoordHashTable(std::span<const VoxelCoord> coords);

  // Row index or kMiss. Adds the number of slots inspected to *probes.
  std::int64_t find(const VoxelCoord& c, std::uint64_t* probes = nullptr) const;

  // Returns (row, inserted). New keys receive row == size() before insertion.
  std::pair<std::int64_t, bool> insert(const VoxelCoord& c);

  std::size_t size() const { return keys_.size(); }
  std::size_t capacity() const { return slots_.size(); }
  std::size_t max_probe_length() const { return max_probe_; }
  std::size_t rebuilds() const { return rebuilds_; }
  // Slots inspected by insertions (including rebuilds).
  std::uint64_t insert_probes() const { return insert_probes_; }
  const std::vector<VoxelCoord>& keys() const { return keys_; }

 private:
  struct Slot {
    VoxelCoord key;
    std::int64_t row = kMiss;
  };

  void rehash(std::size_t capacity);
  // Places an absent key; false when the probe limit is exceeded.
  bool place(const VoxelCoord& c, std::int64_t row);

  std::vector<Slot> slots_;
  std::vector<VoxelCoord> keys_;
  std::size_t max_probe_ = 0;
  std::size_t rebuilds_ = 0;
  std::uint64_t insert_probes_ = 0;
};

}  // namespace pvkit::sparse
