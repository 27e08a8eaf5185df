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

#include "pvkit/spvconv/coord_hash.hpp"

#include <bit>

#include "pvkit/common/errors.hpp"

namespace pvkit::sparse {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void check_range(const VoxelCoord& c) {
  for (auto v : c) {
    if (v < INT16_MIN || v > INT16_MAX) {
      throw ContractError("voxel coordinate " + to_string(c) + " does not fit in 16 bits");
    }
  }
}

}  // namespace

std::string to_string(const VoxelCoord& c) {
  return "(" + std::to_string(c[0]) + ", " + std::to_string(c[1]) + ", " + std::to_string(c[2]) +
         ", " + std::to_string(c[3]) + ")";
}

std::uint64_t hash_coord(const VoxelCoord& c) {
  std::uint64_t h = kFnvOffset;
  for (auto v : c) {
    const auto packed = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
    h = (h ^ (packed & 0xffu)) * kFnvPrime;
    h = (h ^ (packed >> 8)) * kFnvPrime;
  }
  return h;
}

CoordHashTable::CoordHashTable(std::span<const VoxelCoord> coords) {
  rehash(std::bit_ceil(std::max<std::size_t>(2 * coords.size(), 16)));
  for (const auto& c : coords) {
    if (!insert(c).second) {
      throw DuplicateCoordinateError("duplicate voxel coordinate " + to_string(c));
    }
  }
}

std::int64_t CoordHashTable::find(const VoxelCoord& c, std::uint64_t* probes) const {
  if (slots_.empty()) return kMiss;
  const std::size_t mask = slots_.size() - 1;
  std::size_t i = hash_coord(c) & mask;
  for (std::size_t n = 0; n <= max_probe_; ++n, i = (i + 1) & mask) {
    if (probes) ++*probes;
    const Slot& s = slots_[i];
    if (s.row == kMiss) return kMiss;
    if (s.key == c) return s.row;
  }
  return kMiss;
}

bool CoordHashTable::place(const VoxelCoord& c, std::int64_t row) {
  const std::size_t mask = slots_.size() - 1;
  std::size_t i = hash_coord(c) & mask;
  for (std::size_t n = 0; n < kProbeLimit; ++n, i = (i + 1) & mask) {
    ++insert_probes_;
    if (slots_[i].row == kMiss) {
      slots_[i] = {c, row};
      max_probe_ = std::max(max_probe_, n);
      return true;
    }
  }
  return false;
}

void CoordHashTable::rehash(std::size_t capacity) {
  for (;;) {
    slots_.assign(capacity, Slot{});
    max_probe_ = 0;
    bool ok = true;
    for (std::size_t r = 0; r < keys_.size() && ok; ++r) ok = place(keys_[r], static_cast<std::int64_t>(r));
    if (ok) return;
    capacity *= 2;
    ++rebuilds_;
  }
}

std::pair<std::int64_t, bool> CoordHashTable::insert(const VoxelCoord& c) {
  check_range(c);
  if (slots_.empty()) rehash(16);
  if (const auto row = find(c, &insert_probes_); row != kMiss) return {row, false};
  const auto row = static_cast<std::int64_t>(keys_.size());
  keys_.push_back(c);
  if (2 * keys_.size() > slots_.size()) {
    ++rebuilds_;
    rehash(slots_.size() * 2);
    return {row, true};
  }
  if (!place(c, row)) {
    ++rebuilds_;
    rehash(slots_.size() * 2);
  }
  return {row, true};
}

}  // namespace pvkit::sparse
