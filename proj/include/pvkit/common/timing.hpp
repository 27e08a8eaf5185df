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

#include <chrono>
#include <cstdint>

namespace pvkit {

inline std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Fixes glibc's mmap and trim thresholds so large buffers are recycled from
// the heap instead of being mapped and unmapped on every pass. Otherwise the
// dynamic threshold makes per-call cost depend on earlier allocations.
// Idempotent; a no-op on other C libraries.
void pin_allocator_for_timing();

// Accumulated wall time per phase of a point-voxel forward pass.
struct PhaseTimes {
  std::int64_t voxelize_ns = 0;
  std::int64_t conv_ns = 0;
  std::int64_t devoxelize_ns = 0;
  std::int64_t mlp_ns = 0;
  std::int64_t total() const { return voxelize_ns + conv_ns + devoxelize_ns + mlp_ns; }
};

// Adds the lifetime of the scope to *slot; a null slot disables timing.
class ScopedPhase {
 public:
  explicit ScopedPhase(std::int64_t* slot) : slot_(slot), start_(slot ? now_ns() : 0) {}
  ~ScopedPhase() {
    if (slot_) *slot_ += now_ns() - start_;
  }
  ScopedPhase(const ScopedPhase&) = delete;
  ScopedPhase& operator=(const ScopedPhase&) = delete;

 private:
  std::int64_t* slot_;
  std::int64_t start_;
};

}  // namespace pvkit
