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

namespace pvkit {

// Thread-local tally of multiply-accumulates executed by the GEMM-backed
// kernels (matmul, dense conv, sparse conv). Used to validate analytic MAC
// estimates against what actually ran.
class MacCounter {
 public:
  static void add(std::uint64_t macs) { value_ += macs; }
  static std::uint64_t value() { return value_; }
  static void reset() { value_ = 0; }

 private:
  static inline thread_local std::uint64_t value_ = 0;
};

// Captures the MACs executed during its lifetime.
class ScopedMacCount {
 public:
  ScopedMacCount() : start_(MacCounter::value()) {}
  std::uint64_t elapsed() const { return MacCounter::value() - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace pvkit
