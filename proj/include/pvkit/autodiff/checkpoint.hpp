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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pvkit/autodiff/tensor.hpp"

namespace pvkit::ad {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1, kI64 = 2, kU32 = 3 };

// Versioned little-endian tensor archive:
//   "PVNASCKPT" | version u32 | entry count u32 |
//   entries: name_len u16 | name | dtype u8 | rank u8 | dims u64[rank] | raw data
class Checkpoint {
 public:
  static constexpr char kMagic[] = "PVNASCKPT";
  static constexpr std::uint32_t kVersion = 1;

  struct Entry {
    std::string name;
    DType dtype = DType::kF32;
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> raw;  // little-endian element bytes
  };

  template <typename T>
  void put(const std::string& name, const std::vector<std::uint64_t>& dims,
           const std::vector<T>& values);
  template <typename T>
  void put(const std::string& name, const Tensor<T>& tensor);
  void put_int(const std::string& name, std::int64_t value);

  bool contains(const std::string& name) const;
  const Entry& entry(const std::string& name) const;
  // Element values converted to T; throws on a dtype that does not match T.
  template <typename T>
  std::vector<T> get(const std::string& name) const;
  std::int64_t get_int(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint parse(const std::vector<std::uint8_t>& bytes,
                          const std::string& context = "checkpoint");
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  void upsert(Entry entry);
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

// Copies parameter values and buffers into / out of an archive. Loading
// requires every name to exist with a matching element count.
template <typename T>
void store_state(Checkpoint& ckpt, const std::vector<NamedParameter<T>>& params,
                 const std::vector<NamedBuffer<T>>& buffers);
template <typename T>
void restore_state(const Checkpoint& ckpt, std::vector<NamedParameter<T>>& params,
                   const std::vector<NamedBuffer<T>>& buffers);

}  // namespace pvkit::ad
