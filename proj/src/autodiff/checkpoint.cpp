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

#include "pvkit/autodiff/checkpoint.hpp"

#include <algorithm>
#include <cstring>

#include "pvkit/common/binary_io.hpp"
#include "pvkit/common/errors.hpp"

namespace pvkit::ad {
namespace {

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kF32; }
template <>
constexpr DType dtype_of<double>() { return DType::kF64; }
template <>
constexpr DType dtype_of<std::int64_t>() { return DType::kI64; }
template <>
constexpr DType dtype_of<std::uint32_t>() { return DType::kU32; }

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kF32:
    case DType::kU32:
      return 4;
    case DType::kF64:
    case DType::kI64:
      return 8;
  }
  throw IoError(IoErrorKind::kFormat, "unknown dtype tag " + std::to_string(static_cast<int>(t)));
}

template <typename T>
std::vector<std::uint8_t> to_le_bytes(const std::vector<T>& values) {
  ByteWriter w;
  for (const T& v : values) {
    if constexpr (std::is_same_v<T, float>) {
      w.put_f32(v);
    } else if constexpr (std::is_same_v<T, double>) {
      w.put_f64(v);
    } else {
      w.put_uint(static_cast<std::make_unsigned_t<T>>(v));
    }
  }
  return w.bytes();
}

std::uint64_t product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

template <typename T>
void Checkpoint::put(const std::string& name, const std::vector<std::uint64_t>& dims,
                     const std::vector<T>& values) {
  if (product(dims) != values.size()) {
    throw DimensionError("checkpoint entry " + name + ": dims do not match value count");
  }
  if (name.size() > UINT16_MAX) throw ContractError("checkpoint entry name too long");
  if (dims.size() > UINT8_MAX) throw ContractError("checkpoint entry rank too large");
  upsert(Entry{name, dtype_of<T>(), dims, to_le_bytes(values)});
}

template <typename T>
void Checkpoint::put(const std::string& name, const Tensor<T>& tensor) {
  std::vector<std::uint64_t> dims(tensor.shape().begin(), tensor.shape().end());
  put(name, dims, std::vector<T>(tensor.data().begin(), tensor.data().end()));
}

void Checkpoint::put_int(const std::string& name, std::int64_t value) {
  put<std::int64_t>(name, {}, std::vector<std::int64_t>{value});
}

bool Checkpoint::contains(const std::string& name) const { return index_.count(name) != 0; }

const Checkpoint::Entry& Checkpoint::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw IoError(IoErrorKind::kFormat, "checkpoint has no entry " + name);
  return entries_[it->second];
}

template <typename T>
std::vector<T> Checkpoint::get(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != dtype_of<T>()) {
    throw IoError(IoErrorKind::kFormat, "checkpoint entry " + name + " has a different dtype");
  }
  ByteReader r(e.raw, "checkpoint entry " + name);
  std::vector<T> out(product(e.dims));
  for (auto& v : out) {
    if constexpr (std::is_same_v<T, float>) {
      v = r.get_f32();
    } else if constexpr (std::is_same_v<T, double>) {
      v = r.get_f64();
    } else {
      v = static_cast<T>(r.get_uint<std::make_unsigned_t<T>>());
    }
  }
  return out;
}

std::int64_t Checkpoint::get_int(const std::string& name) const {
  return get<std::int64_t>(name).at(0);
}

void Checkpoint::upsert(Entry entry) {
  auto it = index_.find(entry.name);
  if (it != index_.end()) {
    entries_[it->second] = std::move(entry);
    return;
  }
  index_[entry.name] = entries_.size();
  entries_.push_back(std::move(entry));
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic, sizeof(kMagic) - 1));
  w.put_uint<std::uint32_t>(kVersion);
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    w.put_uint<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.put_bytes(e.name);
    w.put_uint<std::uint8_t>(static_cast<std::uint8_t>(e.dtype));
    w.put_uint<std::uint8_t>(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) w.put_uint<std::uint64_t>(d);
    w.put_bytes(std::string_view(reinterpret_cast<const char*>(e.raw.data()), e.raw.size()));
  }
  return w.bytes();
}

Checkpoint Checkpoint::parse(const std::vector<std::uint8_t>& bytes, const std::string& context) {
  ByteReader r(bytes, context);
  const std::size_t magic_len = sizeof(kMagic) - 1;
  if (r.remaining() < magic_len || r.get_bytes(magic_len) != std::string(kMagic, magic_len)) {
    throw IoError(IoErrorKind::kBadMagic, context + ": bad magic");
  }
  const auto version = r.get_uint<std::uint32_t>();
  if (version != kVersion) {
    throw IoError(IoErrorKind::kVersionMismatch,
                  context + ": unsupported version " + std::to_string(version));
  }
  const auto count = r.get_uint<std::uint32_t>();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const auto name_len = r.get_uint<std::uint16_t>();
    e.name = r.get_bytes(name_len);
    e.dtype = static_cast<DType>(r.get_uint<std::uint8_t>());
    const std::size_t elem = dtype_size(e.dtype);
    const auto rank = r.get_uint<std::uint8_t>();
    for (std::uint8_t d = 0; d < rank; ++d) e.dims.push_back(r.get_uint<std::uint64_t>());
    const std::uint64_t n = product(e.dims);
    if (n > r.remaining() / elem) {
      throw IoError(IoErrorKind::kTruncated, context + ": truncated in entry " + e.name);
    }
    const std::string raw = r.get_bytes(n * elem);
    e.raw.assign(raw.begin(), raw.end());
    ckpt.upsert(std::move(e));
  }
  return ckpt;
}

void Checkpoint::save(const std::string& path) const { write_file_bytes(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) { return parse(read_file_bytes(path), path); }

template <typename T>
void store_state(Checkpoint& ckpt, const std::vector<NamedParameter<T>>& params,
                 const std::vector<NamedBuffer<T>>& buffers) {
  for (const auto& p : params) ckpt.put("param/" + p.name, p.tensor);
  for (const auto& b : buffers) {
    ckpt.put<T>("buffer/" + b.name, {b.values->size()}, *b.values);
  }
}

template <typename T>
void restore_state(const Checkpoint& ckpt, std::vector<NamedParameter<T>>& params,
                   const std::vector<NamedBuffer<T>>& buffers) {
  for (auto& p : params) {
    const auto values = ckpt.get<T>("param/" + p.name);
    if (values.size() != p.tensor.numel()) {
      throw DimensionError("checkpoint parameter " + p.name + " has " +
                           std::to_string(values.size()) + " values, model expects " +
                           std::to_string(p.tensor.numel()));
    }
    std::copy(values.begin(), values.end(), p.tensor.mutable_data().begin());
  }
  for (const auto& b : buffers) {
    const auto values = ckpt.get<T>("buffer/" + b.name);
    if (values.size() != b.values->size()) {
      throw DimensionError("checkpoint buffer " + b.name + " size mismatch");
    }
    *b.values = values;
  }
}

template void Checkpoint::put(const std::string&, const std::vector<std::uint64_t>&,
                              const std::vector<float>&);
template void Checkpoint::put(const std::string&, const std::vector<std::uint64_t>&,
                              const std::vector<double>&);
template void Checkpoint::put(const std::string&, const std::vector<std::uint64_t>&,
                              const std::vector<std::int64_t>&);
template void Checkpoint::put(const std::string&, const std::vector<std::uint64_t>&,
                              const std::vector<std::uint32_t>&);
template void Checkpoint::put(const std::string&, const Tensor<float>&);
template void Checkpoint::put(const std::string&, const Tensor<double>&);
template std::vector<float> Checkpoint::get(const std::string&) const;
template std::vector<double> Checkpoint::get(const std::string&) const;
template std::vector<std::int64_t> Checkpoint::get(const std::string&) const;
template std::vector<std::uint32_t> Checkpoint::get(const std::string&) const;
template void store_state(Checkpoint&, const std::vector<NamedParameter<float>>&,
                          const std::vector<NamedBuffer<float>>&);
template void store_state(Checkpoint&, const std::vector<NamedParameter<double>>&,
                          const std::vector<NamedBuffer<double>>&);
template void restore_state(const Checkpoint&, std::vector<NamedParameter<float>>&,
                            const std::vector<NamedBuffer<float>>&);
template void restore_state(const Checkpoint&, std::vector<NamedParameter<double>>&,
                            const std::vector<NamedBuffer<double>>&);

}  // namespace pvkit::ad
