// Copyright 2026 The flexff Authors.
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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "flexff/common/error.hpp"

// Little-endian byte buffers for the checkpoint and dataset containers.

namespace flexff::binary {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

using Bytes = std::vector<std::uint8_t>;

template <typename T>
void put(Bytes& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

inline void put_raw(Bytes& out, const void* data, std::size_t len) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + len);
}

// Sequential reader; every overrun throws with the given error code.
class Reader {
 public:
  Reader(const Bytes& bytes, const char* error_code) : bytes_(bytes), code_(error_code) {}

  template <typename T>
  T get() {
    T value;
    read(&value, sizeof(T));
    return value;
  }

  void read(void* dst, std::size_t len) {
    require(len <= remaining(), code_, "truncated file");
    std::memcpy(dst, bytes_.data() + pos_, len);
    pos_ += len;
  }

  std::string string(std::size_t len) {
    require(len <= remaining(), code_, "truncated file");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  bool match(const char* magic, std::size_t len) {
    if (len > remaining() || std::memcmp(bytes_.data() + pos_, magic, len) != 0) return false;
    pos_ += len;
    return true;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* here() const { return bytes_.data() + pos_; }

 private:
  const Bytes& bytes_;
  const char* code_;
  std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path, const char* missing_code);
void write_file(const std::filesystem::path& path, const Bytes& bytes);

}  // namespace flexff::binary
