// Copyright 2026 The serlab Authors.
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
#include <istream>
#include <ostream>
#include <string>

#include "ser/common/error.hpp"

// Little-endian primitives shared by the checkpoint, embedding-store and
// matrix file formats.
namespace ser::io {

template <typename UInt>
inline UInt to_little_endian(UInt v) {
  if constexpr (std::endian::native == std::endian::big) {
    UInt out = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      out = static_cast<UInt>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  } else {
    return v;
  }
}

template <typename UInt>
inline void write_uint(std::ostream& os, UInt v) {
  v = to_little_endian(v);
  char buf[sizeof(UInt)];
  std::memcpy(buf, &v, sizeof(UInt));
  os.write(buf, sizeof(UInt));
}

template <typename UInt>
inline UInt read_uint(std::istream& is) {
  char buf[sizeof(UInt)];
  if (!is.read(buf, sizeof(UInt))) throw IoError("unexpected end of file");
  UInt v;
  std::memcpy(&v, buf, sizeof(UInt));
  return to_little_endian(v);
}

inline void write_f64(std::ostream& os, double v) {
  write_uint(os, std::bit_cast<std::uint64_t>(v));
}

inline double read_f64(std::istream& is) {
  return std::bit_cast<double>(read_uint<std::uint64_t>(is));
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_uint<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, std::uint64_t max_len = 1u << 26) {
  const auto n = read_uint<std::uint64_t>(is);
  if (n > max_len) throw IoError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw IoError("unexpected end of file");
  }
  return s;
}

}  // namespace ser::io
