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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ser {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimensions disagree with what an operation needs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached an operation that requires finite input.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An index (class label, target, axis) is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates its documented range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written, or has an unexpected layout.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. empty confusion matrix).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Stable 64-bit FNV-1a hash; used for config hashes and per-sample seeds.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent seed for a named sub-stream of a global seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t z = fnv1a64(tag) ^ (seed + 0x9e3779b97f4a7c15ULL);
  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ser
