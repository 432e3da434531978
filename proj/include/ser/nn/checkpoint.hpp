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
#include <filesystem>
#include <string>
#include <vector>

#include "ser/nn/tensor.hpp"

namespace ser::nn {

/// Flat parameter archive.
///
/// Layout (all integers little-endian u64 unless noted):
///   magic "SERCKPT1" (8 bytes), seed, config_hash,
///   config text (length + bytes), entry count,
///   per entry: path (length + bytes), rank, dims[rank], values as LE float64.
struct Checkpoint {
  struct Entry {
    std::string path;
    std::vector<Index> shape;
    Eigen::VectorXd values;
  };

  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string config;  ///< serialized model/experiment configuration
  std::vector<Entry> entries;

  void add(const std::string& path, const TensorD& t);
  const Entry& at(const std::string& path) const;
  bool contains(const std::string& path) const;

  void save(const std::filesystem::path& file) const;
  static Checkpoint load(const std::filesystem::path& file);
};

}  // namespace ser::nn
