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

#include "ser/nn/checkpoint.hpp"

#include <fstream>

#include "ser/common/binary_io.hpp"

namespace ser::nn {

namespace {
constexpr char kMagic[8] = {'S', 'E', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint64_t kMaxRank = 8;
}  // namespace

void Checkpoint::add(const std::string& path, const TensorD& t) {
  if (contains(path)) throw Error("checkpoint: duplicate entry '" + path + "'");
  entries.push_back({path, t.shape(), t.data()});
}

bool Checkpoint::contains(const std::string& path) const {
  for (const auto& e : entries) {
    if (e.path == path) return true;
  }
  return false;
}

const Checkpoint::Entry& Checkpoint::at(const std::string& path) const {
  for (const auto& e : entries) {
    if (e.path == path) return e;
  }
  throw Error("checkpoint: no entry '" + path + "'");
}

void Checkpoint::save(const std::filesystem::path& file) const {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  io::write_uint<std::uint64_t>(os, seed);
  io::write_uint<std::uint64_t>(os, config_hash);
  io::write_string(os, config);
  io::write_uint<std::uint64_t>(os, entries.size());
  for (const auto& e : entries) {
    io::write_string(os, e.path);
    io::write_uint<std::uint64_t>(os, e.shape.size());
    for (Index d : e.shape) io::write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    for (Index i = 0; i < e.values.size(); ++i) io::write_f64(os, e.values[i]);
  }
  if (!os) throw IoError("write failed: " + file.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kMagic)) {
    throw IoError(file.string() + ": not a checkpoint archive");
  }
  Checkpoint ck;
  ck.seed = io::read_uint<std::uint64_t>(is);
  ck.config_hash = io::read_uint<std::uint64_t>(is);
  ck.config = io::read_string(is);
  const auto count = io::read_uint<std::uint64_t>(is);
  for (std::uint64_t k = 0; k < count; ++k) {
    Entry e;
    e.path = io::read_string(is, 4096);
    const auto rank = io::read_uint<std::uint64_t>(is);
    if (rank > kMaxRank) throw IoError(file.string() + ": entry '" + e.path + "' has rank " + std::to_string(rank));
    Index n = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      const auto d = io::read_uint<std::uint64_t>(is);
      if (d == 0 || d > (1u << 30)) throw IoError(file.string() + ": bad dimension in '" + e.path + "'");
      e.shape.push_back(static_cast<Index>(d));
      n *= static_cast<Index>(d);
    }
    e.values.resize(n);
    for (Index i = 0; i < n; ++i) e.values[i] = io::read_f64(is);
    ck.entries.push_back(std::move(e));
  }
  if (ck.config_hash != fnv1a64(ck.config)) {
    throw IoError(file.string() + ": config hash does not match stored config");
  }
  return ck;
}

}  // namespace ser::nn
