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

#include "ser/dsp/waveform.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "ser/common/binary_io.hpp"

namespace ser::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw WavError(WavError::Kind::Malformed, path.string() + ": malformed WAV (" + why + ")");
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw WavError(WavError::Kind::NotFound, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12) malformed(path, "file shorter than RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    malformed(path, "missing RIFF/WAVE tags");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) malformed(path, "truncated fmt chunk");
      format = u16(bytes.data() + body);
      channels = u16(bytes.data() + body + 2);
      rate = u32(bytes.data() + body + 4);
      bits = u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) malformed(path, "truncated extensible fmt chunk");
        format = u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) malformed(path, "data chunk before fmt chunk");
      data = bytes.data() + body;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) malformed(path, "no fmt chunk");
  if (!data) malformed(path, "no data chunk");
  if (channels == 0 || rate == 0) malformed(path, "zero channels or sample rate");

  const bool pcm_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 32);
  const bool float_ok = format == kFormatFloat && bits == 32;
  if (!pcm_ok && !float_ok) {
    throw WavError(WavError::Kind::UnsupportedCodec,
                   path.string() + ": unsupported WAV encoding (format " + std::to_string(format) + ", " +
                       std::to_string(bits) + " bits)");
  }

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t frames = data_size / frame_bytes;
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + c * (bits / 8);
      double v = 0.0;
      if (format == kFormatFloat) {
        v = std::bit_cast<float>(u32(p));
      } else if (bits == 8) {
        v = (static_cast<double>(p[0]) - 128.0) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(u16(p)) / 32768.0;
      } else {
        v = static_cast<std::int32_t>(u32(p)) / 2147483648.0;
      }
      acc += v;
    }
    w.samples[static_cast<Eigen::Index>(f)] = acc / channels;
  }
  if (!w.samples.allFinite()) malformed(path, "non-finite samples");
  return w;
}

void save_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  os.write("RIFF", 4);
  io::write_uint<std::uint32_t>(os, 36 + 2 * n);
  os.write("WAVEfmt ", 8);
  io::write_uint<std::uint32_t>(os, 16);
  io::write_uint<std::uint16_t>(os, kFormatPcm);
  io::write_uint<std::uint16_t>(os, 1);
  io::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate));
  io::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  io::write_uint<std::uint16_t>(os, 2);
  io::write_uint<std::uint16_t>(os, 16);
  os.write("data", 4);
  io::write_uint<std::uint32_t>(os, 2 * n);
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    const double v = std::clamp(w.samples[i], -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0)));
    io::write_uint<std::uint16_t>(os, static_cast<std::uint16_t>(q));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Waveform fit_duration(const Waveform& w, double seconds) {
  if (seconds <= 0) throw ConfigError("clip duration must be positive");
  const auto target = static_cast<Eigen::Index>(std::lround(seconds * w.sample_rate));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = Eigen::VectorXd::Zero(target);
  const Eigen::Index n = w.samples.size();
  if (n >= target) {
    out.samples = w.samples.segment((n - target) / 2, target);
  } else {
    out.samples.segment((target - n) / 2, n) = w.samples;
  }
  return out;
}

}  // namespace ser::dsp
