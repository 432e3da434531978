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

#include <Eigen/Dense>

#include <filesystem>
#include <string>

#include "ser/common/error.hpp"

namespace ser::dsp {

/// Mono audio with amplitudes nominally in [-1, 1].
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = 16000;

  Eigen::Index size() const { return samples.size(); }
  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

class WavError : public IoError {
 public:
  enum class Kind { NotFound, Malformed, UnsupportedCodec };
  WavError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads PCM (8/16/32-bit integer) or IEEE float32 WAV; stereo and wider
/// layouts are downmixed by channel mean.
Waveform load_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
void save_wav(const std::filesystem::path& path, const Waveform& w);

/// Pads with silence or center-crops to exactly `seconds`, keeping content centered.
Waveform fit_duration(const Waveform& w, double seconds);

}  // namespace ser::dsp
