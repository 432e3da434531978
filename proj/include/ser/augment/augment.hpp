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
#include <span>
#include <string>
#include <vector>

#include "ser/dsp/spectrogram.hpp"

namespace ser::augment {

using dsp::MelSpectrogram;
using dsp::Waveform;

enum class TimeAugmentKind { Noise, Normalize, PitchShift, TimeShift, SpeedChange };

std::string to_string(TimeAugmentKind k);
TimeAugmentKind parse_time_augment_kind(const std::string& name);

/// One time-domain transform. Only the field matching `kind` is read.
struct TimeAugmentSpec {
  TimeAugmentKind kind = TimeAugmentKind::Noise;
  double snr_db = 20.0;          ///< Noise, [5, 40]
  double target_peak = 0.9;      ///< Normalize, (0, 1]
  double semitones = 0.0;        ///< PitchShift, [-12, 12]
  double shift_fraction = 0.0;   ///< TimeShift, [-0.5, 0.5]
  double speed_factor = 1.0;     ///< SpeedChange, [0.5, 2]
  std::uint64_t seed = 0;

  void validate() const;
};

enum class MaskAxis { Time, Frequency };
enum class MaskFill { Zero, Mean };

struct SpecMaskSpec {
  MaskAxis axis = MaskAxis::Time;
  int max_width = 1;
  int num_masks = 1;
  MaskFill fill = MaskFill::Mean;
  std::uint64_t seed = 0;
};

struct MaskSpan {
  Eigen::Index start = 0;
  Eigen::Index width = 0;
};

/// Sampling ranges used when augmentation parameters are drawn at random.
struct AugmentRanges {
  double snr_min_db = 15.0, snr_max_db = 30.0;
  double shift_max = 0.25;
  double speed_min = 0.8, speed_max = 1.25;
  double pitch_max_semitones = 2.0;
  double peak_min = 0.5, peak_max = 0.95;
  double mask_fraction = 0.2;
  int masks_min = 1, masks_max = 2;
};

Waveform apply_time_augmentation(const Waveform& w, const TimeAugmentSpec& spec);

/// Resamples by linear interpolation to round(len / factor) samples.
Waveform change_speed(const Waveform& w, double factor);

/// Draws the mask positions `apply_spec_mask` will use for an axis of length `dim`.
std::vector<MaskSpan> plan_spec_masks(Eigen::Index dim, const SpecMaskSpec& spec);

MelSpectrogram apply_spec_mask(const MelSpectrogram& m, const SpecMaskSpec& spec);

/// One augmented copy per spec; the original is not included.
std::vector<Waveform> expand_sample(const Waveform& w, std::span<const TimeAugmentSpec> specs);

/// Draws a spec of the given kind from `ranges`, avoiding identity parameters.
TimeAugmentSpec draw_time_spec(TimeAugmentKind kind, std::uint64_t seed, const AugmentRanges& ranges = {});

/// The five time-domain transforms, one of each kind, with parameters drawn from `ranges`.
std::vector<TimeAugmentSpec> default_time_specs(std::uint64_t seed, const AugmentRanges& ranges = {});

/// A mask spec for an axis of length `dim` using the default width fraction and count.
SpecMaskSpec draw_mask_spec(MaskAxis axis, Eigen::Index dim, std::uint64_t seed, const AugmentRanges& ranges = {});

}  // namespace ser::augment
