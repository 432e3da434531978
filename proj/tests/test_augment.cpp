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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ser/augment/augment.hpp"

namespace ser::augment {
namespace {

constexpr TimeAugmentKind kKinds[] = {TimeAugmentKind::Noise, TimeAugmentKind::Normalize, TimeAugmentKind::PitchShift,
                                      TimeAugmentKind::TimeShift, TimeAugmentKind::SpeedChange};

Waveform sine(double hz, Eigen::Index n, int rate = 16000, double amp = 0.5) {
  Waveform w{Eigen::VectorXd(n), rate};
  for (Eigen::Index i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / rate);
  return w;
}

// Frequency (Hz) of the strongest STFT bin, refined by parabolic interpolation.
double dominant_hz(const Waveform& w) {
  dsp::SpectrogramConfig cfg;
  cfg.fft_size = 4096;
  const Eigen::VectorXd p = dsp::stft_power(w, cfg).rowwise().mean();
  Eigen::Index k = 0;
  p.maxCoeff(&k);
  const double a = std::log(p[k - 1]), b = std::log(p[k]), c = std::log(p[k + 1]);
  const double offset = 0.5 * (a - c) / (a - 2 * b + c);
  return (static_cast<double>(k) + offset) * w.sample_rate / cfg.fft_size;
}

TEST(TimeAugment, KindNamesRoundTrip) {
  for (auto k : kKinds) EXPECT_EQ(parse_time_augment_kind(to_string(k)), k);
  EXPECT_THROW(parse_time_augment_kind("reverb"), ConfigError);
}

TEST(TimeAugment, EveryKindPreservesSampleRate) {
  const Waveform w = sine(300, 8000, 8000);
  for (auto k : kKinds) {
    const auto out = apply_time_augmentation(w, draw_time_spec(k, 1));
    EXPECT_EQ(out.sample_rate, 8000) << to_string(k);
    EXPECT_TRUE(out.samples.allFinite());
  }
}

TEST(TimeAugment, OutOfRangeParametersThrow) {
  TimeAugmentSpec s;
  s.kind = TimeAugmentKind::Noise;
  s.snr_db = 2;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.kind = TimeAugmentKind::Normalize;
  s.target_peak = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.kind = TimeAugmentKind::PitchShift;
  s.semitones = 13;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.kind = TimeAugmentKind::TimeShift;
  s.shift_fraction = -0.6;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.kind = TimeAugmentKind::SpeedChange;
  s.speed_factor = 2.5;
  EXPECT_THROW(apply_time_augmentation(sine(100, 100), s), ConfigError);
  EXPECT_THROW(apply_time_augmentation(Waveform{}, TimeAugmentSpec{}), ShapeError);
}

TEST(Noise, HitsTargetSnrAndIsSeeded) {
  const Waveform w = sine(440, 64000);
  TimeAugmentSpec s;
  s.kind = TimeAugmentKind::Noise;
  s.snr_db = 12;
  s.seed = 9;
  const Waveform a = apply_time_augmentation(w, s);
  const double noise = (a.samples - w.samples).squaredNorm();
  EXPECT_NEAR(10 * std::log10(w.samples.squaredNorm() / noise), 12.0, 0.2);
  EXPECT_EQ(apply_time_augmentation(w, s).samples, a.samples);
  s.seed = 10;
  EXPECT_NE(apply_time_augmentation(w, s).samples, a.samples);
}

TEST(Normalize, ScalesPeakAndLeavesSilence) {
  TimeAugmentSpec s;
  s.kind = TimeAugmentKind::Normalize;
  s.target_peak = 0.7;
  EXPECT_NEAR(apply_time_augmentation(sine(100, 1000, 16000, 0.1), s).samples.cwiseAbs().maxCoeff(), 0.7, 1e-12);
  const Waveform silent{Eigen::VectorXd::Zero(10), 16000};
  EXPECT_EQ(apply_time_augmentation(silent, s).samples, silent.samples);
}

TEST(TimeShift, IsCircularRotation) {
  Waveform w{Eigen::VectorXd::LinSpaced(8, 0, 7), 16000};
  TimeAugmentSpec s;
  s.kind = TimeAugmentKind::TimeShift;
  s.shift_fraction = 0.25;
  const auto out = apply_time_augmentation(w, s).samples;
  EXPECT_EQ(out, (Eigen::VectorXd(8) << 6, 7, 0, 1, 2, 3, 4, 5).finished());
  s.shift_fraction = -0.25;
  EXPECT_EQ(apply_time_augmentation(w, s).samples, (Eigen::VectorXd(8) << 2, 3, 4, 5, 6, 7, 0, 1).finished());
}

TEST(SpeedChange, ResizesAndScalesFrequency) {
  const Waveform w = sine(400, 16000);
  EXPECT_EQ(change_speed(w, 1.0).samples, w.samples);
  for (double f : {0.8, 1.25, 1.5}) {
    const Waveform out = change_speed(w, f);
    EXPECT_EQ(out.size(), std::lround(16000 / f));
    EXPECT_NEAR(dominant_hz(out), 400 * f, 2.0) << f;
  }
}

TEST(PitchShift, KeepsLengthAndMovesPitch) {
  const Waveform w = sine(440, 16000);
  for (double st : {-5.0, 3.0, 12.0}) {
    TimeAugmentSpec s;
    s.kind = TimeAugmentKind::PitchShift;
    s.semitones = st;
    const Waveform out = apply_time_augmentation(w, s);
    EXPECT_EQ(out.size(), w.size());
    const double expected = 440 * std::pow(2.0, st / 12.0);
    EXPECT_NEAR(dominant_hz(out), expected, 0.01 * expected) << st;
  }
}

TEST(SpecMask, MasksLieInsideAndRespectWidth) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    SpecMaskSpec s;
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng() % 100);
    s.max_width = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(dim - 1));
    s.num_masks = static_cast<int>(rng() % 4);
    s.seed = rng();
    const auto spans = plan_spec_masks(dim, s);
    ASSERT_EQ(spans.size(), static_cast<std::size_t>(s.num_masks));
    for (const auto& sp : spans) {
      EXPECT_GE(sp.start, 0);
      EXPECT_GE(sp.width, 1);
      EXPECT_LE(sp.width, s.max_width);
      EXPECT_LE(sp.start + sp.width, dim);
    }
  }
}

TEST(SpecMask, FillsOnlyPlannedRegion) {
  MelSpectrogram m;
  m.values = Eigen::MatrixXd::Random(20, 30);
  for (auto axis : {MaskAxis::Time, MaskAxis::Frequency}) {
    SpecMaskSpec s;
    s.axis = axis;
    s.max_width = 5;
    s.num_masks = 1;
    s.fill = MaskFill::Zero;
    s.seed = 77;
    const bool time = axis == MaskAxis::Time;
    const auto span = plan_spec_masks(time ? 30 : 20, s).front();
    const MelSpectrogram out = apply_spec_mask(m, s);
    for (Eigen::Index r = 0; r < 20; ++r) {
      for (Eigen::Index c = 0; c < 30; ++c) {
        const Eigen::Index i = time ? c : r;
        const bool masked = i >= span.start && i < span.start + span.width;
        EXPECT_EQ(out.values(r, c), masked ? 0.0 : m.values(r, c));
      }
    }
  }
  SpecMaskSpec mean;
  mean.max_width = 3;
  mean.seed = 4;
  const auto span = plan_spec_masks(30, mean).front();
  EXPECT_DOUBLE_EQ(apply_spec_mask(m, mean).values(0, span.start), m.values.mean());
}

TEST(SpecMask, InvalidWidthThrowsAndZeroMasksIsIdentity) {
  MelSpectrogram m;
  m.values = Eigen::MatrixXd::Random(4, 6);
  SpecMaskSpec s;
  s.max_width = 6;
  EXPECT_THROW(apply_spec_mask(m, s), ConfigError);
  s.max_width = 0;
  EXPECT_THROW(apply_spec_mask(m, s), ConfigError);
  s.num_masks = 0;
  EXPECT_EQ(apply_spec_mask(m, s).values, m.values);
  s.num_masks = -1;
  EXPECT_THROW(plan_spec_masks(6, s), ConfigError);
}

TEST(ExpandSample, OneCopyPerSpecWithoutOriginal) {
  const Waveform w = sine(250, 4000);
  const auto specs = default_time_specs(5);
  const auto out = expand_sample(w, specs);
  ASSERT_EQ(out.size(), 5u);
  for (const auto& o : out) {
    if (o.size() == w.size()) EXPECT_NE(o.samples, w.samples);
  }
  EXPECT_THROW(expand_sample(w, std::span<const TimeAugmentSpec>{}), ConfigError);
}

TEST(DrawSpecs, CoverAllKindsWithValidNonIdentityParameters) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto specs = default_time_specs(seed);
    ASSERT_EQ(specs.size(), 5u);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      EXPECT_EQ(specs[i].kind, kKinds[i]);
      EXPECT_NO_THROW(specs[i].validate());
    }
    EXPECT_NE(specs[2].semitones, 0.0);
    EXPECT_NE(specs[3].shift_fraction, 0.0);
    EXPECT_NE(specs[4].speed_factor, 1.0);
  }
  const auto a = draw_time_spec(TimeAugmentKind::SpeedChange, 8), b = draw_time_spec(TimeAugmentKind::SpeedChange, 8);
  EXPECT_EQ(a.speed_factor, b.speed_factor);
  const auto mask = draw_mask_spec(MaskAxis::Frequency, 32, 1);
  EXPECT_EQ(mask.max_width, 6);
  EXPECT_GE(mask.num_masks, 1);
  EXPECT_LE(mask.num_masks, 2);
  EXPECT_EQ(draw_mask_spec(MaskAxis::Time, 2, 1).max_width, 1);
}

}  // namespace
}  // namespace ser::augment
