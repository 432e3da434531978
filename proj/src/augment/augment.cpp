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

#include "ser/augment/augment.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace ser::augment {

std::string to_string(TimeAugmentKind k) {
  switch (k) {
    case TimeAugmentKind::Noise: return "noise";
    case TimeAugmentKind::Normalize: return "normalize";
    case TimeAugmentKind::PitchShift: return "pitch_shift";
    case TimeAugmentKind::TimeShift: return "time_shift";
    case TimeAugmentKind::SpeedChange: return "speed_change";
  }
  return "?";
}

TimeAugmentKind parse_time_augment_kind(const std::string& name) {
  for (auto k : {TimeAugmentKind::Noise, TimeAugmentKind::Normalize, TimeAugmentKind::PitchShift,
                 TimeAugmentKind::TimeShift, TimeAugmentKind::SpeedChange}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown time augmentation '" + name + "'");
}

void TimeAugmentSpec::validate() const {
  const auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  switch (kind) {
    case TimeAugmentKind::Noise:
      if (!in(snr_db, 5.0, 40.0)) throw ConfigError("noise SNR must lie in [5, 40] dB");
      break;
    case TimeAugmentKind::Normalize:
      if (!(target_peak > 0.0 && target_peak <= 1.0)) throw ConfigError("normalize target peak must lie in (0, 1]");
      break;
    case TimeAugmentKind::PitchShift:
      if (!in(semitones, -12.0, 12.0)) throw ConfigError("pitch shift must lie in [-12, 12] semitones");
      break;
    case TimeAugmentKind::TimeShift:
      if (!in(shift_fraction, -0.5, 0.5)) throw ConfigError("shift fraction must lie in [-0.5, 0.5]");
      break;
    case TimeAugmentKind::SpeedChange:
      if (!in(speed_factor, 0.5, 2.0)) throw ConfigError("speed factor must lie in [0.5, 2.0]");
      break;
  }
}

Waveform change_speed(const Waveform& w, double factor) {
  const Eigen::Index n = w.samples.size();
  const auto m = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(n / factor)));
  Waveform out{Eigen::VectorXd(m), w.sample_rate};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double pos = std::min(i * factor, static_cast<double>(n - 1));
    const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index i1 = std::min(i0 + 1, n - 1);
    const double frac = pos - static_cast<double>(i0);
    out.samples[i] = w.samples[i0] * (1.0 - frac) + w.samples[i1] * frac;
  }
  return out;
}

namespace {

// WSOLA time stretch to exactly `length` samples: Hann grains at 50% overlap,
// each taken from within +-frame/4 of its nominal input position where it
// best continues the previous grain. Keeps local pitch while changing duration.
Eigen::VectorXd stretch_overlap_add(const Eigen::VectorXd& x, Eigen::Index length, int sample_rate) {
  const Eigen::Index in_len = x.size();
  const Eigen::Index frame = std::min<Eigen::Index>(in_len, std::max<Eigen::Index>(16, sample_rate * 30 / 1000));
  const Eigen::Index hop = frame / 2;
  const Eigen::Index tolerance = frame / 4;
  const double analysis_hop = static_cast<double>(hop) * static_cast<double>(in_len) / static_cast<double>(length);
  Eigen::VectorXd window(frame);
  for (Eigen::Index n = 0; n < frame; ++n) {
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (n + 0.5) / frame);
  }
  const auto clamp_pos = [&](Eigen::Index p) { return std::clamp<Eigen::Index>(p, 0, in_len - frame); };
  Eigen::VectorXd out = Eigen::VectorXd::Zero(length);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(length);
  Eigen::Index prev = -1;
  for (long j = 0;; ++j) {
    const Eigen::Index out_pos = j * hop - hop;
    if (out_pos >= length) break;
    const Eigen::Index nominal = static_cast<Eigen::Index>(std::lround(static_cast<double>(j) * analysis_hop)) - hop;
    Eigen::Index in_pos = clamp_pos(nominal);
    if (prev >= 0) {
      const Eigen::Index natural = clamp_pos(prev + hop);
      const auto target = x.segment(natural, frame);
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index p = clamp_pos(nominal - tolerance); p <= clamp_pos(nominal + tolerance); ++p) {
        const double score = x.segment(p, frame).dot(target);
        if (score > best) {
          best = score;
          in_pos = p;
        }
      }
    }
    prev = in_pos;
    for (Eigen::Index n = 0; n < frame; ++n) {
      const Eigen::Index o = out_pos + n;
      if (o < 0 || o >= length) continue;
      out[o] += x[in_pos + n] * window[n];
      norm[o] += window[n];
    }
  }
  for (Eigen::Index i = 0; i < length; ++i) {
    if (norm[i] > 1e-8) out[i] /= norm[i];
  }
  return out;
}

}  // namespace

Waveform apply_time_augmentation(const Waveform& w, const TimeAugmentSpec& spec) {
  spec.validate();
  if (w.samples.size() == 0) throw ShapeError("augmentation: empty waveform");
  const Eigen::Index n = w.samples.size();
  Waveform out = w;
  switch (spec.kind) {
    case TimeAugmentKind::Noise: {
      const double signal_power = w.samples.squaredNorm() / static_cast<double>(n);
      const double sigma = std::sqrt(signal_power / std::pow(10.0, spec.snr_db / 10.0));
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) out.samples[i] += sigma * gauss(rng);
      break;
    }
    case TimeAugmentKind::Normalize: {
      const double peak = w.samples.cwiseAbs().maxCoeff();
      if (peak > 0.0) out.samples *= spec.target_peak / peak;
      break;
    }
    case TimeAugmentKind::TimeShift: {
      const auto shift = static_cast<Eigen::Index>(std::lround(spec.shift_fraction * static_cast<double>(n)));
      for (Eigen::Index i = 0; i < n; ++i) out.samples[((i + shift) % n + n) % n] = w.samples[i];
      break;
    }
    case TimeAugmentKind::SpeedChange:
      out = change_speed(w, spec.speed_factor);
      break;
    case TimeAugmentKind::PitchShift: {
      const Waveform sped = change_speed(w, std::pow(2.0, spec.semitones / 12.0));
      out.samples = stretch_overlap_add(sped.samples, n, w.sample_rate);
      break;
    }
  }
  return out;
}

std::vector<MaskSpan> plan_spec_masks(Eigen::Index dim, const SpecMaskSpec& spec) {
  if (spec.num_masks < 0) throw ConfigError("num_masks must be non-negative");
  if (spec.num_masks > 0 && (spec.max_width < 1 || spec.max_width >= dim)) {
    throw ConfigError("mask max_width " + std::to_string(spec.max_width) + " must lie in [1, " +
                      std::to_string(dim - 1) + "]");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<MaskSpan> spans;
  for (int k = 0; k < spec.num_masks; ++k) {
    std::uniform_int_distribution<Eigen::Index> width(1, spec.max_width);
    const Eigen::Index wdt = width(rng);
    std::uniform_int_distribution<Eigen::Index> start(0, dim - wdt);
    spans.push_back({start(rng), wdt});
  }
  return spans;
}

MelSpectrogram apply_spec_mask(const MelSpectrogram& m, const SpecMaskSpec& spec) {
  const bool time = spec.axis == MaskAxis::Time;
  const Eigen::Index dim = time ? m.n_frames() : m.n_mels();
  const auto spans = plan_spec_masks(dim, spec);
  MelSpectrogram out = m;
  const double fill = spec.fill == MaskFill::Mean ? m.values.mean() : 0.0;
  for (const auto& s : spans) {
    if (time) {
      out.values.middleCols(s.start, s.width).setConstant(fill);
    } else {
      out.values.middleRows(s.start, s.width).setConstant(fill);
    }
  }
  return out;
}

std::vector<Waveform> expand_sample(const Waveform& w, std::span<const TimeAugmentSpec> specs) {
  if (specs.empty()) throw ConfigError("expand_sample: empty augmentation list");
  std::vector<Waveform> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(apply_time_augmentation(w, s));
  return out;
}

TimeAugmentSpec draw_time_spec(TimeAugmentKind kind, std::uint64_t seed, const AugmentRanges& r) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto lerp = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
  TimeAugmentSpec s;
  s.kind = kind;
  s.seed = derive_seed(seed, "noise");
  switch (kind) {
    case TimeAugmentKind::Noise:
      s.snr_db = lerp(r.snr_min_db, r.snr_max_db);
      break;
    case TimeAugmentKind::Normalize:
      s.target_peak = lerp(r.peak_min, r.peak_max);
      break;
    case TimeAugmentKind::PitchShift:
      s.semitones = sign * lerp(0.25 * r.pitch_max_semitones, r.pitch_max_semitones);
      break;
    case TimeAugmentKind::TimeShift:
      s.shift_fraction = sign * lerp(0.2 * r.shift_max, r.shift_max);
      break;
    case TimeAugmentKind::SpeedChange:
      s.speed_factor = sign > 0 ? lerp(1.0 + 0.2 * (r.speed_max - 1.0), r.speed_max)
                                : lerp(r.speed_min, 1.0 - 0.2 * (1.0 - r.speed_min));
      break;
  }
  return s;
}

std::vector<TimeAugmentSpec> default_time_specs(std::uint64_t seed, const AugmentRanges& ranges) {
  std::vector<TimeAugmentSpec> specs;
  for (auto k : {TimeAugmentKind::Noise, TimeAugmentKind::Normalize, TimeAugmentKind::PitchShift,
                 TimeAugmentKind::TimeShift, TimeAugmentKind::SpeedChange}) {
    specs.push_back(draw_time_spec(k, derive_seed(seed, to_string(k)), ranges));
  }
  return specs;
}

SpecMaskSpec draw_mask_spec(MaskAxis axis, Eigen::Index dim, std::uint64_t seed, const AugmentRanges& r) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(r.masks_min, r.masks_max);
  SpecMaskSpec s;
  s.axis = axis;
  s.num_masks = count(rng);
  s.max_width = static_cast<int>(std::max<Eigen::Index>(1, std::min<Eigen::Index>(
      dim - 1, static_cast<Eigen::Index>(std::floor(r.mask_fraction * static_cast<double>(dim))))));
  s.seed = derive_seed(seed, "mask");
  return s;
}

}  // namespace ser::augment
