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

#include "ser/harness/desk_corpus.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "ser/common/error.hpp"

namespace ser::harness {

using corpus::Emotion;

namespace {

// How an emotion bends the speaker's neutral voice.
struct Prosody {
  double pitch = 1.0;        // multiplier on the speaker f0
  double start = 1.0, end = 1.0;  // contour endpoints (relative)
  double rolloff = 0.65;     // per-harmonic amplitude ratio
  double am_hz = 0.0, am_depth = 0.0;
  double vibrato_hz = 0.0, vibrato_depth = 0.0;
  double noise_snr_db = 0.0; // 0 = no breath noise
  double level = 0.7;
};

Prosody prosody(Emotion e) {
  switch (e) {
    case Emotion::Anger: return {1.3, 1.0, 1.0, 0.88, 8.0, 0.6, 0, 0, 12.0, 0.9};
    case Emotion::Happiness: return {1.15, 0.8, 1.3, 0.72, 0, 0, 0, 0, 0, 0.8};
    case Emotion::Sadness: return {0.8, 1.15, 0.8, 0.4, 0, 0, 0, 0, 0, 0.45};
    case Emotion::Neutral: return {1.0, 1.0, 1.0, 0.62, 0, 0, 0, 0, 0, 0.65};
    case Emotion::Boredom: return {0.9, 1.0, 0.92, 0.5, 0, 0, 0, 0, 0, 0.5};
    case Emotion::Disgust: return {0.95, 1.05, 0.9, 0.75, 3.0, 0.4, 0, 0, 18.0, 0.6};
    case Emotion::Excitement: return {1.35, 0.9, 1.35, 0.8, 6.0, 0.3, 0, 0, 20.0, 0.9};
    case Emotion::Fear: return {1.4, 1.0, 1.1, 0.6, 0, 0, 7.0, 0.04, 16.0, 0.55};
    case Emotion::Surprise: return {1.25, 0.9, 1.5, 0.7, 0, 0, 0, 0, 0, 0.85};
  }
  return {};
}

double formant_gain(double f, const SpeakerVoice& v) {
  const auto bump = [f](double centre, double width) {
    const double z = (f - centre) / width;
    return std::exp(-0.5 * z * z);
  };
  return 0.05 + 4.0 * bump(v.formant1, 110.0) + 3.0 * bump(v.formant2, 180.0);
}

}  // namespace

void DeskCorpusConfig::validate() const {
  if (speakers < 1) throw ConfigError("desk corpus needs at least one speaker");
  if (per_class < 1) throw ConfigError("desk corpus needs at least one utterance per class");
  if (corpora.empty()) throw ConfigError("desk corpus needs at least one corpus id");
  if (std::set<std::string>(corpora.begin(), corpora.end()).size() != corpora.size()) {
    throw ConfigError("desk corpus ids must be distinct");
  }
  if (emotions.empty()) throw ConfigError("desk corpus needs at least one emotion");
  if (sample_rate < 8000) throw ConfigError("desk corpus sample rate must be at least 8 kHz");
  if (!(seconds >= 0.1)) throw ConfigError("desk corpus clips must be at least 0.1 s");
}

SpeakerVoice speaker_voice(const std::string& speaker_id, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "voice/" + speaker_id));
  std::uniform_real_distribution<double> f0(95.0, 230.0), f1(450.0, 950.0), f2(1300.0, 2400.0);
  SpeakerVoice v;
  v.f0 = f0(rng);
  v.formant1 = f1(rng);
  v.formant2 = f2(rng);
  return v;
}

ChannelProfile channel_profile(std::size_t corpus_index) {
  switch (corpus_index % 4) {
    case 0: return {1.0, 0.0, 0.0};
    case 1: return {0.6, 3400.0, 0.002};
    case 2: return {0.85, 5500.0, 0.006};
    default: return {0.4, 4200.0, 0.001};
  }
}

dsp::Waveform synthesize_utterance(Emotion emotion, const SpeakerVoice& voice, const ChannelProfile& channel,
                                   int sample_rate, double seconds, std::mt19937_64& rng) {
  const Prosody p = prosody(emotion);
  const auto n = static_cast<Eigen::Index>(std::lround(seconds * sample_rate));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double jitter = 1.0 + 0.06 * (2.0 * unit(rng) - 1.0);
  const double base = voice.f0 * p.pitch * jitter;
  const double onset = 0.02 + 0.08 * unit(rng);
  const double length = 0.75 + 0.2 * unit(rng);
  const double offset = std::min(0.98, onset + length);
  const double nyquist = 0.5 * sample_rate;
  const int harmonics = std::max(1, static_cast<int>(std::min(6000.0, 0.9 * nyquist) / (base * std::max(p.start, p.end))));

  std::vector<double> amp(static_cast<std::size_t>(harmonics)), phase0(static_cast<std::size_t>(harmonics));
  for (int h = 0; h < harmonics; ++h) {
    amp[static_cast<std::size_t>(h)] = std::pow(p.rolloff, h) * formant_gain((h + 1) * base, voice);
    phase0[static_cast<std::size_t>(h)] = 2.0 * std::numbers::pi * unit(rng);
  }
  const double am_phase = 2.0 * std::numbers::pi * unit(rng);

  dsp::Waveform w;
  w.sample_rate = sample_rate;
  w.samples = Eigen::VectorXd::Zero(n);
  double phase = 0.0;
  double peak = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double u = t / seconds;
    if (u < onset || u > offset) continue;
    const double v = (u - onset) / (offset - onset);
    double f0 = base * (p.start + (p.end - p.start) * v);
    if (p.vibrato_hz > 0) f0 *= 1.0 + p.vibrato_depth * std::sin(2.0 * std::numbers::pi * p.vibrato_hz * t);
    phase += 2.0 * std::numbers::pi * f0 / sample_rate;
    double s = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      if ((h + 1) * f0 >= nyquist) break;
      s += amp[static_cast<std::size_t>(h)] * std::sin((h + 1) * phase + phase0[static_cast<std::size_t>(h)]);
    }
    // Raised-cosine attack and release of 40 ms.
    const double edge = 0.04 / seconds / (offset - onset);
    double env = 1.0;
    if (v < edge) env = 0.5 - 0.5 * std::cos(std::numbers::pi * v / edge);
    if (v > 1.0 - edge) env = 0.5 - 0.5 * std::cos(std::numbers::pi * (1.0 - v) / edge);
    if (p.am_hz > 0) env *= 1.0 - p.am_depth * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * p.am_hz * t + am_phase));
    w.samples(i) = s * env;
    peak = std::max(peak, std::abs(w.samples(i)));
  }
  if (peak > 0) w.samples *= p.level / peak;
  if (p.noise_snr_db > 0) {
    const double rms = std::sqrt(w.samples.squaredNorm() / static_cast<double>(n));
    const double sigma = rms / std::pow(10.0, p.noise_snr_db / 20.0);
    for (Eigen::Index i = 0; i < n; ++i) w.samples(i) += sigma * gauss(rng);
  }
  // Channel: one-pole low-pass, gain, background floor.
  if (channel.lowpass_hz > 0) {
    const double a = std::exp(-2.0 * std::numbers::pi * channel.lowpass_hz / sample_rate);
    double y = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      y = (1.0 - a) * w.samples(i) + a * y;
      w.samples(i) = y;
    }
  }
  w.samples *= channel.gain;
  if (channel.noise_level > 0) {
    for (Eigen::Index i = 0; i < n; ++i) w.samples(i) += channel.noise_level * gauss(rng);
  }
  w.samples = w.samples.cwiseMax(-0.999).cwiseMin(0.999);
  return w;
}

std::vector<corpus::Sample> generate_desk_corpus(const std::filesystem::path& out_dir, const DeskCorpusConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(out_dir / "wav");
  std::vector<corpus::Sample> samples;
  for (std::size_t c = 0; c < cfg.corpora.size(); ++c) {
    const auto& corpus_id = cfg.corpora[c];
    const ChannelProfile channel = channel_profile(c);
    for (int s = 0; s < cfg.speakers; ++s) {
      const std::string speaker = corpus_id + "_s" + std::to_string(s);
      const SpeakerVoice voice = speaker_voice(speaker, cfg.seed);
      for (const auto emotion : cfg.emotions) {
        for (int k = 0; k < cfg.per_class; ++k) {
          corpus::Sample sample;
          sample.id = speaker + "_" + corpus::emotion_code(emotion) + "_" + std::to_string(k);
          std::mt19937_64 rng(derive_seed(cfg.seed, "utt/" + sample.id));
          const auto wav = synthesize_utterance(emotion, voice, channel, cfg.sample_rate, cfg.seconds, rng);
          const auto path = out_dir / "wav" / (sample.id + ".wav");
          dsp::save_wav(path, wav);
          sample.audio_path = path.string();
          sample.emotion = emotion;
          sample.speaker_id = speaker;
          sample.corpus_id = corpus_id;
          samples.push_back(std::move(sample));
        }
      }
    }
  }
  corpus::save_manifest(out_dir / "manifest.csv", samples);
  return samples;
}

}  // namespace ser::harness
