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
#include <random>
#include <string>
#include <vector>

#include "ser/corpus/corpus.hpp"
#include "ser/dsp/waveform.hpp"

namespace ser::harness {

/// Synthetic "desk" corpus: harmonic voices whose pitch contour, harmonic
/// richness, amplitude modulation and noise depend on the emotion, whose
/// pitch band and formants depend on the speaker, and whose channel
/// (gain, low-pass, noise floor) depends on the corpus.
struct DeskCorpusConfig {
  int speakers = 4;   ///< per corpus; speakers are not shared across corpora
  int per_class = 16; ///< utterances per speaker and emotion
  std::vector<std::string> corpora = {"desk"};
  std::vector<corpus::Emotion> emotions = {corpus::Emotion::Anger, corpus::Emotion::Happiness,
                                           corpus::Emotion::Sadness, corpus::Emotion::Neutral};
  int sample_rate = 16000;
  double seconds = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SpeakerVoice {
  double f0 = 150.0;
  double formant1 = 700.0;
  double formant2 = 1600.0;
};

struct ChannelProfile {
  double gain = 1.0;
  double lowpass_hz = 0.0;  ///< 0 disables
  double noise_level = 0.0; ///< absolute RMS of the background noise
};

SpeakerVoice speaker_voice(const std::string& speaker_id, std::uint64_t seed);
ChannelProfile channel_profile(std::size_t corpus_index);

dsp::Waveform synthesize_utterance(corpus::Emotion emotion, const SpeakerVoice& voice,
                                   const ChannelProfile& channel, int sample_rate, double seconds,
                                   std::mt19937_64& rng);

/// Writes <out>/wav/<id>.wav and <out>/manifest.csv; returns the samples.
std::vector<corpus::Sample> generate_desk_corpus(const std::filesystem::path& out_dir,
                                                 const DeskCorpusConfig& cfg);

}  // namespace ser::harness
