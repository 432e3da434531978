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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ser/common/error.hpp"

namespace ser::corpus {

/// Canonical label set across all corpora.
enum class Emotion { Anger, Boredom, Disgust, Excitement, Fear, Happiness, Neutral, Sadness, Surprise };

inline constexpr Emotion kAllEmotions[] = {Emotion::Anger,     Emotion::Boredom, Emotion::Disgust,
                                           Emotion::Excitement, Emotion::Fear,    Emotion::Happiness,
                                           Emotion::Neutral,   Emotion::Sadness, Emotion::Surprise};

std::string to_string(Emotion e);
/// Short code: A, B, D, E, F, H, N, S, Sr.
std::string emotion_code(Emotion e);
/// Accepts full names (any case) and short codes; nullopt if unknown.
std::optional<Emotion> parse_emotion(std::string_view text);

struct Sample {
  std::string id;
  std::string audio_path;
  Emotion emotion = Emotion::Neutral;
  std::string speaker_id;
  std::string corpus_id;
  std::optional<std::string> augmented_from;

  bool is_synthetic() const { return augmented_from.has_value(); }
};

class ManifestError : public Error {
 public:
  ManifestError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads a CSV manifest with header id,audio_path,emotion,speaker_id,corpus_id
/// (any column order, optional augmented_from). Relative audio paths are
/// resolved against the manifest's directory.
std::vector<Sample> load_manifest(const std::filesystem::path& path);

/// Writes a manifest; audio paths are written relative to the manifest's
/// directory when they lie beneath it.
void save_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples);

/// Checks id uniqueness and augmented_from references.
void validate_samples(const std::vector<Sample>& samples);

enum class LabelSchemeKind { FourClass, ThreeClass };

struct LabelScheme {
  LabelSchemeKind kind = LabelSchemeKind::FourClass;

  static LabelScheme four_class() { return {LabelSchemeKind::FourClass}; }
  static LabelScheme three_class() { return {LabelSchemeKind::ThreeClass}; }
  static LabelScheme parse(std::string_view name);

  std::string name() const;
  std::vector<std::string> class_names() const;
  int num_classes() const { return static_cast<int>(class_names().size()); }
  /// Class index, or nullopt when the emotion is excluded by the scheme.
  std::optional<int> class_of(Emotion e) const;
};

struct LabeledSample {
  Sample sample;
  int label = 0;
};

struct LabeledSet {
  std::vector<LabeledSample> samples;
  std::vector<std::string> class_names;
  std::size_t dropped = 0;
};

LabeledSet apply_label_scheme(const std::vector<Sample>& samples, const LabelScheme& scheme);

std::vector<std::size_t> class_histogram(const std::vector<LabeledSample>& samples, int num_classes);

/// Keeps a seeded random subset of each class equal in size to the smallest class.
std::vector<LabeledSample> balance_undersample(const std::vector<LabeledSample>& samples, int num_classes,
                                               std::uint64_t seed);

/// Produces the `variant`-th synthetic copy of `source`.
using AugmentFn = std::function<Sample(const Sample& source, int variant)>;

/// Default synthetic record: id "<source>.aug<variant>", augmented_from = source.
Sample make_synthetic_sample(const Sample& source, int variant);

/// Adds synthetic samples until every class reaches the majority count.
/// Sources are cycled round-robin from a seeded starting offset.
std::vector<LabeledSample> balance_augment(const std::vector<LabeledSample>& samples, int num_classes,
                                           const AugmentFn& augment, std::uint64_t seed);

enum class Protocol { CrossCorpus, LOSO };

struct SplitPlan {
  Protocol protocol = Protocol::CrossCorpus;
  std::string name;
  std::vector<std::string> train, val, test;
};

SplitPlan split_cross_corpus(const std::vector<Sample>& samples, const std::vector<std::string>& train_corpora,
                             const std::vector<std::string>& val_corpora, const std::string& test_corpus);

/// One fold per distinct speaker (sorted by speaker id).
std::vector<SplitPlan> split_loso(const std::vector<Sample>& samples);

/// Throws if the plan violates disjointness or its protocol's exclusion rule.
void validate_plan(const SplitPlan& plan, const std::vector<Sample>& samples);

std::set<std::string> corpus_ids(const std::vector<Sample>& samples);
std::set<std::string> speaker_ids(const std::vector<Sample>& samples);

}  // namespace ser::corpus
