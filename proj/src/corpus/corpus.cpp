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

#include "ser/corpus/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ser/common/csv.hpp"

namespace ser::corpus {

namespace {

struct EmotionName {
  Emotion emotion;
  const char* name;
  const char* code;
};

constexpr EmotionName kNames[] = {
    {Emotion::Anger, "Anger", "A"},         {Emotion::Boredom, "Boredom", "B"},
    {Emotion::Disgust, "Disgust", "D"},     {Emotion::Excitement, "Excitement", "E"},
    {Emotion::Fear, "Fear", "F"},           {Emotion::Happiness, "Happiness", "H"},
    {Emotion::Neutral, "Neutral", "N"},     {Emotion::Sadness, "Sadness", "S"},
    {Emotion::Surprise, "Surprise", "Sr"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string to_string(Emotion e) {
  for (const auto& n : kNames) {
    if (n.emotion == e) return n.name;
  }
  return "?";
}

std::string emotion_code(Emotion e) {
  for (const auto& n : kNames) {
    if (n.emotion == e) return n.code;
  }
  return "?";
}

std::optional<Emotion> parse_emotion(std::string_view text) {
  const std::string t = csv::trim(text);
  for (const auto& n : kNames) {
    if (t == n.code || lower(t) == lower(n.name)) return n.emotion;
  }
  if (lower(t) == "neutrality") return Emotion::Neutral;
  return std::nullopt;
}

void validate_samples(const std::vector<Sample>& samples) {
  std::unordered_set<std::string> ids;
  for (const auto& s : samples) {
    if (s.id.empty()) throw Error("sample with empty id");
    if (!ids.insert(s.id).second) throw Error("duplicate sample id '" + s.id + "'");
  }
  for (const auto& s : samples) {
    if (s.augmented_from && !ids.count(*s.augmented_from)) {
      throw Error("sample '" + s.id + "' is augmented from unknown id '" + *s.augmented_from + "'");
    }
  }
}

std::vector<Sample> load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  const std::string file = path.string();
  const auto base = path.parent_path();

  std::string line;
  if (!std::getline(is, line)) throw ManifestError(file, 1, "empty manifest (missing header)");
  const auto header = csv::split_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower(header[i])] = i;
  for (const char* required : {"id", "audio_path", "emotion", "speaker_id", "corpus_id"}) {
    if (!col.count(required)) throw ManifestError(file, 1, std::string("missing column '") + required + "'");
  }
  const bool has_aug = col.count("augmented_from") > 0;

  std::vector<Sample> samples;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != header.size()) {
      throw ManifestError(file, lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                            std::to_string(f.size()));
    }
    Sample s;
    s.id = f[col["id"]];
    if (s.id.empty()) throw ManifestError(file, lineno, "empty id");
    if (auto [it, fresh] = seen.emplace(s.id, lineno); !fresh) {
      throw ManifestError(file, lineno, "duplicate id '" + s.id + "' (first on line " + std::to_string(it->second) + ")");
    }
    const auto emo = parse_emotion(f[col["emotion"]]);
    if (!emo) throw ManifestError(file, lineno, "unknown emotion label '" + f[col["emotion"]] + "'");
    s.emotion = *emo;
    std::filesystem::path audio = f[col["audio_path"]];
    if (!audio.empty() && audio.is_relative()) audio = base / audio;
    s.audio_path = audio.string();
    s.speaker_id = f[col["speaker_id"]];
    s.corpus_id = f[col["corpus_id"]];
    if (has_aug && !f[col["augmented_from"]].empty()) s.augmented_from = f[col["augmented_from"]];
    samples.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.augmented_from && !seen.count(*s.augmented_from)) {
      throw ManifestError(file, seen[s.id], "augmented_from references unknown id '" + *s.augmented_from + "'");
    }
  }
  return samples;
}

void save_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  validate_samples(samples);
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const bool any_aug = std::any_of(samples.begin(), samples.end(), [](const Sample& s) { return s.is_synthetic(); });
  const auto base = std::filesystem::absolute(path).parent_path();
  os << "id,audio_path,emotion,speaker_id,corpus_id" << (any_aug ? ",augmented_from" : "") << '\n';
  for (const auto& s : samples) {
    std::filesystem::path audio = s.audio_path;
    if (!audio.empty()) {
      const auto rel = std::filesystem::absolute(audio).lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") audio = rel;
    }
    os << csv::field(s.id) << ',' << csv::field(audio.generic_string()) << ',' << to_string(s.emotion) << ','
       << csv::field(s.speaker_id) << ',' << csv::field(s.corpus_id);
    if (any_aug) os << ',' << csv::field(s.augmented_from.value_or(""));
    os << '\n';
  }
}

LabelScheme LabelScheme::parse(std::string_view name) {
  const auto n = lower(name);
  if (n == "four_class" || n == "fourclass" || n == "4") return four_class();
  if (n == "three_class" || n == "threeclass" || n == "3") return three_class();
  throw ConfigError("unknown label scheme '" + std::string(name) + "'");
}

std::string LabelScheme::name() const {
  return kind == LabelSchemeKind::FourClass ? "four_class" : "three_class";
}

std::vector<std::string> LabelScheme::class_names() const {
  if (kind == LabelSchemeKind::FourClass) return {"Anger", "Happiness", "Sadness", "Neutral"};
  return {"Negative", "Positive", "Neutral"};
}

std::optional<int> LabelScheme::class_of(Emotion e) const {
  if (kind == LabelSchemeKind::FourClass) {
    switch (e) {
      case Emotion::Anger: return 0;
      case Emotion::Happiness: return 1;
      case Emotion::Sadness: return 2;
      case Emotion::Neutral: return 3;
      default: return std::nullopt;
    }
  }
  switch (e) {
    case Emotion::Anger:
    case Emotion::Boredom:
    case Emotion::Disgust:
    case Emotion::Fear:
    case Emotion::Sadness: return 0;
    case Emotion::Excitement:
    case Emotion::Happiness:
    case Emotion::Surprise: return 1;
    case Emotion::Neutral: return 2;
  }
  return std::nullopt;
}

LabeledSet apply_label_scheme(const std::vector<Sample>& samples, const LabelScheme& scheme) {
  LabeledSet out;
  out.class_names = scheme.class_names();
  for (const auto& s : samples) {
    if (const auto c = scheme.class_of(s.emotion)) {
      out.samples.push_back({s, *c});
    } else {
      ++out.dropped;
    }
  }
  return out;
}

std::vector<std::size_t> class_histogram(const std::vector<LabeledSample>& samples, int num_classes) {
  std::vector<std::size_t> h(static_cast<std::size_t>(num_classes), 0);
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= num_classes) throw IndexError("label " + std::to_string(s.label) + " out of range");
    ++h[static_cast<std::size_t>(s.label)];
  }
  return h;
}

namespace {
std::vector<std::vector<std::size_t>> indices_by_class(const std::vector<LabeledSample>& samples, int num_classes) {
  std::vector<std::vector<std::size_t>> by(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < samples.size(); ++i) by[static_cast<std::size_t>(samples[i].label)].push_back(i);
  for (std::size_t c = 0; c < by.size(); ++c) {
    if (by[c].empty()) throw Error("balancing: class " + std::to_string(c) + " has no samples");
  }
  return by;
}
}  // namespace

std::vector<LabeledSample> balance_undersample(const std::vector<LabeledSample>& samples, int num_classes,
                                               std::uint64_t seed) {
  class_histogram(samples, num_classes);
  auto by = indices_by_class(samples, num_classes);
  std::size_t target = samples.size();
  for (const auto& c : by) target = std::min(target, c.size());

  std::vector<bool> keep(samples.size(), false);
  for (std::size_t c = 0; c < by.size(); ++c) {
    std::mt19937_64 rng(derive_seed(seed, "undersample/" + std::to_string(c)));
    auto idx = by[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < target; ++k) keep[idx[k]] = true;
  }
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (keep[i]) out.push_back(samples[i]);
  }
  return out;
}

Sample make_synthetic_sample(const Sample& source, int variant) {
  Sample s = source;
  s.id = source.id + ".aug" + std::to_string(variant);
  s.augmented_from = source.id;
  return s;
}

std::vector<LabeledSample> balance_augment(const std::vector<LabeledSample>& samples, int num_classes,
                                           const AugmentFn& augment, std::uint64_t seed) {
  class_histogram(samples, num_classes);
  const auto by = indices_by_class(samples, num_classes);
  std::size_t target = 0;
  for (const auto& c : by) target = std::max(target, c.size());

  std::vector<LabeledSample> out = samples;
  for (std::size_t c = 0; c < by.size(); ++c) {
    const auto& idx = by[c];
    const std::size_t missing = target - idx.size();
    if (missing == 0) continue;
    std::mt19937_64 rng(derive_seed(seed, "augment/" + std::to_string(c)));
    std::uniform_int_distribution<std::size_t> start_dist(0, idx.size() - 1);
    const std::size_t start = start_dist(rng);
    for (std::size_t k = 0; k < missing; ++k) {
      const auto& src = samples[idx[(start + k) % idx.size()]];
      const int variant = static_cast<int>(k / idx.size());
      Sample synth;
      try {
        synth = augment(src.sample, variant);
      } catch (const std::exception& e) {
        throw Error("augmentation of sample '" + src.sample.id + "' failed: " + e.what());
      }
      synth.augmented_from = src.sample.id;
      out.push_back({std::move(synth), src.label});
    }
  }
  return out;
}

std::set<std::string> corpus_ids(const std::vector<Sample>& samples) {
  std::set<std::string> out;
  for (const auto& s : samples) out.insert(s.corpus_id);
  return out;
}

std::set<std::string> speaker_ids(const std::vector<Sample>& samples) {
  std::set<std::string> out;
  for (const auto& s : samples) out.insert(s.speaker_id);
  return out;
}

SplitPlan split_cross_corpus(const std::vector<Sample>& samples, const std::vector<std::string>& train_corpora,
                             const std::vector<std::string>& val_corpora, const std::string& test_corpus) {
  const auto present = corpus_ids(samples);
  std::set<std::string> train(train_corpora.begin(), train_corpora.end());
  std::set<std::string> val(val_corpora.begin(), val_corpora.end());
  if (train.empty()) throw ConfigError("cross-corpus split: no training corpora");
  for (const auto* group : {&train, &val}) {
    for (const auto& c : *group) {
      if (c == test_corpus) throw ConfigError("cross-corpus split: test corpus '" + c + "' overlaps train/val");
    }
  }
  for (const auto& c : train) {
    if (val.count(c)) throw ConfigError("cross-corpus split: corpus '" + c + "' in both train and val");
  }
  std::vector<std::string> all(train.begin(), train.end());
  all.insert(all.end(), val.begin(), val.end());
  all.push_back(test_corpus);
  for (const auto& c : all) {
    if (!present.count(c)) throw ConfigError("cross-corpus split: unknown corpus '" + c + "'");
  }

  SplitPlan plan;
  plan.protocol = Protocol::CrossCorpus;
  plan.name = "test=" + test_corpus;
  for (const auto& s : samples) {
    if (train.count(s.corpus_id)) {
      plan.train.push_back(s.id);
    } else if (val.count(s.corpus_id)) {
      plan.val.push_back(s.id);
    } else if (s.corpus_id == test_corpus) {
      plan.test.push_back(s.id);
    }
  }
  return plan;
}

std::vector<SplitPlan> split_loso(const std::vector<Sample>& samples) {
  const auto speakers = speaker_ids(samples);
  if (speakers.size() < 2) throw ConfigError("LOSO needs at least two speakers, found " + std::to_string(speakers.size()));
  std::vector<SplitPlan> folds;
  for (const auto& spk : speakers) {
    SplitPlan plan;
    plan.protocol = Protocol::LOSO;
    plan.name = "speaker=" + spk;
    for (const auto& s : samples) (s.speaker_id == spk ? plan.test : plan.train).push_back(s.id);
    folds.push_back(std::move(plan));
  }
  return folds;
}

void validate_plan(const SplitPlan& plan, const std::vector<Sample>& samples) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  std::unordered_map<std::string, int> where;
  const auto add = [&](const std::vector<std::string>& ids, int split) {
    for (const auto& id : ids) {
      if (!by_id.count(id)) throw Error("plan '" + plan.name + "' references unknown id '" + id + "'");
      if (!where.emplace(id, split).second) throw Error("plan '" + plan.name + "': id '" + id + "' in two splits");
    }
  };
  add(plan.train, 0);
  add(plan.val, 1);
  add(plan.test, 2);

  std::set<std::string> test_keys, fit_keys;
  const bool corpus = plan.protocol == Protocol::CrossCorpus;
  for (const auto& [id, split] : where) {
    const auto& s = *by_id[id];
    const auto& key = corpus ? s.corpus_id : s.speaker_id;
    (split == 2 ? test_keys : fit_keys).insert(key);
  }
  for (const auto& k : test_keys) {
    if (fit_keys.count(k)) {
      throw Error("plan '" + plan.name + "': " + std::string(corpus ? "corpus" : "speaker") + " '" + k +
                  "' appears in both test and train/val");
    }
  }
}

}  // namespace ser::corpus
