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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ser/corpus/corpus.hpp"
#include "ser/harness/config.hpp"
#include "ser/metrics/metrics.hpp"
#include "ser/model/cct.hpp"
#include "ser/nn/checkpoint.hpp"
#include "ser/speaker/speaker.hpp"

namespace ser::harness {

/// Network input and raw speaker embedding of one (possibly synthetic) sample.
struct SampleFeatures {
  nn::TensorD image;
  Eigen::VectorXd embedding;  ///< raw (pre-PCA); empty when not needed
};

/// Lazily computes and memoises per-sample features. Synthetic samples are
/// derived from their source audio with a time-domain transform (and an
/// optional spectrogram mask) chosen deterministically from the sample id;
/// they inherit the source's speaker embedding.
class FeatureStore {
 public:
  FeatureStore(const TrainConfig& cfg, bool need_embeddings);

  const SampleFeatures& get(const corpus::Sample& s);
  const Eigen::VectorXd& raw_embedding(const corpus::Sample& s);

  /// Augmentation recipe applied to a synthetic sample (for logs and tests).
  std::string describe_augmentation(const corpus::Sample& s) const;

 private:
  dsp::Waveform load_clip(const corpus::Sample& s) const;

  TrainConfig cfg_;
  bool need_embeddings_;
  std::unique_ptr<speaker::EmbeddingStore> store_;
  std::unordered_map<std::string, SampleFeatures> cache_;
  std::unordered_map<std::string, Eigen::VectorXd> embeddings_;
};

/// A model together with everything needed to feed it.
struct TrainedModel {
  TrainConfig config;
  std::vector<std::string> class_names;
  model::CctModel model;
  std::optional<speaker::SpeakerReducer> reducer;

  explicit TrainedModel(const TrainConfig& cfg);

  /// Predicted class for one sample.
  int predict(const SampleFeatures& f) const;
  Eigen::VectorXd speaker_input(const Eigen::VectorXd& raw) const;

  nn::Checkpoint to_checkpoint(const std::string& label, int epoch) const;
  static TrainedModel from_checkpoint(const nn::Checkpoint& ck);
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;  ///< running accuracy over the epoch's batches
  std::optional<double> val_uar;
};

struct BatchRecord {
  int epoch = 0;
  int batch = 0;
  std::vector<std::string> ids;
};

struct ExperimentResult {
  std::string name;
  TrainConfig config;
  std::vector<EpochStats> curve;
  std::vector<BatchRecord> batches;
  std::map<std::string, metrics::EvalReport> reports;  ///< "train", "val", "test"
  int best_epoch = 0;
  int epochs_run = 0;
  double wall_seconds = 0.0;  ///< not part of any deterministic output
  nn::Checkpoint best;
  nn::Checkpoint final;
  std::vector<std::string> pca_fit_ids;
  /// Training-set ids after balancing, mapped to the original they derive from.
  std::map<std::string, std::string> train_sources;
};

/// Trains on plan.train, selects by validation UAR when plan.val is
/// non-empty (otherwise the final epoch), and evaluates every non-empty split
/// with the selected checkpoint.
ExperimentResult train(const std::vector<corpus::Sample>& samples, const corpus::SplitPlan& plan,
                       const TrainConfig& cfg, FeatureStore* features = nullptr);

metrics::EvalReport evaluate(const TrainedModel& m, const std::vector<corpus::Sample>& samples,
                             const std::vector<std::string>& ids, const std::string& split, FeatureStore& features);
metrics::EvalReport evaluate(const nn::Checkpoint& ck, const std::vector<corpus::Sample>& samples,
                             const std::vector<std::string>& ids, const std::string& split);

/// Writes checkpoints, config, loss curve, batch log and per-split reports.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r);
void write_report(const std::filesystem::path& dir, const metrics::EvalReport& r);

/// Number of ids in the batch log or PCA fit set that are, or derive from, a forbidden id.
std::size_t audit_leakage(const ExperimentResult& r, const std::set<std::string>& forbidden);

struct Rotation {
  std::string test;
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Each held-out corpus is tested once; its validation corpus is the next
/// held-out corpus in sorted order and the rest (plus `always_train`) train.
std::vector<Rotation> default_rotations(const std::set<std::string>& corpora,
                                        const std::vector<std::string>& always_train = {});

struct CrossCorpusConfig {
  TrainConfig train;
  std::vector<model::FusionVariant> variants = {model::FusionVariant::None};
  std::vector<Balancing> modes = {Balancing::Undersample, Balancing::Augment};
  std::vector<std::string> always_train;
  std::vector<Rotation> rotations;  ///< empty: default_rotations

  static CrossCorpusConfig from_json(const json& j);
  json to_json() const;
};

struct CrossCorpusRow {
  std::string test_corpus;
  model::FusionVariant variant = model::FusionVariant::None;
  std::map<Balancing, metrics::EvalReport> reports;
};

struct CrossCorpusResult {
  std::vector<Rotation> rotations;
  std::vector<CrossCorpusRow> rows;
  std::vector<ExperimentResult> runs;
  std::size_t leaked = 0;
};

CrossCorpusResult run_cross_corpus(const std::vector<corpus::Sample>& samples, const CrossCorpusConfig& cfg,
                                   const std::filesystem::path& out_dir = {});

/// test_corpus,variant,accuracy_us,accuracy_aug,uar_us,uar_aug,macro_f1_us,macro_f1_aug
void save_cross_corpus_table(const std::filesystem::path& path, const CrossCorpusResult& r);

struct LosoResult {
  std::vector<std::string> speakers;
  std::vector<ExperimentResult> folds;
  double accuracy = 0.0, uar = 0.0, macro_f1 = 0.0;
  std::size_t leaked = 0;
};

LosoResult run_loso(const std::vector<corpus::Sample>& samples, const TrainConfig& cfg,
                    const std::filesystem::path& out_dir = {});
void save_loso_table(const std::filesystem::path& path, const LosoResult& r);

}  // namespace ser::harness
