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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ser/dsp/waveform.hpp"

namespace ser::speaker {

/// Raw embedding width produced by the toy encoder (and expected from files).
inline constexpr Eigen::Index kRawEmbeddingDim = 1024;
/// Width after PCA reduction.
inline constexpr Eigen::Index kReducedEmbeddingDim = 384;

struct SpeakerEmbedding {
  std::string utterance_id;
  Eigen::VectorXd vector;
};

/// Deterministic stand-in for a pretrained speaker network: per-band mean,
/// standard deviation and mean absolute delta of the log-Mel spectrogram,
/// mapped through a fixed seeded Gaussian projection.
Eigen::VectorXd toy_speaker_encoder(const dsp::Waveform& w, Eigen::Index out_dim = kRawEmbeddingDim);

/// Hand-off point between the statistics and the projection; exposed for tests.
Eigen::VectorXd toy_speaker_statistics(const dsp::Waveform& w);

/// Fitted PCA: components are rows (orthonormal), eigenvalues descending.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // [k x d]
  Eigen::VectorXd eigenvalues;

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return components.rows(); }
};

/// Variance-ranked PCA on the rows of `x` (sample covariance, n-1 normalisation).
/// Uses the n x n Gram matrix when n < d. Requires n >= 2 and k <= min(n-1, d).
PcaModel pca_fit(const Eigen::MatrixXd& x, Eigen::Index k);

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& v);
/// Rows of `x` projected; [n x k].
Eigen::MatrixXd pca_project_rows(const PcaModel& model, const Eigen::MatrixXd& x);
Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& coords);

/// Fixed-width reduction used by the training pipeline. When the fit set is
/// too small for `out_dim` components, the trailing coordinates are zero.
/// Outputs are multiplied by `scale` so that the projected fit set has unit
/// mean per-coordinate variance over the fitted components.
struct SpeakerReducer {
  PcaModel pca;
  Eigen::Index out_dim = kReducedEmbeddingDim;
  double scale = 1.0;

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
};

SpeakerReducer fit_speaker_reducer(const Eigen::MatrixXd& x, Eigen::Index out_dim = kReducedEmbeddingDim);

/// Classical MDS: double-centred squared distances, top eigenpairs.
/// Requires a symmetric, zero-diagonal, non-negative matrix.
Eigen::MatrixXd mds_embed(const Eigen::MatrixXd& distances, Eigen::Index out_dim = 2);

/// Euclidean distances between rows.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x);

/// Mean silhouette coefficient of a labelled point set (Euclidean).
double silhouette_score(const Eigen::MatrixXd& points, const std::vector<std::string>& labels);

/// Embeddings of fixed width, keyed by utterance id.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(Eigen::Index dim) : dim_(dim) {}

  void add(SpeakerEmbedding e);
  const SpeakerEmbedding* find(const std::string& id) const;
  const SpeakerEmbedding& at(const std::string& id) const;

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<SpeakerEmbedding>& records() const { return records_; }

  /// u64 count, u64 dim, then per record: u64 id length, id bytes, dim f64 (LE).
  void save(const std::filesystem::path& path) const;
  static EmbeddingStore load(const std::filesystem::path& path);

 private:
  Eigen::Index dim_ = 0;
  std::vector<SpeakerEmbedding> records_;
};

struct MdsPoint {
  std::string id;
  std::string speaker;
  double x = 0.0;
  double y = 0.0;
};

void save_mds_csv(const std::filesystem::path& path, const std::vector<MdsPoint>& points);
/// Scatter plot as PNG, one colour per speaker.
void save_mds_png(const std::filesystem::path& path, const std::vector<MdsPoint>& points, int size = 512);

}  // namespace ser::speaker
