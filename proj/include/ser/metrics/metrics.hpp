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
#include <span>
#include <string>
#include <vector>

namespace ser::metrics {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  CountMatrix counts;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(counts.rows()); }
  std::int64_t total() const { return counts.sum(); }
  std::int64_t true_positives(int c) const { return counts(c, c); }
  std::int64_t false_negatives(int c) const { return counts.row(c).sum() - counts(c, c); }
  std::int64_t false_positives(int c) const { return counts.col(c).sum() - counts(c, c); }
  std::int64_t support(int c) const { return counts.row(c).sum(); }

  /// Elementwise sum; shards of one evaluation merge this way.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int num_classes,
                                 std::vector<std::string> class_names = {});

double accuracy(const ConfusionMatrix& cm);

/// Mean per-class recall. Classes without true samples are left out of the mean
/// and reported through `excluded` when given.
double uar(const ConfusionMatrix& cm, std::vector<int>* excluded = nullptr);

/// Unweighted mean of F1 = tp / (tp + (fp + fn) / 2). A class with
/// tp = fp = fn = 0 contributes 0 and is reported through `flagged`.
double macro_f1(const ConfusionMatrix& cm, std::vector<int>* flagged = nullptr);

struct Prediction {
  std::string id;
  int truth = 0;
  int predicted = 0;
};

struct EvalReport {
  std::string split;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double uar = 0.0;
  double macro_f1 = 0.0;
  std::vector<int> uar_excluded_classes;
  std::vector<int> f1_zero_classes;
  std::vector<Prediction> predictions;

  bool has_warnings() const { return !uar_excluded_classes.empty() || !f1_zero_classes.empty(); }
};

EvalReport make_report(std::string split, std::vector<Prediction> predictions,
                       const std::vector<std::string>& class_names);

/// metric,value rows (accuracy, uar, macro_f1, n, and warning flags).
void save_metrics_csv(const std::filesystem::path& path, const EvalReport& report);
/// Header row of predicted class names, one row per true class.
void save_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
void save_predictions_csv(const std::filesystem::path& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> load_predictions_csv(const std::filesystem::path& path);
/// Row-normalised heatmap (true on the vertical axis), PNG.
void save_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& cm, int cell = 48);

}  // namespace ser::metrics
