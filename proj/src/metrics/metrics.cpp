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

#include "ser/metrics/metrics.hpp"

#include <fstream>
#include <sstream>

#include "ser/common/csv.hpp"
#include "ser/common/error.hpp"
#include "ser/common/png.hpp"

namespace ser::metrics {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.counts.rows() != counts.rows()) throw ShapeError("confusion matrices differ in class count");
  counts += other.counts;
  return *this;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int num_classes,
                                 std::vector<std::string> class_names) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
  if (truth.size() != predicted.size()) {
    throw ShapeError("label arrays differ in length: " + std::to_string(truth.size()) + " vs " +
                     std::to_string(predicted.size()));
  }
  if (!class_names.empty() && static_cast<int>(class_names.size()) != num_classes) {
    throw ShapeError("class name count does not match class count");
  }
  ConfusionMatrix cm;
  cm.counts = CountMatrix::Zero(num_classes, num_classes);
  if (class_names.empty()) {
    for (int c = 0; c < num_classes; ++c) class_names.push_back(std::to_string(c));
  }
  cm.class_names = std::move(class_names);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw IndexError("label pair (" + std::to_string(t) + ", " + std::to_string(p) + ") at position " +
                       std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++cm.counts(t, p);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total <= 0) throw UndefinedMetricError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
}

double uar(const ConfusionMatrix& cm, std::vector<int>* excluded) {
  if (cm.total() <= 0) throw UndefinedMetricError("UAR of an empty confusion matrix");
  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const auto support = cm.support(c);
    if (support == 0) {
      if (excluded) excluded->push_back(c);
      continue;
    }
    sum += static_cast<double>(cm.true_positives(c)) / static_cast<double>(support);
    ++used;
  }
  return sum / used;
}

double macro_f1(const ConfusionMatrix& cm, std::vector<int>* flagged) {
  if (cm.total() <= 0) throw UndefinedMetricError("macro-F1 of an empty confusion matrix");
  double sum = 0.0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const double tp = static_cast<double>(cm.true_positives(c));
    const double fp = static_cast<double>(cm.false_positives(c));
    const double fn = static_cast<double>(cm.false_negatives(c));
    const double denom = tp + 0.5 * (fp + fn);
    if (denom == 0.0) {
      if (flagged) flagged->push_back(c);
      continue;
    }
    sum += tp / denom;
  }
  return sum / cm.num_classes();
}

EvalReport make_report(std::string split, std::vector<Prediction> predictions,
                       const std::vector<std::string>& class_names) {
  std::vector<int> t, p;
  t.reserve(predictions.size());
  p.reserve(predictions.size());
  for (const auto& pr : predictions) {
    t.push_back(pr.truth);
    p.push_back(pr.predicted);
  }
  EvalReport r;
  r.split = std::move(split);
  r.confusion = confusion_matrix(t, p, static_cast<int>(class_names.size()), class_names);
  r.accuracy = accuracy(r.confusion);
  r.uar = uar(r.confusion, &r.uar_excluded_classes);
  r.macro_f1 = macro_f1(r.confusion, &r.f1_zero_classes);
  r.predictions = std::move(predictions);
  return r;
}

namespace {
std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.precision(17);
  return os;
}

std::string join_classes(const std::vector<int>& cs) {
  std::string s;
  for (int c : cs) s += (s.empty() ? "" : ";") + std::to_string(c);
  return s;
}
}  // namespace

void save_metrics_csv(const std::filesystem::path& path, const EvalReport& report) {
  auto os = open_out(path);
  os << "metric,value\n";
  os << "accuracy," << report.accuracy << '\n';
  os << "uar," << report.uar << '\n';
  os << "macro_f1," << report.macro_f1 << '\n';
  os << "n," << report.confusion.total() << '\n';
  os << "uar_excluded_classes," << join_classes(report.uar_excluded_classes) << '\n';
  os << "f1_zero_classes," << join_classes(report.f1_zero_classes) << '\n';
}

void save_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  auto os = open_out(path);
  os << "true\\pred";
  for (const auto& n : cm.class_names) os << ',' << n;
  os << '\n';
  for (int r = 0; r < cm.num_classes(); ++r) {
    os << cm.class_names[static_cast<std::size_t>(r)];
    for (int c = 0; c < cm.num_classes(); ++c) os << ',' << cm.counts(r, c);
    os << '\n';
  }
}

void save_predictions_csv(const std::filesystem::path& path, const std::vector<Prediction>& predictions) {
  auto os = open_out(path);
  os << "id,true,predicted\n";
  for (const auto& p : predictions) os << csv::field(p.id) << ',' << p.truth << ',' << p.predicted << '\n';
}

std::vector<Prediction> load_predictions_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<Prediction> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 3) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    try {
      std::size_t used_t = 0, used_p = 0;
      const int truth = std::stoi(f[1], &used_t);
      const int predicted = std::stoi(f[2], &used_p);
      if (used_t != f[1].size() || used_p != f[2].size()) throw std::invalid_argument("trailing characters");
      out.push_back({f[0], truth, predicted});
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed label");
    }
  }
  return out;
}

void save_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& cm, int cell) {
  const int c = cm.num_classes();
  const int size = c * cell;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(size) * size * 3, 255);
  for (int r = 0; r < c; ++r) {
    const double support = static_cast<double>(cm.support(r));
    for (int k = 0; k < c; ++k) {
      const double v = support > 0 ? static_cast<double>(cm.counts(r, k)) / support : 0.0;
      // White -> dark blue.
      const unsigned char rgb[3] = {static_cast<unsigned char>(255 - 247 * v), static_cast<unsigned char>(255 - 207 * v),
                                    static_cast<unsigned char>(255 - 148 * v)};
      for (int y = r * cell + 1; y < (r + 1) * cell - 1; ++y) {
        for (int x = k * cell + 1; x < (k + 1) * cell - 1; ++x) {
          std::copy(rgb, rgb + 3, img.begin() + (static_cast<std::ptrdiff_t>(y) * size + x) * 3);
        }
      }
    }
  }
  io::save_png(path, size, size, 3, img);
}

}  // namespace ser::metrics
