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

#include <algorithm>
#include <numeric>
#include <random>

#include "ser/common/error.hpp"
#include "ser/metrics/metrics.hpp"
#include "support/temp_dir.hpp"

namespace ser::metrics {
namespace {

using testing::TempDir;

ConfusionMatrix from_counts(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
  ConfusionMatrix cm;
  const auto n = static_cast<Eigen::Index>(rows.size());
  cm.counts = CountMatrix::Zero(n, n);
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (auto v : row) cm.counts(r, c++) = v;
    ++r;
  }
  for (Eigen::Index i = 0; i < n; ++i) cm.class_names.push_back("c" + std::to_string(i));
  return cm;
}

// Metrics straight from the label arrays, one sample at a time.
struct Oracle {
  double accuracy, uar, macro_f1;
};

Oracle brute_force(const std::vector<int>& t, const std::vector<int>& p, int classes) {
  int correct = 0;
  for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
  double recall_sum = 0, f1_sum = 0;
  int recall_n = 0;
  for (int c = 0; c < classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      tp += t[i] == c && p[i] == c;
      fp += t[i] != c && p[i] == c;
      fn += t[i] == c && p[i] != c;
    }
    if (tp + fn > 0) {
      recall_sum += static_cast<double>(tp) / (tp + fn);
      ++recall_n;
    }
    if (tp + fp + fn > 0) f1_sum += tp / (tp + 0.5 * (fp + fn));
  }
  return {static_cast<double>(correct) / static_cast<double>(t.size()), recall_sum / recall_n, f1_sum / classes};
}

TEST(ConfusionMatrix, HandCountedExample) {
  const std::vector<int> t = {0, 0, 1}, p = {0, 1, 1};
  const auto cm = confusion_matrix(t, p, 2);
  EXPECT_EQ(cm.counts, from_counts({{1, 1}, {0, 1}}).counts);
  EXPECT_EQ(cm.true_positives(0), 1);
  EXPECT_EQ(cm.false_negatives(0), 1);
  EXPECT_EQ(cm.false_positives(1), 1);
  EXPECT_EQ(cm.class_names, (std::vector<std::string>{"0", "1"}));
}

TEST(ConfusionMatrix, PerfectEmptyAndErrors) {
  const std::vector<int> t = {0, 1, 2, 2};
  const auto cm = confusion_matrix(t, t, 3);
  EXPECT_TRUE(cm.counts.isApprox(CountMatrix(cm.counts.diagonal().asDiagonal())));
  EXPECT_EQ(confusion_matrix({}, {}, 3).total(), 0);
  const std::vector<int> bad = {0, 3}, ok = {0, 1};
  EXPECT_THROW(confusion_matrix(bad, ok, 3), IndexError);
  EXPECT_THROW(confusion_matrix(ok, std::vector<int>{0}, 3), ShapeError);
  EXPECT_THROW(confusion_matrix(ok, ok, 3, {"a"}), ShapeError);
  const std::vector<int> neg = {-1, 0};
  EXPECT_THROW(confusion_matrix(neg, ok, 3), IndexError);
}

TEST(ConfusionMatrix, ShardsMergeByAddition) {
  std::mt19937_64 rng(1);
  std::vector<int> t(100), p(100);
  for (auto& v : t) v = static_cast<int>(rng() % 4);
  for (auto& v : p) v = static_cast<int>(rng() % 4);
  auto a = confusion_matrix(std::span(t).first(37), std::span(p).first(37), 4);
  a += confusion_matrix(std::span(t).subspan(37), std::span(p).subspan(37), 4);
  EXPECT_EQ(a.counts, confusion_matrix(t, p, 4).counts);
  EXPECT_THROW(a += confusion_matrix({}, {}, 3), ShapeError);
}

TEST(Accuracy, Examples) {
  EXPECT_DOUBLE_EQ(accuracy(from_counts({{3, 0}, {0, 2}})), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(from_counts({{1, 1}, {0, 1}})), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(accuracy(from_counts({{1, 1}, {1, 1}})), 0.5);
  EXPECT_THROW(accuracy(from_counts({{0, 0}, {0, 0}})), UndefinedMetricError);
}

TEST(Uar, BinaryFormula) {
  // t_p = 8 of p = 10, t_n = 3 of n = 5.
  EXPECT_NEAR(uar(from_counts({{8, 2}, {2, 3}})), 0.70, 1e-15);
}

TEST(Uar, FourClassRecalls) {
  EXPECT_NEAR(uar(from_counts({{4, 0, 0, 0}, {1, 2, 1, 0}, {1, 1, 1, 1}, {0, 3, 0, 1}})), 0.5, 1e-15);
}

TEST(Uar, EqualsAccuracyOnBalancedSets) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> t, p;
    for (int c = 0; c < 4; ++c) {
      for (int i = 0; i < 7; ++i) {
        t.push_back(c);
        p.push_back(static_cast<int>(rng() % 4));
      }
    }
    const auto cm = confusion_matrix(t, p, 4);
    EXPECT_NEAR(uar(cm), accuracy(cm), 1e-12);
  }
}

TEST(Uar, ZeroSupportClassIsExcludedAndFlagged) {
  std::vector<int> excluded;
  EXPECT_NEAR(uar(from_counts({{2, 0, 0}, {0, 0, 0}, {1, 1, 2}}), &excluded), (1.0 + 0.5) / 2, 1e-15);
  EXPECT_EQ(excluded, std::vector<int>{1});
  EXPECT_THROW(uar(from_counts({{0}})), UndefinedMetricError);
}

TEST(MacroF1, Examples) {
  EXPECT_DOUBLE_EQ(macro_f1(from_counts({{5, 0}, {0, 5}})), 1.0);
  EXPECT_NEAR(macro_f1(from_counts({{1, 1}, {0, 1}})), 2.0 / 3.0, 1e-15);
  // Everything predicted as class 0 on a balanced set: F1 = (2/3 + 0) / 2.
  const auto degenerate = from_counts({{6, 0}, {6, 0}});
  EXPECT_NEAR(macro_f1(degenerate), 1.0 / 3.0, 1e-15);
  EXPECT_LT(macro_f1(degenerate), accuracy(degenerate));
  EXPECT_THROW(macro_f1(from_counts({{0, 0}, {0, 0}})), UndefinedMetricError);
}

TEST(MacroF1, AbsentClassContributesZeroAndIsFlagged) {
  std::vector<int> flagged;
  EXPECT_NEAR(macro_f1(from_counts({{3, 0, 0}, {0, 0, 0}, {0, 0, 2}}), &flagged), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(flagged, std::vector<int>{1});
}

TEST(MetricsProperty, MatchBruteForceOracle) {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 200);
    // Occasionally restrict labels so some classes have no support.
    const int true_range = trial % 10 == 0 ? 2 : 4;
    std::vector<int> t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      t[static_cast<std::size_t>(i)] = static_cast<int>(rng() % static_cast<std::uint64_t>(true_range));
      p[static_cast<std::size_t>(i)] = rng() % 3 == 0 ? t[static_cast<std::size_t>(i)] : static_cast<int>(rng() % 4);
    }
    const auto cm = confusion_matrix(t, p, 4);
    ASSERT_EQ(cm.total(), n);
    const auto o = brute_force(t, p, 4);
    ASSERT_NEAR(accuracy(cm), o.accuracy, 1e-12);
    ASSERT_NEAR(uar(cm), o.uar, 1e-12);
    ASSERT_NEAR(macro_f1(cm), o.macro_f1, 1e-12);
  }
}

TEST(MetricsProperty, BoundsAndPerfection) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    CountMatrix counts(4, 4);
    for (Eigen::Index i = 0; i < 16; ++i) counts.data()[i] = static_cast<std::int64_t>(rng() % 5);
    counts(0, 0) += 1;
    ConfusionMatrix cm{counts, {"a", "b", "c", "d"}};
    const bool diagonal = (counts.array() * (1 - CountMatrix::Identity(4, 4).array())).sum() == 0 &&
                          (counts.diagonal().array() > 0).all();
    for (double m : {accuracy(cm), uar(cm), macro_f1(cm)}) {
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0);
      EXPECT_EQ(m == 1.0, diagonal);
    }
  }
  ConfusionMatrix diag{CountMatrix(Eigen::Vector<std::int64_t, 3>(2, 5, 1).asDiagonal()), {"a", "b", "c"}};
  EXPECT_EQ(accuracy(diag), 1.0);
  EXPECT_EQ(uar(diag), 1.0);
  EXPECT_EQ(macro_f1(diag), 1.0);
}

TEST(MetricsProperty, InvariantUnderClassPermutation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    CountMatrix counts(4, 4);
    for (Eigen::Index i = 0; i < 16; ++i) counts.data()[i] = static_cast<std::int64_t>(rng() % 6);
    counts(trial % 4, 0) += 1;
    std::vector<int> perm = {0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    CountMatrix permuted(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) permuted(perm[static_cast<std::size_t>(r)], perm[static_cast<std::size_t>(c)]) = counts(r, c);
    const ConfusionMatrix a{counts, {"a", "b", "c", "d"}}, b{permuted, {"a", "b", "c", "d"}};
    EXPECT_NEAR(accuracy(a), accuracy(b), 1e-15);
    EXPECT_NEAR(uar(a), uar(b), 1e-15);
    EXPECT_NEAR(macro_f1(a), macro_f1(b), 1e-15);
  }
}

TEST(MetricsProperty, UarIgnoresDuplicatingOneClass) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    CountMatrix counts(4, 4);
    for (Eigen::Index i = 0; i < 16; ++i) counts.data()[i] = static_cast<std::int64_t>(rng() % 6);
    counts.diagonal().array() += 1;
    ConfusionMatrix a{counts, {"a", "b", "c", "d"}};
    ConfusionMatrix b = a;
    const int c = trial % 4;
    b.counts.row(c) *= 1 + static_cast<std::int64_t>(rng() % 4);
    EXPECT_NEAR(uar(a), uar(b), 1e-12);
  }
}

TEST(Report, FlagsAndFiles) {
  TempDir dir;
  std::vector<Prediction> preds = {{"u1", 0, 0}, {"u,2", 0, 2}, {"u3", 2, 2}, {"u4", 3, 3}};
  const auto r = make_report("test", preds, {"A", "H", "S", "N"});
  EXPECT_EQ(r.uar_excluded_classes, std::vector<int>{1});
  EXPECT_EQ(r.f1_zero_classes, std::vector<int>{1});
  EXPECT_TRUE(r.has_warnings());
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  save_metrics_csv(dir / "m.csv", r);
  const std::string m = testing::read_file(dir / "m.csv");
  EXPECT_TRUE(m.starts_with("metric,value\naccuracy,0.75\n"));
  EXPECT_NE(m.find("uar_excluded_classes,1\n"), std::string::npos);
  save_confusion_csv(dir / "c.csv", r.confusion);
  EXPECT_TRUE(testing::read_file(dir / "c.csv").starts_with("true\\pred,A,H,S,N\nA,1,0,1,0\n"));
  save_predictions_csv(dir / "p.csv", preds);
  const auto back = load_predictions_csv(dir / "p.csv");
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back[1].id, "u,2");
  EXPECT_EQ(back[1].predicted, 2);
  save_confusion_png(dir / "c.png", r.confusion);
  EXPECT_EQ(testing::read_file(dir / "c.png").substr(1, 3), "PNG");
  testing::write_file(dir / "bad.csv", "id,true,predicted\nx,1\n");
  EXPECT_THROW(load_predictions_csv(dir / "bad.csv"), IoError);
  testing::write_file(dir / "bad2.csv", "id,true,predicted\nx,1,zz\n");
  EXPECT_THROW(load_predictions_csv(dir / "bad2.csv"), IoError);
  EXPECT_THROW(make_report("x", {{"a", 5, 0}}, {"A", "B"}), IndexError);
}

}  // namespace
}  // namespace ser::metrics
