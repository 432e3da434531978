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

#include <algorithm>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ser/nn/tensor.hpp"

namespace ser::nn {

struct GradientBlockError {
  std::string name;
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradientCheckReport {
  std::vector<GradientBlockError> blocks;
  double max_relative_error = 0.0;
  bool passed = true;
};

template <typename Scalar>
using NamedParameters = std::vector<std::pair<std::string, Tensor<Scalar>*>>;

/// Gradients below this magnitude are indistinguishable from central-difference
/// round-off (about eps * |loss| / h); such blocks count as flat.
inline constexpr double kFlatGradient = 1e-7;

/// Relative error of a gradient block: max|a - n| / max(max|a|, max|n|, 1e-8),
/// or 0 when both gradients are flat.
inline double gradient_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  if (analytic.size() == 0) return 0.0;
  const double peak = std::max(analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
  if (peak < kFlatGradient) return 0.0;
  const double diff = (analytic - numeric).cwiseAbs().maxCoeff();
  return diff / std::max(peak, 1e-8);
}

/// Compares analytic gradients against central differences.
///
/// `loss_fn(true)` must evaluate the loss and accumulate gradients into the
/// parameters' (pre-zeroed) grad buffers; `loss_fn(false)` only evaluates.
template <typename Scalar>
GradientCheckReport finite_difference_check(const std::function<Scalar(bool)>& loss_fn,
                                            const NamedParameters<Scalar>& params, Scalar h,
                                            double tol) {
  for (auto& [name, p] : params) {
    p->enable_grad();
    p->zero_grad();
  }
  loss_fn(true);

  GradientCheckReport report;
  for (auto& [name, p] : params) {
    const Eigen::VectorXd analytic = p->grad().template cast<double>();
    Eigen::VectorXd numeric(p->numel());
    for (Index i = 0; i < p->numel(); ++i) {
      const Scalar saved = p->data()[i];
      p->data()[i] = saved + h;
      const Scalar plus = loss_fn(false);
      p->data()[i] = saved - h;
      const Scalar minus = loss_fn(false);
      p->data()[i] = saved;
      numeric[i] = static_cast<double>((plus - minus) / (Scalar(2) * h));
    }
    GradientBlockError e{name, gradient_relative_error(analytic, numeric),
                         analytic.size() ? (analytic - numeric).cwiseAbs().maxCoeff() : 0.0};
    report.max_relative_error = std::max(report.max_relative_error, e.max_relative_error);
    report.blocks.push_back(std::move(e));
  }
  report.passed = report.max_relative_error < tol;
  return report;
}

}  // namespace ser::nn
