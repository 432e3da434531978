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

#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "ser/nn/tensor.hpp"

namespace ser::nn {

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* where) {
  if (!x.allFinite()) throw NumericError(std::string(where) + ": non-finite input");
}

/// Row-wise softmax with max subtraction.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  require_finite(x, "softmax");
  Matrix<Scalar> out = x;
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return out;
}

/// Gradient of the row-wise softmax: given p = softmax(s) and dL/dp, returns dL/ds.
template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& p, const Matrix<Scalar>& dp) {
  const Vector<Scalar> dot = (p.array() * dp.array()).rowwise().sum();
  return (p.array() * (dp.colwise() - dot).array()).matrix();
}

/// Softmax of a tensor along `axis`.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& x, Index axis) {
  if (axis < 0 || axis >= x.rank()) {
    throw IndexError("softmax axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(x.rank()));
  }
  require_finite(x.data(), "softmax");
  Index outer = 1, inner = 1;
  for (Index i = 0; i < axis; ++i) outer *= x.dim(i);
  for (Index i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const Index n = x.dim(axis);

  Tensor<Scalar> out(x.shape(), x.data());
  auto& d = out.data();
  for (Index o = 0; o < outer; ++o) {
    for (Index in = 0; in < inner; ++in) {
      const Index base = o * n * inner + in;
      Scalar m = -std::numeric_limits<Scalar>::infinity();
      for (Index k = 0; k < n; ++k) m = std::max(m, d[base + k * inner]);
      Scalar sum = 0;
      for (Index k = 0; k < n; ++k) {
        d[base + k * inner] = std::exp(d[base + k * inner] - m);
        sum += d[base + k * inner];
      }
      for (Index k = 0; k < n; ++k) d[base + k * inner] /= sum;
    }
  }
  return out;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(std::numbers::sqrt2 / 2)));
}

template <typename Scalar>
Scalar gelu_derivative(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(std::numbers::sqrt2 / 2)));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) * Scalar(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <typename Scalar>
struct CrossEntropyResult {
  Scalar loss;
  Matrix<Scalar> dlogits;  ///< gradient of the mean loss w.r.t. the logits
};

/// Mean over the batch of -log softmax(logits)[target].
template <typename Scalar>
CrossEntropyResult<Scalar> cross_entropy_loss(const Matrix<Scalar>& logits,
                                              std::span<const int> targets) {
  if (static_cast<Index>(targets.size()) != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(logits.rows()) + " logit rows");
  }
  const Index classes = logits.cols();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= classes) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[i]) + " at row " +
                       std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  require_finite(logits, "cross_entropy");
  CrossEntropyResult<Scalar> r{Scalar(0), softmax_rows(logits)};
  const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(std::max<Index>(1, logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    const Scalar lse = m + std::log((logits.row(i).array() - m).exp().sum());
    r.loss += lse - logits(i, targets[i]);
    r.dlogits(i, targets[i]) -= Scalar(1);
  }
  r.loss *= inv_batch;
  r.dlogits *= inv_batch;
  return r;
}

/// Output length of a convolution or pooling window along one axis.
inline Index window_output_size(Index input, Index kernel, Index stride, Index padding) {
  if (stride <= 0 || kernel <= 0 || padding < 0) {
    throw ShapeError("window: kernel and stride must be positive, padding non-negative");
  }
  if (kernel > input + 2 * padding) {
    throw ShapeError("window: kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(input + 2 * padding));
  }
  return (input + 2 * padding - kernel) / stride + 1;
}

}  // namespace ser::nn
