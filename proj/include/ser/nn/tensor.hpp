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

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ser/common/error.hpp"

namespace ser::nn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? " x " : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense n-dimensional array stored row-major, with an optional gradient
/// buffer of the same shape. Parameters carry a gradient; plain values don't.
template <typename Scalar>
class Tensor {
 public:
  using MatrixMap = Eigen::Map<RowMajorMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix<Scalar>>;

  Tensor() = default;

  explicit Tensor(std::vector<Index> shape)
      : shape_(std::move(shape)), data_(Vector<Scalar>::Zero(count(shape_))) {}

  Tensor(std::vector<Index> shape, Vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size()) {
      throw ShapeError("tensor shape " + shape_string(shape_) + " holds " +
                       std::to_string(count(shape_)) + " values, got " +
                       std::to_string(data_.size()));
    }
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index numel() const { return data_.size(); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }

  Vector<Scalar>& data() { return data_; }
  const Vector<Scalar>& data() const { return data_; }

  bool has_grad() const { return grad_.has_value(); }
  void enable_grad() {
    if (!grad_) grad_ = Vector<Scalar>::Zero(data_.size());
  }
  void zero_grad() {
    if (grad_) grad_->setZero();
  }
  Vector<Scalar>& grad() {
    if (!grad_) throw Error("tensor " + shape_string(shape_) + " has no gradient buffer");
    return *grad_;
  }
  const Vector<Scalar>& grad() const {
    if (!grad_) throw Error("tensor " + shape_string(shape_) + " has no gradient buffer");
    return *grad_;
  }

  /// View as [dim(0) x numel/dim(0)], row-major.
  MatrixMap matrix() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), rows(), cols()); }
  MatrixMap grad_matrix() { return MatrixMap(grad().data(), rows(), cols()); }

 private:
  static Index count(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape));
      n *= d;
    }
    return n;
  }
  Index rows() const { return shape_.empty() ? 1 : shape_.front(); }
  Index cols() const { return rows() == 0 ? 0 : numel() / rows(); }

  std::vector<Index> shape_;
  Vector<Scalar> data_;
  std::optional<Vector<Scalar>> grad_;
};

using TensorD = Tensor<double>;

/// Visitor signature used to enumerate named parameters in a fixed order.
template <typename Scalar>
using ParameterVisitor = std::function<void(const std::string&, Tensor<Scalar>&)>;

/// Creates a parameter with a zeroed gradient buffer.
template <typename Scalar>
Tensor<Scalar> make_parameter(std::vector<Index> shape) {
  Tensor<Scalar> t(std::move(shape));
  t.enable_grad();
  return t;
}

/// Glorot-uniform fill: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar, typename Rng>
void glorot_uniform(Tensor<Scalar>& t, Index fan_in, Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Index i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
}

}  // namespace ser::nn
