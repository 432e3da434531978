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

#include "ser/nn/ops.hpp"

namespace ser::nn {

/// y = x W + b applied to every row of x. W is stored [in x out].
template <typename Scalar>
class Linear {
 public:
  struct Cache {
    Matrix<Scalar> input;
  };

  Linear() = default;
  Linear(Index in, Index out)
      : weight(make_parameter<Scalar>({in, out})), bias(make_parameter<Scalar>({out})) {}

  Index in_features() const { return weight.dim(0); }
  Index out_features() const { return weight.dim(1); }

  template <typename Rng>
  void init(Rng& rng) {
    glorot_uniform(weight, in_features(), out_features(), rng);
    bias.data().setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    if (x.cols() != in_features()) {
      throw ShapeError("linear: input width " + std::to_string(x.cols()) + ", expected " +
                       std::to_string(in_features()));
    }
    if (cache) cache->input = x;
    Matrix<Scalar> y = x * weight.matrix();
    y.rowwise() += bias.data().transpose();
    return y;
  }

  Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) {
    weight.grad_matrix().noalias() += cache.input.transpose() * dy;
    bias.grad().noalias() += dy.colwise().sum().transpose();
    return dy * weight.matrix().transpose();
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

/// Per-row layer normalization with learned gain and shift.
template <typename Scalar>
class LayerNorm {
 public:
  struct Cache {
    Matrix<Scalar> normalized;
    Vector<Scalar> inv_std;
  };

  LayerNorm() = default;
  explicit LayerNorm(Index dim, Scalar eps = Scalar(1e-5))
      : gamma(make_parameter<Scalar>({dim})), beta(make_parameter<Scalar>({dim})), eps_(eps) {
    gamma.data().setOnes();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    if (x.cols() != gamma.numel()) throw ShapeError("layer_norm: width mismatch");
    const Index d = x.cols();
    Matrix<Scalar> xhat(x.rows(), d);
    Vector<Scalar> inv_std(x.rows());
    for (Index r = 0; r < x.rows(); ++r) {
      const Scalar mean = x.row(r).mean();
      const Scalar var = (x.row(r).array() - mean).square().sum() / static_cast<Scalar>(d);
      inv_std[r] = Scalar(1) / std::sqrt(var + eps_);
      xhat.row(r) = (x.row(r).array() - mean) * inv_std[r];
    }
    Matrix<Scalar> y = (xhat.array().rowwise() * gamma.data().transpose().array()).matrix();
    y.rowwise() += beta.data().transpose();
    if (cache) {
      cache->normalized = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) {
    const auto& xhat = cache.normalized;
    const Index d = xhat.cols();
    gamma.grad().noalias() += (dy.array() * xhat.array()).colwise().sum().matrix().transpose();
    beta.grad().noalias() += dy.colwise().sum().transpose();
    const Matrix<Scalar> g = (dy.array().rowwise() * gamma.data().transpose().array()).matrix();
    Matrix<Scalar> dx(xhat.rows(), d);
    for (Index r = 0; r < xhat.rows(); ++r) {
      const Scalar mean_g = g.row(r).mean();
      const Scalar mean_gx = g.row(r).dot(xhat.row(r)) / static_cast<Scalar>(d);
      dx.row(r) = cache.inv_std[r] *
                  (g.row(r).array() - mean_g - xhat.row(r).array() * mean_gx).matrix();
    }
    return dx;
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
  }

  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;

 private:
  Scalar eps_ = Scalar(1e-5);
};

/// Elementwise GELU with cached pre-activation.
template <typename Scalar>
struct Gelu {
  struct Cache {
    Matrix<Scalar> input;
  };
  static Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) {
    if (cache) cache->input = x;
    return x.unaryExpr([](Scalar v) { return gelu(v); });
  }
  static Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) {
    return (dy.array() *
            cache.input.unaryExpr([](Scalar v) { return gelu_derivative(v); }).array())
        .matrix();
  }
};

/// Two-layer perceptron: Linear -> GELU -> Linear.
template <typename Scalar>
class Mlp {
 public:
  struct Cache {
    typename Linear<Scalar>::Cache fc1, fc2;
    typename Gelu<Scalar>::Cache act;
  };

  Mlp() = default;
  Mlp(Index in, Index hidden, Index out) : fc1(in, hidden), fc2(hidden, out) {}

  template <typename Rng>
  void init(Rng& rng) {
    fc1.init(rng);
    fc2.init(rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* c = nullptr) const {
    auto h = fc1.forward(x, c ? &c->fc1 : nullptr);
    auto a = Gelu<Scalar>::forward(h, c ? &c->act : nullptr);
    return fc2.forward(a, c ? &c->fc2 : nullptr);
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy) {
    auto da = fc2.backward(c.fc2, dy);
    auto dh = Gelu<Scalar>::backward(c.act, da);
    return fc1.backward(c.fc1, dh);
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    fc1.visit(prefix + ".fc1", f);
    fc2.visit(prefix + ".fc2", f);
  }

  Linear<Scalar> fc1;
  Linear<Scalar> fc2;
};

/// Attention-weighted average of tokens: w = softmax(X g + b), out = w^T X.
template <typename Scalar>
class SequencePool {
 public:
  struct Cache {
    Matrix<Scalar> tokens;
    Vector<Scalar> weights;
  };

  SequencePool() = default;
  explicit SequencePool(Index dim) : score(dim, 1) {}

  template <typename Rng>
  void init(Rng& rng) {
    score.init(rng);
  }

  /// Returns the pooled row vector [1 x dim].
  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    const Matrix<Scalar> s = score.forward(x);  // [n x 1]
    const Matrix<Scalar> w = softmax_rows(Matrix<Scalar>(s.transpose()));
    Matrix<Scalar> pooled = w * x;
    if (cache) {
      cache->tokens = x;
      cache->weights = w.row(0).transpose();
    }
    return pooled;
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dpooled) {
    const auto& x = c.tokens;
    const auto& w = c.weights;
    Matrix<Scalar> dx = w * dpooled;  // [n x d]
    const Vector<Scalar> dw = x * dpooled.transpose();
    const Vector<Scalar> ds = (w.array() * (dw.array() - w.dot(dw))).matrix();
    score.weight.grad().noalias() += x.transpose() * ds;
    score.bias.grad()[0] += ds.sum();
    dx.noalias() += ds * score.weight.data().transpose();
    return dx;
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    score.visit(prefix + ".score", f);
  }

  Linear<Scalar> score;
};

}  // namespace ser::nn
