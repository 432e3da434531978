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

/// Multi-channel 2D map. Row c holds channel c flattened row-major, so the
/// layout is identical to a row-major [C x H x W] tensor.
template <typename Scalar>
struct FeatureMap {
  Matrix<Scalar> data;  ///< [channels x height*width]
  Index height = 0;
  Index width = 0;

  Index channels() const { return data.rows(); }

  static FeatureMap from_tensor(const Tensor<Scalar>& t) {
    if (t.rank() != 3) throw ShapeError("feature map needs a rank-3 tensor, got " + shape_string(t.shape()));
    FeatureMap m;
    m.height = t.dim(1);
    m.width = t.dim(2);
    m.data = t.matrix();
    return m;
  }

  Tensor<Scalar> to_tensor() const {
    RowMajorMatrix<Scalar> rm = data;
    return Tensor<Scalar>({channels(), height, width},
                          Eigen::Map<const Vector<Scalar>>(rm.data(), rm.size()));
  }
};

struct ConvGeometry {
  Index in_channels, in_height, in_width;
  Index kernel, stride, padding;
  Index out_height, out_width;

  static ConvGeometry make(Index c, Index h, Index w, Index kernel, Index stride, Index padding) {
    return {c, h, w, kernel, stride, padding,
            window_output_size(h, kernel, stride, padding),
            window_output_size(w, kernel, stride, padding)};
  }
};

/// Unfolds every receptive field into a column: [(C k k) x (H' W')].
template <typename Scalar>
Matrix<Scalar> im2col(const FeatureMap<Scalar>& x, const ConvGeometry& g) {
  const Index k = g.kernel;
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(g.in_channels * k * k, g.out_height * g.out_width);
  for (Index c = 0; c < g.in_channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < g.out_height; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.in_height) continue;
          for (Index ox = 0; ox < g.out_width; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.in_width) continue;
            cols(row, oy * g.out_width + ox) = x.data(c, iy * g.in_width + ix);
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters column gradients back onto the input map.
template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& cols, const ConvGeometry& g) {
  const Index k = g.kernel;
  Matrix<Scalar> dx = Matrix<Scalar>::Zero(g.in_channels, g.in_height * g.in_width);
  for (Index c = 0; c < g.in_channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < g.out_height; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.in_height) continue;
          for (Index ox = 0; ox < g.out_width; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.in_width) continue;
            dx(c, iy * g.in_width + ix) += cols(row, oy * g.out_width + ox);
          }
        }
      }
    }
  }
  return dx;
}

/// 2D cross-correlation. `kernel` is [C_out x C_in x k x k], `bias` is [C_out].
template <typename Scalar>
FeatureMap<Scalar> conv2d(const FeatureMap<Scalar>& x, const Tensor<Scalar>& kernel,
                          const Tensor<Scalar>& bias, Index stride, Index padding) {
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3)) {
    throw ShapeError("conv2d: kernel must be [C_out x C_in x k x k], got " + shape_string(kernel.shape()));
  }
  if (kernel.dim(1) != x.channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(x.channels()) + " channels, kernel expects " +
                     std::to_string(kernel.dim(1)));
  }
  const auto g = ConvGeometry::make(x.channels(), x.height, x.width, kernel.dim(2), stride, padding);
  FeatureMap<Scalar> y;
  y.height = g.out_height;
  y.width = g.out_width;
  y.data.noalias() = kernel.matrix() * im2col(x, g);
  if (bias.numel() != kernel.dim(0)) throw ShapeError("conv2d: bias size mismatch");
  y.data.colwise() += bias.data();
  return y;
}

template <typename Scalar>
class Conv2d {
 public:
  struct Cache {
    Matrix<Scalar> columns;
    ConvGeometry geometry;
  };

  Conv2d() = default;
  Conv2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding)
      : weight(make_parameter<Scalar>({out_channels, in_channels, kernel, kernel})),
        bias(make_parameter<Scalar>({out_channels})),
        stride_(stride),
        padding_(padding) {}

  template <typename Rng>
  void init(Rng& rng) {
    const Index k2 = weight.dim(2) * weight.dim(3);
    glorot_uniform(weight, weight.dim(1) * k2, weight.dim(0) * k2, rng);
    bias.data().setZero();
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Cache* cache = nullptr) const {
    if (!cache) return conv2d(x, weight, bias, stride_, padding_);
    if (x.channels() != weight.dim(1)) throw ShapeError("conv2d: channel mismatch");
    cache->geometry = ConvGeometry::make(x.channels(), x.height, x.width, weight.dim(2), stride_, padding_);
    cache->columns = im2col(x, cache->geometry);
    FeatureMap<Scalar> y;
    y.height = cache->geometry.out_height;
    y.width = cache->geometry.out_width;
    y.data.noalias() = weight.matrix() * cache->columns;
    y.data.colwise() += bias.data();
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx unless `input_grad` is false.
  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy, bool input_grad = true) {
    weight.grad_matrix().noalias() += dy * c.columns.transpose();
    bias.grad().noalias() += dy.rowwise().sum();
    if (!input_grad) return {};
    return col2im(Matrix<Scalar>(weight.matrix().transpose() * dy), c.geometry);
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  Tensor<Scalar> weight;
  Tensor<Scalar> bias;

 private:
  Index stride_ = 1;
  Index padding_ = 0;
};

/// Square max-pooling; padded cells never win.
template <typename Scalar>
class MaxPool2d {
 public:
  struct Cache {
    std::vector<Index> argmax;  ///< flat input index per output cell, per channel
    Index in_height = 0, in_width = 0;
  };

  MaxPool2d(Index kernel = 3, Index stride = 2, Index padding = 1)
      : kernel_(kernel), stride_(stride), padding_(padding) {}

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Cache* cache = nullptr) const {
    const Index oh = window_output_size(x.height, kernel_, stride_, padding_);
    const Index ow = window_output_size(x.width, kernel_, stride_, padding_);
    FeatureMap<Scalar> y;
    y.height = oh;
    y.width = ow;
    y.data.resize(x.channels(), oh * ow);
    if (cache) {
      cache->argmax.assign(static_cast<std::size_t>(x.channels() * oh * ow), 0);
      cache->in_height = x.height;
      cache->in_width = x.width;
    }
    for (Index c = 0; c < x.channels(); ++c) {
      for (Index oy = 0; oy < oh; ++oy) {
        for (Index ox = 0; ox < ow; ++ox) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          Index best_idx = -1;
          for (Index ky = 0; ky < kernel_; ++ky) {
            const Index iy = oy * stride_ - padding_ + ky;
            if (iy < 0 || iy >= x.height) continue;
            for (Index kx = 0; kx < kernel_; ++kx) {
              const Index ix = ox * stride_ - padding_ + kx;
              if (ix < 0 || ix >= x.width) continue;
              const Index idx = iy * x.width + ix;
              if (x.data(c, idx) > best) {
                best = x.data(c, idx);
                best_idx = idx;
              }
            }
          }
          y.data(c, oy * ow + ox) = best;
          if (cache) cache->argmax[static_cast<std::size_t>(c * oh * ow + oy * ow + ox)] = best_idx;
        }
      }
    }
    return y;
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy) const {
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(dy.rows(), c.in_height * c.in_width);
    const Index n_out = dy.cols();
    for (Index ch = 0; ch < dy.rows(); ++ch) {
      for (Index o = 0; o < n_out; ++o) {
        dx(ch, c.argmax[static_cast<std::size_t>(ch * n_out + o)]) += dy(ch, o);
      }
    }
    return dx;
  }

 private:
  Index kernel_, stride_, padding_;
};

template <typename Scalar>
struct Relu {
  struct Cache {
    Matrix<Scalar> mask;
  };
  static Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) {
    if (cache) cache->mask = (x.array() > Scalar(0)).template cast<Scalar>();
    return x.cwiseMax(Scalar(0));
  }
  static Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy) {
    return dy.cwiseProduct(c.mask);
  }
};

}  // namespace ser::nn
