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

#include "ser/nn/layers.hpp"

namespace ser::nn {

struct AttentionConfig {
  Index model_dim = 64;
  Index num_heads = 4;

  Index head_dim() const { return model_dim / num_heads; }

  void validate() const {
    if (model_dim <= 0 || num_heads <= 0) {
      throw ConfigError("attention: model_dim and num_heads must be positive");
    }
    if (model_dim % num_heads != 0) {
      throw ConfigError("attention: model_dim " + std::to_string(model_dim) +
                        " not divisible by num_heads " + std::to_string(num_heads));
    }
  }
};

/// Scaled dot-product multi-head self-attention with learned Q/K/V/output
/// projections; scores are scaled by 1/sqrt(head_dim).
template <typename Scalar>
class MultiHeadSelfAttention {
 public:
  struct Cache {
    typename Linear<Scalar>::Cache q, k, v, out;
    Matrix<Scalar> queries, keys, values;
    std::vector<Matrix<Scalar>> weights;  ///< per head, [n x n], row-stochastic
  };

  MultiHeadSelfAttention() = default;
  explicit MultiHeadSelfAttention(AttentionConfig cfg)
      : query(cfg.model_dim, cfg.model_dim),
        key(cfg.model_dim, cfg.model_dim),
        value(cfg.model_dim, cfg.model_dim),
        output(cfg.model_dim, cfg.model_dim),
        cfg_(cfg) {
    cfg_.validate();
  }

  const AttentionConfig& config() const { return cfg_; }

  template <typename Rng>
  void init(Rng& rng) {
    query.init(rng);
    key.init(rng);
    value.init(rng);
    output.init(rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    if (x.cols() != cfg_.model_dim) {
      throw ShapeError("attention: token width " + std::to_string(x.cols()) +
                       ", expected model_dim " + std::to_string(cfg_.model_dim));
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c.queries = query.forward(x, &c.q);
    c.keys = key.forward(x, &c.k);
    c.values = value.forward(x, &c.v);

    const Index hd = cfg_.head_dim();
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));
    Matrix<Scalar> mixed(x.rows(), cfg_.model_dim);
    c.weights.resize(static_cast<std::size_t>(cfg_.num_heads));
    for (Index h = 0; h < cfg_.num_heads; ++h) {
      const auto qh = c.queries.middleCols(h * hd, hd);
      const auto kh = c.keys.middleCols(h * hd, hd);
      const auto vh = c.values.middleCols(h * hd, hd);
      Matrix<Scalar> scores = (qh * kh.transpose()) * scale;
      auto& a = c.weights[static_cast<std::size_t>(h)];
      a = softmax_rows(scores);
      mixed.middleCols(h * hd, hd).noalias() = a * vh;
    }
    return output.forward(mixed, &c.out);
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy) {
    const Matrix<Scalar> dmixed = output.backward(c.out, dy);
    const Index n = dmixed.rows();
    const Index hd = cfg_.head_dim();
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));
    Matrix<Scalar> dq(n, cfg_.model_dim), dk(n, cfg_.model_dim), dv(n, cfg_.model_dim);
    for (Index h = 0; h < cfg_.num_heads; ++h) {
      const auto& a = c.weights[static_cast<std::size_t>(h)];
      const auto qh = c.queries.middleCols(h * hd, hd);
      const auto kh = c.keys.middleCols(h * hd, hd);
      const auto vh = c.values.middleCols(h * hd, hd);
      const Matrix<Scalar> dout = dmixed.middleCols(h * hd, hd);
      const Matrix<Scalar> da = dout * vh.transpose();
      dv.middleCols(h * hd, hd).noalias() = a.transpose() * dout;
      const Matrix<Scalar> ds = softmax_rows_backward(a, da) * scale;
      dq.middleCols(h * hd, hd).noalias() = ds * kh;
      dk.middleCols(h * hd, hd).noalias() = ds.transpose() * qh;
    }
    Matrix<Scalar> dx = query.backward(c.q, dq);
    dx += key.backward(c.k, dk);
    dx += value.backward(c.v, dv);
    return dx;
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    query.visit(prefix + ".query", f);
    key.visit(prefix + ".key", f);
    value.visit(prefix + ".value", f);
    output.visit(prefix + ".output", f);
  }

  Linear<Scalar> query, key, value, output;

 private:
  AttentionConfig cfg_;
};

/// Free-function form: self-attention of `x` under the projections of `layer`.
template <typename Scalar>
Matrix<Scalar> multi_head_self_attention(const Matrix<Scalar>& x,
                                         const MultiHeadSelfAttention<Scalar>& layer,
                                         typename MultiHeadSelfAttention<Scalar>::Cache* cache = nullptr) {
  return layer.forward(x, cache);
}

/// Pre-norm transformer block: x + MHSA(LN(x)), then + MLP(LN(.)).
template <typename Scalar>
class TransformerEncoderLayer {
 public:
  struct Cache {
    typename LayerNorm<Scalar>::Cache norm1, norm2;
    typename MultiHeadSelfAttention<Scalar>::Cache attn;
    typename Mlp<Scalar>::Cache mlp;
  };

  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(AttentionConfig cfg, Index mlp_ratio)
      : norm1(cfg.model_dim),
        attention(cfg),
        norm2(cfg.model_dim),
        mlp(cfg.model_dim, cfg.model_dim * mlp_ratio, cfg.model_dim) {}

  template <typename Rng>
  void init(Rng& rng) {
    attention.init(rng);
    mlp.init(rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* c = nullptr) const {
    Matrix<Scalar> h = x + attention.forward(norm1.forward(x, c ? &c->norm1 : nullptr),
                                             c ? &c->attn : nullptr);
    h += mlp.forward(norm2.forward(h, c ? &c->norm2 : nullptr), c ? &c->mlp : nullptr);
    return h;
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy) {
    Matrix<Scalar> dh = dy + norm2.backward(c.norm2, mlp.backward(c.mlp, dy));
    return dh + norm1.backward(c.norm1, attention.backward(c.attn, dh));
  }

  void visit(const std::string& prefix, const ParameterVisitor<Scalar>& f) {
    norm1.visit(prefix + ".norm1", f);
    attention.visit(prefix + ".attn", f);
    norm2.visit(prefix + ".norm2", f);
    mlp.visit(prefix + ".mlp", f);
  }

  LayerNorm<Scalar> norm1;
  MultiHeadSelfAttention<Scalar> attention;
  LayerNorm<Scalar> norm2;
  Mlp<Scalar> mlp;
};

}  // namespace ser::nn
