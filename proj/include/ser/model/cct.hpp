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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ser/nn/attention.hpp"
#include "ser/nn/checkpoint.hpp"
#include "ser/nn/conv.hpp"
#include "ser/nn/gradcheck.hpp"
#include "ser/nn/layers.hpp"

namespace ser::model {

using nn::Index;
using Mat = nn::Matrix<double>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

/// How the speaker embedding enters the network.
enum class FusionVariant {
  None,           ///< plain CCT, no speaker input
  Downstream,     ///< 2-token attention over {pooled CCT feature, speaker} + MLP head
  EndToEnd,       ///< speaker appended as an encoder token, pooled with the rest
  EndToEndToken,  ///< speaker token output read directly by the classifier
};

enum class PositionalEmbedding { Learned, None };

std::string to_string(FusionVariant v);
FusionVariant parse_fusion_variant(std::string_view name);
std::string to_string(PositionalEmbedding p);
PositionalEmbedding parse_positional_embedding(std::string_view name);

/// Compact convolutional transformer hyperparameters. Defaults are desk
/// scale; `paper_scale()` gives the 14-layer, 7x7 two-stage, 224x224 variant.
struct CctConfig {
  int encoder_layers = 2;
  int conv_layers = 2;
  int conv_kernel = 3;
  int tokenizer_channels = 16;  ///< width of the intermediate conv stages
  int model_dim = 64;
  int num_heads = 4;
  int mlp_ratio = 2;
  int num_classes = 4;
  PositionalEmbedding positional_embedding = PositionalEmbedding::Learned;
  int input_channels = 3;
  int input_height = 32;
  int input_width = 32;

  static CctConfig paper_scale(int num_classes = 4);

  void validate() const;
  int conv_stride() const { return std::max(1, conv_kernel / 2 - 1); }
  int conv_padding() const { return std::max(1, conv_kernel / 2); }
  /// Spatial size of the tokenizer output grid.
  std::pair<Index, Index> token_grid() const;
  Index token_count() const;
};

struct TokenizerCache {
  struct Stage {
    nn::Conv2d<double>::Cache conv;
    nn::Relu<double>::Cache relu;
    nn::MaxPool2d<double>::Cache pool;
    Index conv_height = 0, conv_width = 0;
  };
  std::vector<Stage> stages;
};

/// Per-sample activations kept for the backward pass and for diagnostics.
struct ForwardCache {
  TokenizerCache tokenizer;
  Index patch_tokens = 0;
  std::vector<nn::TransformerEncoderLayer<double>::Cache> layers;
  nn::LayerNorm<double>::Cache final_norm;
  nn::SequencePool<double>::Cache pool;
  nn::MultiHeadSelfAttention<double>::Cache fusion;
  nn::Mlp<double>::Cache fusion_head;
  nn::Linear<double>::Cache classifier;
};

struct ModelOutput {
  Mat logits;                          ///< [batch x num_classes]
  Index token_count = 0;               ///< tokens produced by the tokenizer
  Index encoder_length = 0;            ///< sequence length seen by the encoder
  std::vector<Vec> pool_weights;       ///< per sample; empty for EndToEndToken
  std::vector<std::vector<Mat>> fusion_attention;  ///< per sample, per head (Downstream)
};

class CctModel {
 public:
  CctModel(CctConfig cfg, FusionVariant variant, std::uint64_t seed);

  const CctConfig& config() const { return cfg_; }
  FusionVariant variant() const { return variant_; }
  bool takes_speaker() const { return variant_ != FusionVariant::None; }
  Index encoder_length() const;

  /// Convolutional tokenizer: [C x H x W] image -> [n_tokens x model_dim].
  Mat tokenize(const nn::TensorD& image, TokenizerCache* cache = nullptr) const;

  /// Logits for one image; `speaker` is required iff the variant takes one.
  RowVec forward_one(const nn::TensorD& image, const Vec* speaker, ForwardCache* cache = nullptr) const;
  /// Encoder and head applied to tokenizer output [n_tokens x model_dim].
  RowVec forward_tokens(Mat tokens, const Vec* speaker, ForwardCache* cache = nullptr) const;
  /// Accumulates parameter gradients for one sample given dL/dlogits.
  void backward_one(const ForwardCache& cache, const RowVec& dlogits);

  /// Batched forward. `speakers` is [batch x model_dim] or null for `None`.
  ModelOutput forward(std::span<const nn::TensorD> images, const Mat* speakers) const;

  void visit(const nn::ParameterVisitor<double>& f);
  std::vector<nn::TensorD*> parameters();
  nn::NamedParameters<double> named_parameters();
  void zero_grad();

  void store(nn::Checkpoint& ck, const std::string& prefix = "model") const;
  void restore(const nn::Checkpoint& ck, const std::string& prefix = "model");

  // Layers are public so tests can hand-craft degenerate configurations.
  std::vector<nn::Conv2d<double>> convs;
  nn::MaxPool2d<double> pool{3, 2, 1};
  nn::TensorD positional;          ///< [n_tokens x model_dim], Learned only
  nn::TensorD speaker_positional;  ///< [1 x model_dim], Learned end-to-end only
  std::vector<nn::TransformerEncoderLayer<double>> layers;
  nn::LayerNorm<double> final_norm;
  nn::SequencePool<double> sequence_pool;
  nn::MultiHeadSelfAttention<double> fusion;  ///< Downstream only
  nn::Mlp<double> fusion_head;                ///< Downstream only
  nn::Linear<double> classifier;              ///< all but Downstream

 private:
  Mat tokenize_backward(const TokenizerCache& cache, const Mat& dtokens);
  void check_speaker(const Vec* speaker) const;

  CctConfig cfg_;
  FusionVariant variant_;
};

/// Tokenizer as a free function over a batch of images.
std::vector<Mat> conv_tokenizer(const CctModel& model, std::span<const nn::TensorD> images);

ModelOutput forward_cct(const CctModel& model, std::span<const nn::TensorD> images);
ModelOutput forward_downstream(const CctModel& model, std::span<const nn::TensorD> images,
                               const Mat& speakers);
ModelOutput forward_end_to_end(const CctModel& model, std::span<const nn::TensorD> images,
                               const Mat& speakers);
ModelOutput forward_speaker_token(const CctModel& model, std::span<const nn::TensorD> images,
                                  const Mat& speakers);

}  // namespace ser::model
