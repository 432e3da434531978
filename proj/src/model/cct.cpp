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

#include "ser/model/cct.hpp"

#include <random>

namespace ser::model {

std::string to_string(FusionVariant v) {
  switch (v) {
    case FusionVariant::None: return "cct";
    case FusionVariant::Downstream: return "speaker_cct";
    case FusionVariant::EndToEnd: return "speaker_cct_end_to_end";
    case FusionVariant::EndToEndToken: return "speaker_cct_end_to_end_token";
  }
  return "?";
}

FusionVariant parse_fusion_variant(std::string_view name) {
  if (name == "cct" || name == "none") return FusionVariant::None;
  if (name == "speaker_cct" || name == "downstream") return FusionVariant::Downstream;
  if (name == "speaker_cct_end_to_end" || name == "end_to_end") return FusionVariant::EndToEnd;
  if (name == "speaker_cct_end_to_end_token" || name == "end_to_end_token" || name == "speaker_token") {
    return FusionVariant::EndToEndToken;
  }
  throw ConfigError("unknown fusion variant '" + std::string(name) + "'");
}

std::string to_string(PositionalEmbedding p) {
  return p == PositionalEmbedding::Learned ? "learned" : "none";
}

PositionalEmbedding parse_positional_embedding(std::string_view name) {
  if (name == "learned") return PositionalEmbedding::Learned;
  if (name == "none") return PositionalEmbedding::None;
  throw ConfigError("unknown positional embedding '" + std::string(name) + "'");
}

CctConfig CctConfig::paper_scale(int num_classes) {
  CctConfig c;
  c.encoder_layers = 14;
  c.conv_layers = 2;
  c.conv_kernel = 7;
  c.tokenizer_channels = 64;
  c.model_dim = 384;
  c.num_heads = 6;
  c.num_classes = num_classes;
  c.input_height = 224;
  c.input_width = 224;
  return c;
}

void CctConfig::validate() const {
  if (encoder_layers < 0 || conv_layers < 1 || conv_kernel < 1 || tokenizer_channels < 1 ||
      model_dim < 1 || num_heads < 1 || mlp_ratio < 1 || num_classes < 2 || input_channels < 1) {
    throw ConfigError("cct: layer counts and sizes must be positive (num_classes >= 2)");
  }
  nn::AttentionConfig{model_dim, num_heads}.validate();
  token_grid();
}

std::pair<Index, Index> CctConfig::token_grid() const {
  Index h = input_height, w = input_width;
  for (int s = 0; s < conv_layers; ++s) {
    h = nn::window_output_size(h, conv_kernel, conv_stride(), conv_padding());
    w = nn::window_output_size(w, conv_kernel, conv_stride(), conv_padding());
    h = nn::window_output_size(h, 3, 2, 1);
    w = nn::window_output_size(w, 3, 2, 1);
  }
  return {h, w};
}

Index CctConfig::token_count() const {
  const auto [h, w] = token_grid();
  return h * w;
}

CctModel::CctModel(CctConfig cfg, FusionVariant variant, std::uint64_t seed)
    : cfg_(cfg), variant_(variant) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const Index d = cfg_.model_dim;
  const nn::AttentionConfig attn{d, cfg_.num_heads};

  Index in = cfg_.input_channels;
  for (int s = 0; s < cfg_.conv_layers; ++s) {
    const Index out = (s + 1 == cfg_.conv_layers) ? d : cfg_.tokenizer_channels;
    convs.emplace_back(in, out, cfg_.conv_kernel, cfg_.conv_stride(), cfg_.conv_padding());
    convs.back().init(rng);
    in = out;
  }
  if (cfg_.positional_embedding == PositionalEmbedding::Learned) {
    positional = nn::make_parameter<double>({cfg_.token_count(), d});
    nn::glorot_uniform(positional, cfg_.token_count(), d, rng);
    if (variant_ == FusionVariant::EndToEnd || variant_ == FusionVariant::EndToEndToken) {
      speaker_positional = nn::make_parameter<double>({1, d});
      nn::glorot_uniform(speaker_positional, 1, d, rng);
    }
  }
  for (int l = 0; l < cfg_.encoder_layers; ++l) {
    layers.emplace_back(attn, cfg_.mlp_ratio);
    layers.back().init(rng);
  }
  final_norm = nn::LayerNorm<double>(d);
  if (variant_ != FusionVariant::EndToEndToken) {
    sequence_pool = nn::SequencePool<double>(d);
    sequence_pool.init(rng);
  }
  if (variant_ == FusionVariant::Downstream) {
    fusion = nn::MultiHeadSelfAttention<double>(attn);
    fusion.init(rng);
    fusion_head = nn::Mlp<double>(2 * d, d, cfg_.num_classes);
    fusion_head.init(rng);
  } else {
    classifier = nn::Linear<double>(d, cfg_.num_classes);
    classifier.init(rng);
  }
}

Index CctModel::encoder_length() const {
  const bool extra = variant_ == FusionVariant::EndToEnd || variant_ == FusionVariant::EndToEndToken;
  return cfg_.token_count() + (extra ? 1 : 0);
}

Mat CctModel::tokenize(const nn::TensorD& image, TokenizerCache* cache) const {
  if (image.rank() != 3 || image.dim(0) != cfg_.input_channels || image.dim(1) != cfg_.input_height ||
      image.dim(2) != cfg_.input_width) {
    throw ShapeError("tokenizer: image " + nn::shape_string(image.shape()) + ", expected [" +
                     std::to_string(cfg_.input_channels) + " x " + std::to_string(cfg_.input_height) +
                     " x " + std::to_string(cfg_.input_width) + "]");
  }
  auto map = nn::FeatureMap<double>::from_tensor(image);
  if (cache) cache->stages.resize(convs.size());
  for (std::size_t s = 0; s < convs.size(); ++s) {
    auto* st = cache ? &cache->stages[s] : nullptr;
    auto conv = convs[s].forward(map, st ? &st->conv : nullptr);
    if (st) {
      st->conv_height = conv.height;
      st->conv_width = conv.width;
    }
    conv.data = nn::Relu<double>::forward(conv.data, st ? &st->relu : nullptr);
    map = pool.forward(conv, st ? &st->pool : nullptr);
  }
  return map.data.transpose();
}

Mat CctModel::tokenize_backward(const TokenizerCache& cache, const Mat& dtokens) {
  Mat grad = dtokens.transpose();
  for (std::size_t s = convs.size(); s-- > 0;) {
    const auto& st = cache.stages[s];
    grad = pool.backward(st.pool, grad);
    grad = nn::Relu<double>::backward(st.relu, grad);
    grad = convs[s].backward(st.conv, grad, s > 0);
  }
  return grad;
}

void CctModel::check_speaker(const Vec* speaker) const {
  if (!takes_speaker()) {
    if (speaker) throw ShapeError("the plain CCT variant accepts no speaker embedding");
    return;
  }
  if (!speaker) throw ShapeError(to_string(variant_) + " requires a speaker embedding");
  if (speaker->size() != cfg_.model_dim) {
    throw ShapeError("speaker embedding has dim " + std::to_string(speaker->size()) +
                     ", expected model_dim " + std::to_string(cfg_.model_dim));
  }
}

RowVec CctModel::forward_one(const nn::TensorD& image, const Vec* speaker, ForwardCache* cache) const {
  check_speaker(speaker);
  return forward_tokens(tokenize(image, cache ? &cache->tokenizer : nullptr), speaker, cache);
}

RowVec CctModel::forward_tokens(Mat x, const Vec* speaker, ForwardCache* cache) const {
  check_speaker(speaker);
  const Index n = x.rows();
  if (n != cfg_.token_count() || x.cols() != cfg_.model_dim) {
    throw ShapeError("forward_tokens: expected " + std::to_string(cfg_.token_count()) + "x" +
                     std::to_string(cfg_.model_dim) + " tokens, got " + std::to_string(n) + "x" +
                     std::to_string(x.cols()));
  }
  if (cache) cache->patch_tokens = n;
  if (cfg_.positional_embedding == PositionalEmbedding::Learned) x += positional.matrix();

  const bool token_variant = variant_ == FusionVariant::EndToEnd || variant_ == FusionVariant::EndToEndToken;
  if (token_variant) {
    x.conservativeResize(n + 1, Eigen::NoChange);
    x.row(n) = speaker->transpose();
    if (cfg_.positional_embedding == PositionalEmbedding::Learned) x.row(n) += speaker_positional.matrix();
  }

  if (cache) cache->layers.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = layers[l].forward(x, cache ? &cache->layers[l] : nullptr);
  }
  x = final_norm.forward(x, cache ? &cache->final_norm : nullptr);

  switch (variant_) {
    case FusionVariant::None:
    case FusionVariant::EndToEnd: {
      const Mat pooled = sequence_pool.forward(x, cache ? &cache->pool : nullptr);
      return classifier.forward(pooled, cache ? &cache->classifier : nullptr);
    }
    case FusionVariant::EndToEndToken:
      return classifier.forward(x.bottomRows(1), cache ? &cache->classifier : nullptr);
    case FusionVariant::Downstream: {
      const Mat pooled = sequence_pool.forward(x, cache ? &cache->pool : nullptr);
      Mat pair(2, cfg_.model_dim);
      pair.row(0) = pooled;
      pair.row(1) = speaker->transpose();
      const Mat mixed = fusion.forward(pair, cache ? &cache->fusion : nullptr);
      Mat flat(1, 2 * cfg_.model_dim);
      flat << mixed.row(0), mixed.row(1);
      return fusion_head.forward(flat, cache ? &cache->fusion_head : nullptr);
    }
  }
  throw Error("unreachable fusion variant");
}

void CctModel::backward_one(const ForwardCache& cache, const RowVec& dlogits) {
  const Index d = cfg_.model_dim;
  const Index n = cache.patch_tokens;
  const bool token_variant = variant_ == FusionVariant::EndToEnd || variant_ == FusionVariant::EndToEndToken;
  const Index len = n + (token_variant ? 1 : 0);
  const Mat dy = dlogits;

  Mat dx;
  switch (variant_) {
    case FusionVariant::None:
    case FusionVariant::EndToEnd:
      dx = sequence_pool.backward(cache.pool, classifier.backward(cache.classifier, dy));
      break;
    case FusionVariant::EndToEndToken:
      dx = Mat::Zero(len, d);
      dx.bottomRows(1) = classifier.backward(cache.classifier, dy);
      break;
    case FusionVariant::Downstream: {
      const Mat dflat = fusion_head.backward(cache.fusion_head, dy);
      Mat dmixed(2, d);
      dmixed.row(0) = dflat.leftCols(d);
      dmixed.row(1) = dflat.rightCols(d);
      const Mat dpair = fusion.backward(cache.fusion, dmixed);
      dx = sequence_pool.backward(cache.pool, dpair.topRows(1));
      break;
    }
  }
  dx = final_norm.backward(cache.final_norm, dx);
  for (std::size_t l = layers.size(); l-- > 0;) dx = layers[l].backward(cache.layers[l], dx);

  if (cfg_.positional_embedding == PositionalEmbedding::Learned) {
    positional.grad_matrix() += dx.topRows(n);
    if (token_variant) speaker_positional.grad_matrix() += dx.bottomRows(1);
  }
  if (!cache.tokenizer.stages.empty()) tokenize_backward(cache.tokenizer, dx.topRows(n));
}

ModelOutput CctModel::forward(std::span<const nn::TensorD> images, const Mat* speakers) const {
  if (speakers && speakers->rows() != static_cast<Index>(images.size())) {
    throw ShapeError("forward: " + std::to_string(speakers->rows()) + " speaker rows for " +
                     std::to_string(images.size()) + " images");
  }
  if (!speakers && takes_speaker()) throw ShapeError(to_string(variant_) + " requires speaker embeddings");
  ModelOutput out;
  out.logits.resize(static_cast<Index>(images.size()), cfg_.num_classes);
  out.token_count = cfg_.token_count();
  out.encoder_length = encoder_length();
  for (std::size_t i = 0; i < images.size(); ++i) {
    ForwardCache cache;
    Vec spk;
    if (speakers) spk = speakers->row(static_cast<Index>(i)).transpose();
    out.logits.row(static_cast<Index>(i)) = forward_one(images[i], speakers ? &spk : nullptr, &cache);
    if (variant_ != FusionVariant::EndToEndToken) out.pool_weights.push_back(cache.pool.weights);
    if (variant_ == FusionVariant::Downstream) out.fusion_attention.push_back(cache.fusion.weights);
  }
  if (!out.logits.allFinite()) throw NumericError("forward: non-finite logits");
  return out;
}

void CctModel::visit(const nn::ParameterVisitor<double>& f) {
  for (std::size_t s = 0; s < convs.size(); ++s) convs[s].visit("tokenizer.conv" + std::to_string(s), f);
  if (cfg_.positional_embedding == PositionalEmbedding::Learned) {
    f("positional", positional);
    if (variant_ == FusionVariant::EndToEnd || variant_ == FusionVariant::EndToEndToken) {
      f("speaker_positional", speaker_positional);
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) layers[l].visit("encoder.layer" + std::to_string(l), f);
  final_norm.visit("encoder.norm", f);
  if (variant_ != FusionVariant::EndToEndToken) sequence_pool.visit("pool", f);
  if (variant_ == FusionVariant::Downstream) {
    fusion.visit("fusion.attn", f);
    fusion_head.visit("fusion.head", f);
  } else {
    classifier.visit("classifier", f);
  }
}

std::vector<nn::TensorD*> CctModel::parameters() {
  std::vector<nn::TensorD*> out;
  visit([&](const std::string&, nn::TensorD& t) { out.push_back(&t); });
  return out;
}

nn::NamedParameters<double> CctModel::named_parameters() {
  nn::NamedParameters<double> out;
  visit([&](const std::string& name, nn::TensorD& t) { out.emplace_back(name, &t); });
  return out;
}

void CctModel::zero_grad() {
  visit([](const std::string&, nn::TensorD& t) { t.zero_grad(); });
}

void CctModel::store(nn::Checkpoint& ck, const std::string& prefix) const {
  // visit() is non-const only because it hands out mutable references.
  const_cast<CctModel*>(this)->visit(
      [&](const std::string& name, nn::TensorD& t) { ck.add(prefix + "/" + name, t); });
}

void CctModel::restore(const nn::Checkpoint& ck, const std::string& prefix) {
  visit([&](const std::string& name, nn::TensorD& t) {
    const auto& e = ck.at(prefix + "/" + name);
    if (e.shape != t.shape()) {
      throw ShapeError("checkpoint entry '" + e.path + "' has shape " + nn::shape_string(e.shape) +
                       ", model expects " + nn::shape_string(t.shape()));
    }
    t.data() = e.values;
  });
}

std::vector<Mat> conv_tokenizer(const CctModel& model, std::span<const nn::TensorD> images) {
  std::vector<Mat> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(model.tokenize(img));
  return out;
}

namespace {
ModelOutput forward_checked(const CctModel& model, FusionVariant expected,
                            std::span<const nn::TensorD> images, const Mat* speakers) {
  if (model.variant() != expected) {
    throw ConfigError("model variant is " + to_string(model.variant()) + ", called as " + to_string(expected));
  }
  return model.forward(images, speakers);
}
}  // namespace

ModelOutput forward_cct(const CctModel& model, std::span<const nn::TensorD> images) {
  return forward_checked(model, FusionVariant::None, images, nullptr);
}

ModelOutput forward_downstream(const CctModel& model, std::span<const nn::TensorD> images,
                               const Mat& speakers) {
  return forward_checked(model, FusionVariant::Downstream, images, &speakers);
}

ModelOutput forward_end_to_end(const CctModel& model, std::span<const nn::TensorD> images,
                               const Mat& speakers) {
  return forward_checked(model, FusionVariant::EndToEnd, images, &speakers);
}

ModelOutput forward_speaker_token(const CctModel& model, std::span<const nn::TensorD> images,
                                  const Mat& speakers) {
  return forward_checked(model, FusionVariant::EndToEndToken, images, &speakers);
}

}  // namespace ser::model
