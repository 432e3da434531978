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

#include "ser/model/cct.hpp"
#include "support/gradient_suite.hpp"

namespace ser::model {
namespace {

using testing::random_image;
using testing::random_matrix;
using testing::tiny_config;

Vec random_speaker(const CctConfig& c, std::mt19937_64& rng) { return random_matrix(c.model_dim, 1, rng).col(0); }

TEST(CctConfig, DeskScaleTokenGrid) {
  CctConfig c;
  EXPECT_EQ(c.conv_stride(), 1);
  EXPECT_EQ(c.conv_padding(), 1);
  EXPECT_EQ(c.token_count(), 64);  // 32 -> 32 -> 16 -> 16 -> 8
}

TEST(CctConfig, PaperScaleTokenGrid) {
  const auto c = CctConfig::paper_scale();
  EXPECT_EQ(c.conv_stride(), 2);
  EXPECT_EQ(c.conv_padding(), 3);
  EXPECT_EQ(c.token_count(), 196);  // 224 -> 112 -> 56 -> 28 -> 14
  EXPECT_EQ(c.model_dim, 384);
  EXPECT_EQ(c.encoder_layers, 14);
  EXPECT_NO_THROW(c.validate());
}

TEST(CctConfig, InvalidConfigsAreRejected) {
  CctConfig c;
  c.num_heads = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = CctConfig{};
  c.input_height = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(CctModel(c, FusionVariant::None, 0), Error);
}

TEST(FusionVariant, NamesRoundTrip) {
  for (auto v : testing::kAllVariants) EXPECT_EQ(parse_fusion_variant(to_string(v)), v);
  EXPECT_THROW(parse_fusion_variant("bogus"), ConfigError);
}

TEST(CctModel, EncoderLengthCountsTheSpeakerToken) {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(2);
  const std::vector<nn::TensorD> images = {random_image(cfg, rng)};
  const Mat spk = random_matrix(1, cfg.model_dim, rng);
  for (auto v : testing::kAllVariants) {
    CctModel m(cfg, v, 1);
    const bool token = v == FusionVariant::EndToEnd || v == FusionVariant::EndToEndToken;
    EXPECT_EQ(m.encoder_length(), cfg.token_count() + (token ? 1 : 0)) << to_string(v);
    const auto out = m.forward(images, m.takes_speaker() ? &spk : nullptr);
    EXPECT_EQ(out.token_count, cfg.token_count());
    EXPECT_EQ(out.encoder_length, m.encoder_length());
    EXPECT_EQ(out.logits.rows(), 1);
    EXPECT_EQ(out.logits.cols(), cfg.num_classes);
  }
}

TEST(CctModel, PatchPermutationInvarianceWithoutPositionalEmbedding) {
  const auto cfg = tiny_config(PositionalEmbedding::None);
  std::mt19937_64 rng(3);
  const auto image = random_image(cfg, rng);
  const Vec spk = random_speaker(cfg, rng);
  std::vector<Index> perm(static_cast<std::size_t>(cfg.token_count()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (auto v : testing::kAllVariants) {
    CctModel m(cfg, v, 4);
    const Mat tokens = m.tokenize(image);
    Mat permuted(tokens.rows(), tokens.cols());
    for (Index i = 0; i < tokens.rows(); ++i) permuted.row(i) = tokens.row(perm[static_cast<std::size_t>(i)]);
    const Vec* s = m.takes_speaker() ? &spk : nullptr;
    const RowVec a = m.forward_tokens(tokens, s);
    const RowVec b = m.forward_tokens(permuted, s);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-7) << to_string(v);
    EXPECT_LT((a - m.forward_one(image, s)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CctModel, LearnedPositionsBreakPermutationInvariance) {
  const auto cfg = tiny_config(PositionalEmbedding::Learned);
  std::mt19937_64 rng(5);
  CctModel m(cfg, FusionVariant::EndToEnd, 6);
  const Vec spk = random_speaker(cfg, rng);
  const Mat tokens = m.tokenize(random_image(cfg, rng));
  const Mat reversed = tokens.colwise().reverse();
  EXPECT_GT((m.forward_tokens(tokens, &spk) - m.forward_tokens(reversed, &spk)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(CctModel, SpeakerInputMatters) {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(7);
  const auto image = random_image(cfg, rng);
  const Vec a = random_speaker(cfg, rng), b = random_speaker(cfg, rng);
  for (auto v : {FusionVariant::Downstream, FusionVariant::EndToEnd, FusionVariant::EndToEndToken}) {
    CctModel m(cfg, v, 8);
    EXPECT_GT((m.forward_one(image, &a) - m.forward_one(image, &b)).cwiseAbs().maxCoeff(), 1e-9) << to_string(v);
  }
}

TEST(CctModel, SpeakerArgumentIsChecked) {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(9);
  const auto image = random_image(cfg, rng);
  const Vec spk = random_speaker(cfg, rng);
  const Vec wrong = Vec::Zero(cfg.model_dim + 1);
  EXPECT_THROW(CctModel(cfg, FusionVariant::None, 0).forward_one(image, &spk), ShapeError);
  CctModel e2e(cfg, FusionVariant::EndToEnd, 0);
  EXPECT_THROW(e2e.forward_one(image, nullptr), ShapeError);
  EXPECT_THROW(e2e.forward_one(image, &wrong), ShapeError);
  nn::TensorD bad({3, cfg.input_height + 1, cfg.input_width});
  EXPECT_THROW(e2e.forward_one(bad, &spk), ShapeError);
}

TEST(CctModel, FreeFunctionsCheckTheVariant) {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(10);
  const std::vector<nn::TensorD> images = {random_image(cfg, rng)};
  const Mat spk = random_matrix(1, cfg.model_dim, rng);
  CctModel plain(cfg, FusionVariant::None, 0);
  CctModel token(cfg, FusionVariant::EndToEndToken, 0);
  EXPECT_NO_THROW(forward_cct(plain, images));
  EXPECT_THROW(forward_downstream(plain, images, spk), ConfigError);
  EXPECT_THROW(forward_end_to_end(token, images, spk), ConfigError);
  EXPECT_NO_THROW(forward_speaker_token(token, images, spk));
  EXPECT_EQ(conv_tokenizer(plain, images).front().rows(), cfg.token_count());
}

TEST(CctModel, AttentionDiagnosticsAreDistributions) {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(11);
  const std::vector<nn::TensorD> images = {random_image(cfg, rng), random_image(cfg, rng)};
  const Mat spk = random_matrix(2, cfg.model_dim, rng);
  CctModel down(cfg, FusionVariant::Downstream, 12);
  const auto out = down.forward(images, &spk);
  ASSERT_EQ(out.pool_weights.size(), 2u);
  EXPECT_NEAR(out.pool_weights[0].sum(), 1.0, 1e-12);
  ASSERT_EQ(out.fusion_attention.size(), 2u);
  ASSERT_EQ(out.fusion_attention[0].size(), static_cast<std::size_t>(cfg.num_heads));
  for (const auto& head : out.fusion_attention[0]) {
    EXPECT_EQ(head.rows(), 2);
    EXPECT_NEAR((head.rowwise().sum().array() - 1).abs().maxCoeff(), 0.0, 1e-12);
  }
  CctModel e2e(cfg, FusionVariant::EndToEnd, 12);
  EXPECT_EQ(e2e.forward(images, &spk).pool_weights[0].size(), cfg.token_count() + 1);
  CctModel token(cfg, FusionVariant::EndToEndToken, 12);
  EXPECT_TRUE(token.forward(images, &spk).pool_weights.empty());
}

TEST(CctModel, BatchedForwardMatchesPerSample) {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(13);
  const std::vector<nn::TensorD> images = {random_image(cfg, rng), random_image(cfg, rng), random_image(cfg, rng)};
  const Mat spk = random_matrix(3, cfg.model_dim, rng);
  CctModel m(cfg, FusionVariant::EndToEnd, 14);
  const auto out = m.forward(images, &spk);
  for (Index i = 0; i < 3; ++i) {
    const Vec s = spk.row(i).transpose();
    EXPECT_EQ(out.logits.row(i), m.forward_one(images[static_cast<std::size_t>(i)], &s));
  }
  const Mat short_spk = spk.topRows(2);
  EXPECT_THROW(m.forward(images, &short_spk), ShapeError);
}

TEST(CctModel, SeedDeterminesInitialisation) {
  const auto cfg = tiny_config();
  CctModel a(cfg, FusionVariant::Downstream, 21), b(cfg, FusionVariant::Downstream, 21),
      c(cfg, FusionVariant::Downstream, 22);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->data(), pb[i]->data());
    any_diff |= pa[i]->data() != pc[i]->data();
  }
  EXPECT_TRUE(any_diff);
}

TEST(CctModel, ParameterNamesAreUniqueAndStable) {
  CctModel m(tiny_config(), FusionVariant::Downstream, 0);
  const auto named = m.named_parameters();
  std::set<std::string> names;
  for (const auto& [n, t] : named) EXPECT_TRUE(names.insert(n).second) << n;
  EXPECT_TRUE(names.count("fusion.attn.query.weight") || !names.empty());
}

TEST(CctModel, CheckpointRestoresIdenticalLogits) {
  const auto cfg = tiny_config();
  std::mt19937_64 rng(15);
  const auto image = random_image(cfg, rng);
  const Vec spk = random_speaker(cfg, rng);
  CctModel a(cfg, FusionVariant::EndToEndToken, 16), b(cfg, FusionVariant::EndToEndToken, 17);
  nn::Checkpoint ck;
  a.store(ck);
  b.restore(ck);
  EXPECT_EQ(a.forward_one(image, &spk), b.forward_one(image, &spk));
  CctModel other(cfg, FusionVariant::None, 0);
  EXPECT_THROW(other.restore(ck), Error);
}

TEST(CctModel, ZeroLayerEncoderStillClassifies) {
  auto cfg = tiny_config();
  cfg.encoder_layers = 0;
  std::mt19937_64 rng(18);
  CctModel m(cfg, FusionVariant::None, 0);
  EXPECT_EQ(m.forward_one(random_image(cfg, rng), nullptr).size(), cfg.num_classes);
}

}  // namespace
}  // namespace ser::model
