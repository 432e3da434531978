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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ser/corpus/corpus.hpp"
#include "ser/dsp/spectrogram.hpp"
#include "ser/model/cct.hpp"

namespace ser::harness {

using nlohmann::json;

enum class Balancing { None, Undersample, Augment };

std::string to_string(Balancing b);
Balancing parse_balancing(std::string_view name);

/// Everything that determines a training run. Serialised as JSON; unknown
/// keys are rejected so typos surface as configuration errors.
struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 5.0e-5;
  std::uint64_t seed = 0;
  Balancing balancing = Balancing::Undersample;
  corpus::LabelScheme label_scheme = corpus::LabelScheme::four_class();
  model::FusionVariant variant = model::FusionVariant::None;
  model::CctConfig model;
  dsp::SpectrogramConfig spectrogram;
  double clip_seconds = 1.0;
  /// "toy" computes embeddings from audio; anything else is an embedding-store path.
  std::string embeddings = "toy";
  /// Synthetic (augmentation-balanced) samples also get one SpecAugment-style mask.
  bool spec_augment = true;
  /// Stop once a full pass over the training split reaches this accuracy.
  std::optional<double> target_train_accuracy;
  /// Validation frequency in epochs (0 disables per-epoch validation).
  int eval_every = 1;

  void validate() const;
  json to_json() const;
  static TrainConfig from_json(const json& j);
  /// Canonical serialisation (sorted keys, fixed precision); hashed into checkpoints.
  std::string canonical() const;
};

TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const std::filesystem::path& path, const TrainConfig& cfg);

json to_json(const model::CctConfig& c);
model::CctConfig cct_config_from_json(const json& j, model::CctConfig base = {});
json to_json(const dsp::SpectrogramConfig& c);
dsp::SpectrogramConfig spectrogram_config_from_json(const json& j, dsp::SpectrogramConfig base = {});

}  // namespace ser::harness
