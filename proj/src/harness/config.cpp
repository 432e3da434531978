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

#include "ser/harness/config.hpp"

#include <fstream>
#include <set>

#include "ser/common/error.hpp"

namespace ser::harness {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

std::string to_string(Balancing b) {
  switch (b) {
    case Balancing::None: return "none";
    case Balancing::Undersample: return "undersample";
    case Balancing::Augment: return "augment";
  }
  return "?";
}

Balancing parse_balancing(std::string_view name) {
  if (name == "none") return Balancing::None;
  if (name == "undersample" || name == "us") return Balancing::Undersample;
  if (name == "augment" || name == "aug") return Balancing::Augment;
  throw ConfigError("unknown balancing mode '" + std::string(name) + "' (none|undersample|augment)");
}

json to_json(const model::CctConfig& c) {
  return {{"encoder_layers", c.encoder_layers}, {"conv_layers", c.conv_layers},
          {"conv_kernel", c.conv_kernel},       {"tokenizer_channels", c.tokenizer_channels},
          {"model_dim", c.model_dim},           {"num_heads", c.num_heads},
          {"mlp_ratio", c.mlp_ratio},           {"positional_embedding", model::to_string(c.positional_embedding)},
          {"input_height", c.input_height},     {"input_width", c.input_width}};
}

model::CctConfig cct_config_from_json(const json& j, model::CctConfig c) {
  const std::string w = "model";
  reject_unknown(j, {"encoder_layers", "conv_layers", "conv_kernel", "tokenizer_channels", "model_dim", "num_heads",
                     "mlp_ratio", "positional_embedding", "input_height", "input_width"},
                 w);
  read(j, "encoder_layers", c.encoder_layers, w);
  read(j, "conv_layers", c.conv_layers, w);
  read(j, "conv_kernel", c.conv_kernel, w);
  read(j, "tokenizer_channels", c.tokenizer_channels, w);
  read(j, "model_dim", c.model_dim, w);
  read(j, "num_heads", c.num_heads, w);
  read(j, "mlp_ratio", c.mlp_ratio, w);
  read(j, "input_height", c.input_height, w);
  read(j, "input_width", c.input_width, w);
  if (j.contains("positional_embedding")) {
    c.positional_embedding = model::parse_positional_embedding(j.at("positional_embedding").get<std::string>());
  }
  return c;
}

json to_json(const dsp::SpectrogramConfig& c) {
  return {{"window_ms", c.window_ms}, {"hop_ms", c.hop_ms}, {"n_mels", c.n_mels},     {"fmin", c.fmin},
          {"fmax", c.fmax},           {"fft_size", c.fft_size}, {"amin", c.amin}, {"db_floor", c.db_floor}};
}

dsp::SpectrogramConfig spectrogram_config_from_json(const json& j, dsp::SpectrogramConfig c) {
  const std::string w = "spectrogram";
  reject_unknown(j, {"window_ms", "hop_ms", "n_mels", "fmin", "fmax", "fft_size", "amin", "db_floor"}, w);
  read(j, "window_ms", c.window_ms, w);
  read(j, "hop_ms", c.hop_ms, w);
  read(j, "n_mels", c.n_mels, w);
  read(j, "fmin", c.fmin, w);
  read(j, "fmax", c.fmax, w);
  read(j, "fft_size", c.fft_size, w);
  read(j, "amin", c.amin, w);
  read(j, "db_floor", c.db_floor, w);
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(clip_seconds > 0)) throw ConfigError("clip_seconds must be positive");
  if (eval_every < 0) throw ConfigError("eval_every must be non-negative");
  if (target_train_accuracy && !(*target_train_accuracy > 0 && *target_train_accuracy <= 1)) {
    throw ConfigError("target_train_accuracy must lie in (0, 1]");
  }
  if (model.num_classes != label_scheme.num_classes()) {
    throw ConfigError("model.num_classes does not match the label scheme");
  }
  model.validate();
}

json TrainConfig::to_json() const {
  json j = {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"seed", seed},
            {"balancing", harness::to_string(balancing)},
            {"label_scheme", label_scheme.name()},
            {"variant", model::to_string(variant)},
            {"model", harness::to_json(model)},
            {"spectrogram", harness::to_json(spectrogram)},
            {"clip_seconds", clip_seconds},
            {"embeddings", embeddings},
            {"spec_augment", spec_augment},
            {"eval_every", eval_every}};
  j["target_train_accuracy"] = target_train_accuracy ? json(*target_train_accuracy) : json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  const std::string w = "config";
  reject_unknown(j, {"epochs", "batch_size", "learning_rate", "seed", "balancing", "label_scheme", "variant", "model",
                     "spectrogram", "clip_seconds", "embeddings", "spec_augment", "target_train_accuracy",
                     "eval_every"},
                 w);
  TrainConfig c;
  read(j, "epochs", c.epochs, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "learning_rate", c.learning_rate, w);
  read(j, "seed", c.seed, w);
  read(j, "clip_seconds", c.clip_seconds, w);
  read(j, "embeddings", c.embeddings, w);
  read(j, "spec_augment", c.spec_augment, w);
  read(j, "eval_every", c.eval_every, w);
  if (j.contains("balancing")) c.balancing = parse_balancing(j.at("balancing").get<std::string>());
  if (j.contains("label_scheme")) c.label_scheme = corpus::LabelScheme::parse(j.at("label_scheme").get<std::string>());
  if (j.contains("variant")) c.variant = model::parse_fusion_variant(j.at("variant").get<std::string>());
  if (j.contains("model")) c.model = cct_config_from_json(j.at("model"), c.model);
  if (j.contains("spectrogram")) c.spectrogram = spectrogram_config_from_json(j.at("spectrogram"), c.spectrogram);
  if (j.contains("target_train_accuracy") && !j.at("target_train_accuracy").is_null()) {
    c.target_train_accuracy = j.at("target_train_accuracy").get<double>();
  }
  c.model.num_classes = c.label_scheme.num_classes();
  c.validate();
  return c;
}

std::string TrainConfig::canonical() const { return to_json().dump(); }

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return TrainConfig::from_json(j);
}

void save_train_config(const std::filesystem::path& path, const TrainConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << cfg.to_json().dump(2) << '\n';
}

}  // namespace ser::harness
