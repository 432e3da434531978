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

// serlab: command-line front end for the speech-emotion-recognition lab.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "ser/augment/augment.hpp"
#include "ser/common/error.hpp"
#include "ser/common/png.hpp"
#include "ser/harness/desk_corpus.hpp"
#include "ser/harness/experiment.hpp"

namespace fs = std::filesystem;
using namespace ser;
using Eigen::Index;

namespace {

std::vector<corpus::Sample> load_manifests(const std::vector<std::string>& paths) {
  std::vector<corpus::Sample> all;
  for (const auto& p : paths) {
    auto part = corpus::load_manifest(p);
    all.insert(all.end(), part.begin(), part.end());
  }
  corpus::validate_samples(all);
  return all;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  try {
    return nlohmann::json::parse(is, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void print_report(const metrics::EvalReport& r) {
  std::cout << r.split << ": accuracy=" << r.accuracy << " uar=" << r.uar << " macro_f1=" << r.macro_f1
            << " n=" << r.confusion.total() << (r.has_warnings() ? " (zero-support classes flagged)" : "") << '\n';
}

std::vector<std::uint8_t> image_channel_bytes(const nn::TensorD& img) {
  const Index h = img.dim(1), w = img.dim(2);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(h * w));
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      // Low frequencies at the bottom, as in the usual spectrogram layout.
      px[static_cast<std::size_t>(r * w + c)] =
          static_cast<std::uint8_t>(std::lround(img.data()((h - 1 - r) * w + c) * 255.0));
    }
  }
  return px;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serlab: speech emotion recognition with compact convolutional transformers"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::string config_path;

  // spectrogram
  auto* spec_cmd = app.add_subcommand("spectrogram", "WAV -> log-Mel matrix and image files");
  std::string spec_in, spec_out = ".";
  int spec_h = 224, spec_w = 224;
  double spec_seconds = 0;
  spec_cmd->add_option("--in", spec_in, "input WAV")->required();
  spec_cmd->add_option("--out", spec_out, "output directory");
  spec_cmd->add_option("--height", spec_h, "image height");
  spec_cmd->add_option("--width", spec_w, "image width");
  spec_cmd->add_option("--seconds", spec_seconds, "centre-pad/crop to this duration first");
  spec_cmd->add_option("--config", config_path, "JSON object with spectrogram parameters");

  // augment
  auto* aug_cmd = app.add_subcommand("augment", "write time-domain augmented copies of a WAV");
  std::string aug_in, aug_out = ".", aug_kinds;
  aug_cmd->add_option("--in", aug_in, "input WAV")->required();
  aug_cmd->add_option("--out", aug_out, "output directory");
  aug_cmd->add_option("--kinds", aug_kinds, "comma list of noise,normalize,pitch_shift,time_shift,speed_change");
  aug_cmd->add_option("--seed", seed, "random seed");

  // gen-desk-corpus
  auto* gen_cmd = app.add_subcommand("gen-desk-corpus", "synthesise a small labelled corpus");
  harness::DeskCorpusConfig desk;
  std::string gen_out, gen_corpora = "desk";
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->add_option("--speakers", desk.speakers, "speakers per corpus");
  gen_cmd->add_option("--per-class", desk.per_class, "utterances per speaker and emotion");
  gen_cmd->add_option("--corpora", gen_corpora, "comma list of corpus ids");
  gen_cmd->add_option("--seconds", desk.seconds, "clip duration");
  gen_cmd->add_option("--sample-rate", desk.sample_rate, "sample rate (Hz)");
  gen_cmd->add_option("--seed", seed, "random seed");

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "compute (toy encoder) or import speaker embeddings");
  std::vector<std::string> manifests;
  std::string embed_out, embed_import;
  double embed_seconds = 1.0;
  embed_cmd->add_option("--manifest", manifests, "manifest CSV (repeatable)")->required();
  embed_cmd->add_option("--out", embed_out, "output embedding store")->required();
  embed_cmd->add_option("--import", embed_import, "existing store to validate against the manifest and copy");
  embed_cmd->add_option("--seconds", embed_seconds, "clip duration used by the toy encoder");

  // pca-fit
  auto* pca_cmd = app.add_subcommand("pca-fit", "fit PCA on an embedding store");
  std::string pca_store, pca_out, pca_project;
  long pca_k = speaker::kReducedEmbeddingDim;
  pca_cmd->add_option("--store", pca_store, "embedding store")->required();
  pca_cmd->add_option("--k", pca_k, "number of components");
  pca_cmd->add_option("--out", pca_out, "output PCA archive")->required();
  pca_cmd->add_option("--project", pca_project, "also write the projected store here");

  // mds
  auto* mds_cmd = app.add_subcommand("mds", "2-D classical MDS of speaker embeddings");
  std::string mds_store, mds_out = ".";
  mds_cmd->add_option("--store", mds_store, "embedding store")->required();
  mds_cmd->add_option("--manifest", manifests, "manifest CSV giving speaker ids")->required();
  mds_cmd->add_option("--out", mds_out, "output directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model");
  std::string out_dir, test_corpus, test_speaker, val_list;
  std::optional<int> epochs;
  train_cmd->add_option("--config", config_path, "training config (JSON)");
  train_cmd->add_option("--manifest", manifests, "manifest CSV (repeatable)")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--seed", seed, "overrides the config seed");
  train_cmd->add_option("--epochs", epochs, "overrides the config epoch count");
  train_cmd->add_option("--test-corpus", test_corpus, "hold out this corpus for testing");
  train_cmd->add_option("--val-corpus", val_list, "comma list of validation corpora (with --test-corpus)");
  train_cmd->add_option("--test-speaker", test_speaker, "hold out this speaker for testing");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ckpt, eval_split = "test";
  eval_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", manifests, "manifest CSV (repeatable)")->required();
  eval_cmd->add_option("--out", out_dir, "output directory")->required();
  eval_cmd->add_option("--corpus", test_corpus, "restrict to this corpus");
  eval_cmd->add_option("--speaker", test_speaker, "restrict to this speaker");
  eval_cmd->add_option("--split-name", eval_split, "name used in report files");

  // cross-corpus
  auto* cc_cmd = app.add_subcommand("cross-corpus", "train/test rotation over corpora");
  cc_cmd->add_option("--config", config_path, "cross-corpus config (JSON)");
  cc_cmd->add_option("--manifest", manifests, "manifest CSV (repeatable)")->required();
  cc_cmd->add_option("--out", out_dir, "output directory")->required();
  cc_cmd->add_option("--seed", seed, "overrides the config seed");
  cc_cmd->add_option("--epochs", epochs, "overrides the config epoch count");

  // loso
  auto* loso_cmd = app.add_subcommand("loso", "leave-one-speaker-out evaluation");
  loso_cmd->add_option("--config", config_path, "training config (JSON)");
  loso_cmd->add_option("--manifest", manifests, "manifest CSV (repeatable)")->required();
  loso_cmd->add_option("--out", out_dir, "output directory")->required();
  loso_cmd->add_option("--seed", seed, "overrides the config seed");
  loso_cmd->add_option("--epochs", epochs, "overrides the config epoch count");

  // report
  auto* report_cmd = app.add_subcommand("report", "recompute metrics from stored predictions");
  std::string preds, classes, report_split = "report";
  report_cmd->add_option("--predictions", preds, "predictions CSV (id,true,predicted)")->required();
  report_cmd->add_option("--classes", classes, "comma list of class names")->required();
  report_cmd->add_option("--out", out_dir, "output directory")->required();
  report_cmd->add_option("--split-name", report_split, "name used in report files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto train_config = [&]() {
    harness::TrainConfig cfg = config_path.empty() ? harness::TrainConfig{}
                                                   : harness::TrainConfig::from_json(read_json(config_path));
    if (seed) cfg.seed = *seed;
    if (epochs) cfg.epochs = *epochs;
    cfg.validate();
    return cfg;
  };

  try {
    if (spec_cmd->parsed()) {
      dsp::SpectrogramConfig cfg =
          config_path.empty() ? dsp::SpectrogramConfig{} : harness::spectrogram_config_from_json(read_json(config_path));
      auto w = dsp::load_wav(spec_in);
      if (spec_seconds > 0) w = dsp::fit_duration(w, spec_seconds);
      const auto mel = dsp::mel_spectrogram(w, cfg);
      const auto image = dsp::spectrogram_to_image(mel, spec_h, spec_w);
      fs::create_directories(spec_out);
      const auto stem = fs::path(spec_in).stem().string();
      dsp::save_matrix(fs::path(spec_out) / (stem + "_mel.bin"), mel.values);
      dsp::save_png(fs::path(spec_out) / (stem + "_mel.png"),
                    ((mel.values.array() - cfg.db_floor) / -cfg.db_floor).matrix());
      io::save_png(fs::path(spec_out) / (stem + "_image.png"), spec_w, spec_h, 1, image_channel_bytes(image.pixels));
      std::cout << stem << ": " << mel.n_mels() << " mel bands x " << mel.n_frames() << " frames\n";
    } else if (aug_cmd->parsed()) {
      const auto w = dsp::load_wav(aug_in);
      auto specs = augment::default_time_specs(seed.value_or(0));
      if (!aug_kinds.empty()) {
        std::vector<augment::TimeAugmentSpec> chosen;
        for (const auto& k : split_list(aug_kinds)) {
          chosen.push_back(augment::draw_time_spec(augment::parse_time_augment_kind(k), derive_seed(seed.value_or(0), k)));
        }
        specs = chosen;
      }
      fs::create_directories(aug_out);
      const auto stem = fs::path(aug_in).stem().string();
      const auto outs = augment::expand_sample(w, specs);
      for (std::size_t i = 0; i < outs.size(); ++i) {
        const auto path = fs::path(aug_out) / (stem + "_" + augment::to_string(specs[i].kind) + ".wav");
        dsp::save_wav(path, outs[i]);
        std::cout << path.string() << '\n';
      }
    } else if (gen_cmd->parsed()) {
      desk.corpora = split_list(gen_corpora);
      desk.seed = seed.value_or(0);
      const auto samples = harness::generate_desk_corpus(gen_out, desk);
      std::cout << "wrote " << samples.size() << " utterances and " << (fs::path(gen_out) / "manifest.csv").string()
                << '\n';
    } else if (embed_cmd->parsed()) {
      const auto samples = load_manifests(manifests);
      speaker::EmbeddingStore out;
      if (!embed_import.empty()) {
        const auto in = speaker::EmbeddingStore::load(embed_import);
        for (const auto& s : samples) out.add({s.id, in.at(s.id).vector});
      } else {
        for (const auto& s : samples) {
          try {
            out.add({s.id, speaker::toy_speaker_encoder(dsp::fit_duration(dsp::load_wav(s.audio_path), embed_seconds))});
          } catch (const dsp::WavError& e) {
            throw Error("sample '" + s.id + "': " + e.what());
          }
        }
      }
      out.save(embed_out);
      std::cout << "wrote " << out.size() << " embeddings of dim " << out.dim() << '\n';
    } else if (pca_cmd->parsed()) {
      const auto store = speaker::EmbeddingStore::load(pca_store);
      if (store.size() == 0) throw Error("embedding store is empty");
      Eigen::MatrixXd x(static_cast<Index>(store.size()), store.dim());
      for (std::size_t i = 0; i < store.size(); ++i) x.row(static_cast<Index>(i)) = store.records()[i].vector.transpose();
      const auto pca = speaker::pca_fit(x, pca_k);
      nn::Checkpoint ck;
      ck.config = nlohmann::json{{"kind", "pca"}, {"k", pca_k}, {"input_dim", store.dim()}}.dump();
      ck.config_hash = fnv1a64(ck.config);
      ck.add("pca/mean", nn::TensorD({pca.mean.size()}, pca.mean));
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> comps = pca.components;
      ck.add("pca/components", nn::TensorD({comps.rows(), comps.cols()},
                                            Eigen::Map<const Eigen::VectorXd>(comps.data(), comps.size())));
      ck.add("pca/eigenvalues", nn::TensorD({pca.eigenvalues.size()}, pca.eigenvalues));
      ck.save(pca_out);
      if (!pca_project.empty()) {
        speaker::EmbeddingStore projected;
        for (const auto& r : store.records()) projected.add({r.utterance_id, speaker::pca_project(pca, r.vector)});
        projected.save(pca_project);
      }
      std::cout << "PCA " << store.dim() << " -> " << pca_k << ", retained variance "
                << pca.eigenvalues.sum() / (x.rowwise() - pca.mean.transpose()).squaredNorm() * (x.rows() - 1) << '\n';
    } else if (mds_cmd->parsed()) {
      const auto store = speaker::EmbeddingStore::load(mds_store);
      const auto samples = load_manifests(manifests);
      std::vector<const corpus::Sample*> used;
      for (const auto& s : samples) {
        if (store.find(s.id)) used.push_back(&s);
      }
      if (used.size() < 2) throw Error("need at least two manifest samples with embeddings");
      Eigen::MatrixXd x(static_cast<Index>(used.size()), store.dim());
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < used.size(); ++i) {
        x.row(static_cast<Index>(i)) = store.at(used[i]->id).vector.transpose();
        labels.push_back(used[i]->speaker_id);
      }
      const auto coords = speaker::mds_embed(speaker::pairwise_distances(x), 2);
      std::vector<speaker::MdsPoint> pts;
      for (std::size_t i = 0; i < used.size(); ++i) {
        pts.push_back({used[i]->id, labels[i], coords(static_cast<Index>(i), 0), coords(static_cast<Index>(i), 1)});
      }
      fs::create_directories(mds_out);
      speaker::save_mds_csv(fs::path(mds_out) / "mds.csv", pts);
      speaker::save_mds_png(fs::path(mds_out) / "mds.png", pts);
      if (corpus::speaker_ids(samples).size() >= 2) {
        std::cout << "silhouette (2-D, by speaker): " << speaker::silhouette_score(coords, labels) << '\n';
      }
    } else if (train_cmd->parsed()) {
      const auto cfg = train_config();
      const auto samples = load_manifests(manifests);
      corpus::SplitPlan plan;
      if (!test_corpus.empty() && !test_speaker.empty()) throw ConfigError("give --test-corpus or --test-speaker, not both");
      if (!test_corpus.empty()) {
        std::vector<std::string> val = split_list(val_list), train;
        for (const auto& c : corpus::corpus_ids(samples)) {
          if (c != test_corpus && std::find(val.begin(), val.end(), c) == val.end()) train.push_back(c);
        }
        plan = corpus::split_cross_corpus(samples, train, val, test_corpus);
      } else if (!test_speaker.empty()) {
        bool found = false;
        for (auto& fold : corpus::split_loso(samples)) {
          if (fold.name == "speaker=" + test_speaker) {
            plan = std::move(fold);
            found = true;
          }
        }
        if (!found) throw ConfigError("unknown speaker '" + test_speaker + "'");
      } else {
        plan.name = "all";
        for (const auto& s : samples) plan.train.push_back(s.id);
      }
      const auto result = harness::train(samples, plan, cfg);
      harness::write_experiment(out_dir, result);
      std::cout << "trained " << result.epochs_run << " epochs; best epoch " << result.best_epoch << '\n';
      for (const auto& [split, rep] : result.reports) print_report(rep);
    } else if (eval_cmd->parsed()) {
      const auto ck = nn::Checkpoint::load(ckpt);
      const auto samples = load_manifests(manifests);
      std::vector<std::string> ids;
      for (const auto& s : samples) {
        if ((test_corpus.empty() || s.corpus_id == test_corpus) && (test_speaker.empty() || s.speaker_id == test_speaker)) {
          ids.push_back(s.id);
        }
      }
      const auto rep = harness::evaluate(ck, samples, ids, eval_split);
      harness::write_report(out_dir, rep);
      print_report(rep);
    } else if (cc_cmd->parsed()) {
      auto cfg = config_path.empty() ? harness::CrossCorpusConfig{}
                                     : harness::CrossCorpusConfig::from_json(read_json(config_path));
      if (seed) cfg.train.seed = *seed;
      if (epochs) cfg.train.epochs = *epochs;
      const auto samples = load_manifests(manifests);
      const auto result = harness::run_cross_corpus(samples, cfg, out_dir);
      for (const auto& row : result.rows) {
        for (const auto& [mode, rep] : row.reports) {
          std::cout << row.test_corpus << ' ' << model::to_string(row.variant) << ' ' << harness::to_string(mode) << ": ";
          print_report(rep);
        }
      }
      std::cout << "leaked ids: " << result.leaked << '\n';
    } else if (loso_cmd->parsed()) {
      const auto cfg = train_config();
      const auto samples = load_manifests(manifests);
      const auto result = harness::run_loso(samples, cfg, out_dir);
      std::cout << "LOSO over " << result.folds.size() << " speakers: accuracy=" << result.accuracy
                << " uar=" << result.uar << " macro_f1=" << result.macro_f1 << " leaked ids: " << result.leaked << '\n';
    } else if (report_cmd->parsed()) {
      const auto rep = metrics::make_report(report_split, metrics::load_predictions_csv(preds), split_list(classes));
      harness::write_report(out_dir, rep);
      print_report(rep);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
