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

#include "ser/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <random>

#include "ser/augment/augment.hpp"
#include "ser/common/csv.hpp"
#include "ser/common/error.hpp"
#include "ser/nn/adam.hpp"
#include "ser/nn/ops.hpp"


namespace ser::harness {

using corpus::LabeledSample;
using corpus::Sample;
using Eigen::Index;

// ---------------------------------------------------------------- features

FeatureStore::FeatureStore(const TrainConfig& cfg, bool need_embeddings)
    : cfg_(cfg), need_embeddings_(need_embeddings) {
  if (need_embeddings_ && cfg_.embeddings != "toy") {
    store_ = std::make_unique<speaker::EmbeddingStore>(speaker::EmbeddingStore::load(cfg_.embeddings));
  }
}

dsp::Waveform FeatureStore::load_clip(const Sample& s) const {
  try {
    return dsp::fit_duration(dsp::load_wav(s.audio_path), cfg_.clip_seconds);
  } catch (const Error& e) {
    throw Error("sample '" + s.id + "': " + e.what());
  }
}

namespace {
constexpr augment::TimeAugmentKind kAugmentKinds[] = {
    augment::TimeAugmentKind::Noise, augment::TimeAugmentKind::PitchShift, augment::TimeAugmentKind::TimeShift,
    augment::TimeAugmentKind::SpeedChange, augment::TimeAugmentKind::Normalize};

augment::TimeAugmentSpec synthetic_spec(std::uint64_t seed, const std::string& id) {
  const auto kind = kAugmentKinds[derive_seed(seed, "augkind/" + id) % std::size(kAugmentKinds)];
  return augment::draw_time_spec(kind, derive_seed(seed, "aug/" + id));
}
}  // namespace

std::string FeatureStore::describe_augmentation(const Sample& s) const {
  if (!s.is_synthetic()) return "original";
  const auto spec = synthetic_spec(cfg_.seed, s.id);
  return augment::to_string(spec.kind) + (cfg_.spec_augment ? "+mask" : "");
}

const Eigen::VectorXd& FeatureStore::raw_embedding(const Sample& s) {
  const std::string source = s.augmented_from.value_or(s.id);
  if (auto it = embeddings_.find(source); it != embeddings_.end()) return it->second;
  Eigen::VectorXd v;
  if (store_) {
    const auto* e = store_->find(source);
    if (!e) throw Error("no speaker embedding for sample '" + source + "'");
    v = e->vector;
  } else {
    try {
      v = speaker::toy_speaker_encoder(load_clip(s));
    } catch (const Error& e) {
      throw Error("speaker embedding for '" + source + "': " + e.what());
    }
  }
  return embeddings_.emplace(source, std::move(v)).first->second;
}

const SampleFeatures& FeatureStore::get(const Sample& s) {
  if (auto it = cache_.find(s.id); it != cache_.end()) return it->second;
  dsp::Waveform w = load_clip(s);
  const bool synthetic = s.is_synthetic();
  if (synthetic) {
    w = dsp::fit_duration(augment::apply_time_augmentation(w, synthetic_spec(cfg_.seed, s.id)), cfg_.clip_seconds);
  }
  auto mel = dsp::mel_spectrogram(w, cfg_.spectrogram);
  if (synthetic && cfg_.spec_augment) {
    const auto axis =
        derive_seed(cfg_.seed, "maskaxis/" + s.id) % 2 ? augment::MaskAxis::Time : augment::MaskAxis::Frequency;
    const auto dim = axis == augment::MaskAxis::Time ? mel.n_frames() : mel.n_mels();
    mel = augment::apply_spec_mask(mel, augment::draw_mask_spec(axis, dim, derive_seed(cfg_.seed, "mask/" + s.id)));
  }
  SampleFeatures f;
  f.image = dsp::spectrogram_to_image(mel, cfg_.model.input_height, cfg_.model.input_width).pixels;
  if (need_embeddings_) f.embedding = raw_embedding(s);
  return cache_.emplace(s.id, std::move(f)).first->second;
}

// ------------------------------------------------------------ model bundle

TrainedModel::TrainedModel(const TrainConfig& cfg)
    : config(cfg),
      class_names(cfg.label_scheme.class_names()),
      model(cfg.model, cfg.variant, derive_seed(cfg.seed, "model")) {}

Eigen::VectorXd TrainedModel::speaker_input(const Eigen::VectorXd& raw) const {
  if (!reducer) throw ConfigError("model takes speaker input but has no fitted reducer");
  return reducer->apply(raw);
}

int TrainedModel::predict(const SampleFeatures& f) const {
  Eigen::VectorXd spk;
  if (model.takes_speaker()) spk = speaker_input(f.embedding);
  const auto logits = model.forward_one(f.image, model.takes_speaker() ? &spk : nullptr);
  Index arg = 0;
  logits.maxCoeff(&arg);
  return static_cast<int>(arg);
}

nn::Checkpoint TrainedModel::to_checkpoint(const std::string& label, int epoch) const {
  nn::Checkpoint ck;
  ck.seed = config.seed;
  ck.config = json{{"train", config.to_json()}, {"class_names", class_names}, {"label", label}, {"epoch", epoch}}.dump();
  ck.config_hash = fnv1a64(ck.config);
  model.store(ck, "model");
  if (reducer) {
    const auto& p = reducer->pca;
    ck.add("speaker/mean", nn::TensorD({p.mean.size()}, p.mean));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> comps = p.components;
    ck.add("speaker/components",
           nn::TensorD({comps.rows(), comps.cols()}, Eigen::Map<const Eigen::VectorXd>(comps.data(), comps.size())));
    ck.add("speaker/eigenvalues", nn::TensorD({p.eigenvalues.size()}, p.eigenvalues));
    ck.add("speaker/scale", nn::TensorD({1}, Eigen::VectorXd::Constant(1, reducer->scale)));
  }
  return ck;
}

TrainedModel TrainedModel::from_checkpoint(const nn::Checkpoint& ck) {
  json j;
  try {
    j = json::parse(ck.config);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  TrainedModel m(TrainConfig::from_json(j.at("train")));
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  m.model.restore(ck, "model");
  if (ck.contains("speaker/mean")) {
    speaker::SpeakerReducer r;
    r.out_dim = m.config.model.model_dim;
    r.pca.mean = ck.at("speaker/mean").values;
    const auto& c = ck.at("speaker/components");
    if (c.shape.size() != 2) throw IoError("checkpoint: malformed speaker/components");
    r.pca.components = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        c.values.data(), c.shape[0], c.shape[1]);
    r.pca.eigenvalues = ck.at("speaker/eigenvalues").values;
    r.scale = ck.at("speaker/scale").values(0);
    m.reducer = std::move(r);
  } else if (m.model.takes_speaker()) {
    throw IoError("checkpoint for a speaker-fusion model lacks its PCA reducer");
  }
  return m;
}

// --------------------------------------------------------------- training

namespace {

std::vector<LabeledSample> labeled_subset(const std::vector<Sample>& samples, const std::vector<std::string>& ids,
                                          const corpus::LabelScheme& scheme) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  std::vector<LabeledSample> out;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error("unknown sample id '" + id + "'");
    if (const auto c = scheme.class_of(it->second->emotion)) out.push_back({*it->second, *c});
  }
  return out;
}

metrics::EvalReport evaluate_labeled(const TrainedModel& m, const std::vector<LabeledSample>& set,
                                     const std::string& split, FeatureStore& features) {
  std::vector<metrics::Prediction> preds;
  preds.reserve(set.size());
  for (const auto& ls : set) preds.push_back({ls.sample.id, ls.label, m.predict(features.get(ls.sample))});
  return metrics::make_report(split, std::move(preds), m.class_names);
}

}  // namespace

metrics::EvalReport evaluate(const TrainedModel& m, const std::vector<Sample>& samples,
                             const std::vector<std::string>& ids, const std::string& split, FeatureStore& features) {
  const auto set = labeled_subset(samples, ids, m.config.label_scheme);
  if (set.empty()) throw UndefinedMetricError("split '" + split + "' has no samples under the label scheme");
  return evaluate_labeled(m, set, split, features);
}

metrics::EvalReport evaluate(const nn::Checkpoint& ck, const std::vector<Sample>& samples,
                             const std::vector<std::string>& ids, const std::string& split) {
  const TrainedModel m = TrainedModel::from_checkpoint(ck);
  FeatureStore features(m.config, m.model.takes_speaker());
  return evaluate(m, samples, ids, split, features);
}

ExperimentResult train(const std::vector<Sample>& samples, const corpus::SplitPlan& plan, const TrainConfig& cfg,
                       FeatureStore* shared_features) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  corpus::validate_plan(plan, samples);

  ExperimentResult result;
  result.name = plan.name;
  result.config = cfg;
  const int num_classes = cfg.label_scheme.num_classes();
  const auto train_set = labeled_subset(samples, plan.train, cfg.label_scheme);
  const auto val_set = labeled_subset(samples, plan.val, cfg.label_scheme);
  const auto test_set = labeled_subset(samples, plan.test, cfg.label_scheme);
  if (train_set.empty()) throw ConfigError("plan '" + plan.name + "': training split is empty");

  std::vector<LabeledSample> balanced;
  const auto balance_seed = derive_seed(cfg.seed, "balance");
  switch (cfg.balancing) {
    case Balancing::None: balanced = train_set; break;
    case Balancing::Undersample: balanced = corpus::balance_undersample(train_set, num_classes, balance_seed); break;
    case Balancing::Augment:
      balanced = corpus::balance_augment(train_set, num_classes, corpus::make_synthetic_sample, balance_seed);
      break;
  }
  for (const auto& ls : balanced) result.train_sources[ls.sample.id] = ls.sample.augmented_from.value_or(ls.sample.id);

  std::optional<FeatureStore> local;
  FeatureStore& features = shared_features ? *shared_features : local.emplace(cfg, cfg.variant != model::FusionVariant::None);

  TrainedModel tm(cfg);
  const bool speaker = tm.model.takes_speaker();
  if (speaker) {
    std::vector<const LabeledSample*> fit;
    for (const auto& ls : train_set) {
      if (!ls.sample.is_synthetic()) fit.push_back(&ls);
    }
    Eigen::MatrixXd x(static_cast<Index>(fit.size()), features.raw_embedding(fit.front()->sample).size());
    for (std::size_t i = 0; i < fit.size(); ++i) {
      x.row(static_cast<Index>(i)) = features.raw_embedding(fit[i]->sample).transpose();
      result.pca_fit_ids.push_back(fit[i]->sample.id);
    }
    tm.reducer = speaker::fit_speaker_reducer(x, cfg.model.model_dim);
  }

  std::vector<const SampleFeatures*> feats;
  std::vector<Eigen::VectorXd> spk;
  for (const auto& ls : balanced) {
    feats.push_back(&features.get(ls.sample));
    spk.push_back(speaker ? tm.speaker_input(feats.back()->embedding) : Eigen::VectorXd());
  }

  auto params = tm.model.parameters();
  nn::AdamState<double> adam;
  adam.lr = cfg.learning_rate;
  double best_uar = -1.0;
  const std::size_t n = balanced.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, "shuffle/" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
      const std::size_t stop = std::min(n, start + batch);
      const double inv = 1.0 / static_cast<double>(stop - start);
      BatchRecord record{epoch, batch_index, {}};
      tm.model.zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        const int label = balanced[i].label;
        record.ids.push_back(balanced[i].sample.id);
        model::ForwardCache cache;
        const model::RowVec logits = tm.model.forward_one(feats[i]->image, speaker ? &spk[i] : nullptr, &cache);
        const model::Mat row = logits;
        const auto ce = nn::cross_entropy_loss<double>(row, std::span<const int>(&label, 1));
        loss_sum += ce.loss;
        Index arg = 0;
        logits.maxCoeff(&arg);
        correct += arg == label;
        tm.model.backward_one(cache, ce.dlogits.row(0) * inv);
      }
      nn::adam_step(params, adam);
      result.batches.push_back(std::move(record));
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (!val_set.empty() && cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      stats.val_uar = evaluate_labeled(tm, val_set, "val", features).uar;
      if (*stats.val_uar > best_uar) {
        best_uar = *stats.val_uar;
        result.best = tm.to_checkpoint("best", epoch);
        result.best_epoch = epoch;
      }
    }
    result.curve.push_back(stats);
    result.epochs_run = epoch;
    if (cfg.target_train_accuracy && stats.train_accuracy >= *cfg.target_train_accuracy &&
        evaluate_labeled(tm, balanced, "train", features).accuracy >= *cfg.target_train_accuracy) {
      break;
    }
  }

  result.final = tm.to_checkpoint("final", result.epochs_run);
  std::optional<TrainedModel> selected_storage;
  const TrainedModel* selected = &tm;
  if (best_uar >= 0.0) {
    selected = &selected_storage.emplace(TrainedModel::from_checkpoint(result.best));
  } else {
    result.best = result.final;
    result.best_epoch = result.epochs_run;
  }
  result.reports["train"] = evaluate_labeled(*selected, train_set, "train", features);
  if (!val_set.empty()) result.reports["val"] = evaluate_labeled(*selected, val_set, "val", features);
  if (!test_set.empty()) result.reports["test"] = evaluate_labeled(*selected, test_set, "test", features);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// ---------------------------------------------------------------- outputs

namespace {
std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.precision(17);
  return os;
}
}  // namespace

void write_report(const std::filesystem::path& dir, const metrics::EvalReport& r) {
  std::filesystem::create_directories(dir);
  metrics::save_metrics_csv(dir / (r.split + "_metrics.csv"), r);
  metrics::save_confusion_csv(dir / (r.split + "_confusion.csv"), r.confusion);
  metrics::save_predictions_csv(dir / (r.split + "_predictions.csv"), r.predictions);
  metrics::save_confusion_png(dir / (r.split + "_confusion.png"), r.confusion);
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  r.best.save(dir / "checkpoint_best.ckpt");
  r.final.save(dir / "checkpoint_final.ckpt");
  save_train_config(dir / "config.json", r.config);
  {
    auto os = open_text(dir / "loss_curve.csv");
    os << "epoch,train_loss,train_accuracy,val_uar\n";
    for (const auto& e : r.curve) {
      os << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',';
      if (e.val_uar) os << *e.val_uar;
      os << '\n';
    }
  }
  {
    auto os = open_text(dir / "batch_log.csv");
    os << "epoch,batch,id,source_id\n";
    for (const auto& b : r.batches) {
      for (const auto& id : b.ids) os << b.epoch << ',' << b.batch << ',' << csv::field(id) << ',' << csv::field(r.train_sources.at(id)) << '\n';
    }
  }
  {
    auto os = open_text(dir / "pca_fit_ids.txt");
    for (const auto& id : r.pca_fit_ids) os << id << '\n';
  }
  json summary = {{"name", r.name},
                  {"seed", r.config.seed},
                  {"best_epoch", r.best_epoch},
                  {"epochs_run", r.epochs_run},
                  {"epochs", r.config.epochs},
                  {"batch_size", r.config.batch_size}};
  for (const auto& [split, rep] : r.reports) {
    summary["reports"][split] = {{"accuracy", rep.accuracy}, {"uar", rep.uar}, {"macro_f1", rep.macro_f1},
                                 {"n", rep.confusion.total()}, {"warnings", rep.has_warnings()}};
    write_report(dir / "reports", rep);
  }
  open_text(dir / "summary.json") << summary.dump(2) << '\n';
  open_text(dir / "timing.json") << json{{"wall_seconds", r.wall_seconds}}.dump(2) << '\n';
}

std::size_t audit_leakage(const ExperimentResult& r, const std::set<std::string>& forbidden) {
  std::size_t leaks = 0;
  const auto bad = [&](const std::string& id) {
    const auto it = r.train_sources.find(id);
    return forbidden.count(id) || (it != r.train_sources.end() && forbidden.count(it->second));
  };
  for (const auto& b : r.batches) {
    for (const auto& id : b.ids) leaks += bad(id);
  }
  for (const auto& id : r.pca_fit_ids) leaks += bad(id);
  return leaks;
}

// --------------------------------------------------------------- protocols

std::vector<Rotation> default_rotations(const std::set<std::string>& corpora,
                                        const std::vector<std::string>& always_train) {
  if (corpora.size() < 3) {
    throw ConfigError("cross-corpus evaluation needs at least 3 corpora, found " + std::to_string(corpora.size()));
  }
  const std::set<std::string> fixed(always_train.begin(), always_train.end());
  for (const auto& c : fixed) {
    if (!corpora.count(c)) throw ConfigError("always-train corpus '" + c + "' not present");
  }
  std::vector<std::string> held;
  for (const auto& c : corpora) {
    if (!fixed.count(c)) held.push_back(c);
  }
  if (held.empty()) throw ConfigError("no corpus left to test on");
  std::vector<Rotation> out;
  for (std::size_t i = 0; i < held.size(); ++i) {
    Rotation r;
    r.test = held[i];
    if (held.size() >= 2) r.val.push_back(held[(i + 1) % held.size()]);
    r.train = always_train;
    for (const auto& c : held) {
      if (c != r.test && (r.val.empty() || c != r.val.front())) r.train.push_back(c);
    }
    if (r.train.empty()) {
      // Too few corpora to hold one out for validation: train on it instead.
      r.train = r.val;
      r.val.clear();
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {
std::vector<std::string> string_list(const json& j, const char* key) {
  return j.contains(key) ? j.at(key).get<std::vector<std::string>>() : std::vector<std::string>{};
}
}  // namespace

CrossCorpusConfig CrossCorpusConfig::from_json(const json& j) {
  for (const auto& [key, value] : j.items()) {
    if (key != "train" && key != "variants" && key != "modes" && key != "always_train" && key != "rotations") {
      throw ConfigError("cross-corpus config: unknown key '" + key + "'");
    }
  }
  CrossCorpusConfig c;
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : string_list(j, "variants")) c.variants.push_back(model::parse_fusion_variant(v));
  }
  if (j.contains("modes")) {
    c.modes.clear();
    for (const auto& m : string_list(j, "modes")) c.modes.push_back(parse_balancing(m));
  }
  c.always_train = string_list(j, "always_train");
  if (j.contains("rotations")) {
    for (const auto& r : j.at("rotations")) {
      c.rotations.push_back({r.at("test").get<std::string>(), string_list(r, "train"), string_list(r, "val")});
    }
  }
  return c;
}

json CrossCorpusConfig::to_json() const {
  json j = {{"train", train.to_json()}, {"always_train", always_train}};
  for (auto v : variants) j["variants"].push_back(model::to_string(v));
  for (auto m : modes) j["modes"].push_back(harness::to_string(m));
  j["rotations"] = json::array();
  for (const auto& r : rotations) j["rotations"].push_back({{"test", r.test}, {"train", r.train}, {"val", r.val}});
  return j;
}

CrossCorpusResult run_cross_corpus(const std::vector<Sample>& samples, const CrossCorpusConfig& cfg,
                                   const std::filesystem::path& out_dir) {
  CrossCorpusResult result;
  const auto corpora = corpus::corpus_ids(samples);
  if (corpora.size() < 3) {
    throw ConfigError("cross-corpus evaluation needs at least 3 corpora, found " + std::to_string(corpora.size()));
  }
  result.rotations = cfg.rotations.empty() ? default_rotations(corpora, cfg.always_train) : cfg.rotations;
  const bool any_speaker = std::any_of(cfg.variants.begin(), cfg.variants.end(),
                                       [](auto v) { return v != model::FusionVariant::None; });
  FeatureStore features(cfg.train, any_speaker);
  for (const auto& rot : result.rotations) {
    const auto plan = corpus::split_cross_corpus(samples, rot.train, rot.val, rot.test);
    const std::set<std::string> forbidden(plan.test.begin(), plan.test.end());
    for (const auto variant : cfg.variants) {
      CrossCorpusRow row{rot.test, variant, {}};
      for (const auto mode : cfg.modes) {
        TrainConfig tc = cfg.train;
        tc.variant = variant;
        tc.balancing = mode;
        auto run = train(samples, plan, tc, &features);
        run.name = rot.test + "/" + model::to_string(variant) + "/" + to_string(mode);
        result.leaked += audit_leakage(run, forbidden);
        row.reports[mode] = run.reports.at("test");
        if (!out_dir.empty()) write_experiment(out_dir / rot.test / model::to_string(variant) / to_string(mode), run);
        result.runs.push_back(std::move(run));
      }
      result.rows.push_back(std::move(row));
    }
  }
  if (!out_dir.empty()) save_cross_corpus_table(out_dir / "cross_corpus.csv", result);
  return result;
}

void save_cross_corpus_table(const std::filesystem::path& path, const CrossCorpusResult& r) {
  auto os = open_text(path);
  os << "test_corpus,variant,accuracy_us,accuracy_aug,uar_us,uar_aug,macro_f1_us,macro_f1_aug\n";
  for (const auto& row : r.rows) {
    os << row.test_corpus << ',' << model::to_string(row.variant);
    for (auto metric : {&metrics::EvalReport::accuracy, &metrics::EvalReport::uar, &metrics::EvalReport::macro_f1}) {
      for (auto mode : {Balancing::Undersample, Balancing::Augment}) {
        os << ',';
        if (auto it = row.reports.find(mode); it != row.reports.end()) os << it->second.*metric;
      }
    }
    os << '\n';
  }
}

LosoResult run_loso(const std::vector<Sample>& samples, const TrainConfig& cfg, const std::filesystem::path& out_dir) {
  LosoResult result;
  const auto folds = corpus::split_loso(samples);
  FeatureStore features(cfg, cfg.variant != model::FusionVariant::None);
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  for (const auto& plan : folds) {
    const std::string speaker = by_id.at(plan.test.front())->speaker_id;
    std::set<std::string> forbidden(plan.test.begin(), plan.test.end());
    auto run = train(samples, plan, cfg, &features);
    run.name = "loso/" + speaker;
    result.leaked += audit_leakage(run, forbidden);
    const auto& rep = run.reports.at("test");
    result.accuracy += rep.accuracy;
    result.uar += rep.uar;
    result.macro_f1 += rep.macro_f1;
    if (!out_dir.empty()) write_experiment(out_dir / speaker, run);
    result.speakers.push_back(speaker);
    result.folds.push_back(std::move(run));
  }
  const double k = static_cast<double>(result.folds.size());
  result.accuracy /= k;
  result.uar /= k;
  result.macro_f1 /= k;
  if (!out_dir.empty()) save_loso_table(out_dir / "loso.csv", result);
  return result;
}

void save_loso_table(const std::filesystem::path& path, const LosoResult& r) {
  auto os = open_text(path);
  os << "fold,speaker,accuracy,uar,macro_f1\n";
  for (std::size_t i = 0; i < r.folds.size(); ++i) {
    const auto& rep = r.folds[i].reports.at("test");
    os << i << ',' << r.speakers[i] << ',' << rep.accuracy << ',' << rep.uar << ',' << rep.macro_f1 << '\n';
  }
  os << "mean,," << r.accuracy << ',' << r.uar << ',' << r.macro_f1 << '\n';
}

}  // namespace ser::harness
