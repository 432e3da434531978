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

#include "ser/speaker/speaker.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "ser/common/binary_io.hpp"
#include "ser/common/csv.hpp"
#include "ser/common/error.hpp"
#include "ser/common/png.hpp"
#include "ser/dsp/spectrogram.hpp"


namespace ser::speaker {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr Index kLifterLow = 3;
constexpr Index kLifterHigh = 16;
constexpr std::uint64_t kProjectionSeed = 0x5eed0f707e5bea11ULL;

// Flip each row so that its largest-magnitude entry is positive.
void normalize_signs(MatrixXd& rows) {
  for (Index r = 0; r < rows.rows(); ++r) {
    Index arg = 0;
    rows.row(r).cwiseAbs().maxCoeff(&arg);
    if (rows(r, arg) < 0) rows.row(r) *= -1.0;
  }
}

const MatrixXd& projection_matrix(Index out_dim, Index in_dim) {
  thread_local MatrixXd cached;
  if (cached.rows() != out_dim || cached.cols() != in_dim) {
    std::mt19937_64 rng(kProjectionSeed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    cached.resize(out_dim, in_dim);
    for (Index i = 0; i < out_dim; ++i) {
      for (Index j = 0; j < in_dim; ++j) cached(i, j) = normal(rng);
    }
  }
  return cached;
}

}  // namespace

VectorXd toy_speaker_statistics(const dsp::Waveform& w) {
  const auto mel = dsp::mel_spectrogram(w, dsp::SpectrogramConfig{});
  const Index bands = mel.n_mels();
  const Index frames = mel.n_frames();
  // Cepstral liftering keeps the smooth spectral envelope (formants) and
  // drops overall level, tilt, and the harmonic ripple of the pitch.
  MatrixXd dct(bands, bands);
  for (Index k = 0; k < bands; ++k) {
    const double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(bands));
    for (Index b = 0; b < bands; ++b) {
      dct(k, b) = norm * std::cos(std::numbers::pi * static_cast<double>(k) * (b + 0.5) / static_cast<double>(bands));
    }
  }
  const MatrixXd keep = dct.middleRows(kLifterLow, kLifterHigh - kLifterLow);
  const MatrixXd m = keep.transpose() * (keep * mel.values);

  VectorXd stats(3 * bands);
  const VectorXd mean = m.rowwise().mean();
  const VectorXd var = (m.colwise() - mean).array().square().rowwise().mean();
  VectorXd delta = VectorXd::Zero(bands);
  if (frames > 1) {
    delta = (m.rightCols(frames - 1) - m.leftCols(frames - 1)).cwiseAbs().rowwise().mean();
  }
  // dB values live in [-80, 0]; bring every block to a comparable range.
  const double scale = -mel.config.db_floor;
  stats << mean / scale, var.cwiseSqrt() / scale, delta / scale;
  return stats;
}

VectorXd toy_speaker_encoder(const dsp::Waveform& w, Index out_dim) {
  if (out_dim <= 0) throw ConfigError("embedding dim must be positive");
  const VectorXd stats = toy_speaker_statistics(w);
  return projection_matrix(out_dim, stats.size()) * stats;
}

PcaModel pca_fit(const MatrixXd& x, Index k) {
  const Index n = x.rows();
  const Index d = x.cols();
  if (n < 2) throw ShapeError("PCA needs at least 2 samples, got " + std::to_string(n));
  if (k < 1 || k > std::min(n - 1, d)) {
    throw ConfigError("PCA: k=" + std::to_string(k) + " exceeds min(n-1, d)=" + std::to_string(std::min(n - 1, d)));
  }
  if (!x.allFinite()) throw NumericError("PCA: non-finite input");

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const MatrixXd xc = x.rowwise() - model.mean.transpose();
  const double total = xc.squaredNorm() / static_cast<double>(n - 1);
  if (!(total > 1e-300)) throw NumericError("PCA: degenerate data (all samples identical)");

  VectorXd evals;
  MatrixXd comps(k, d);
  const double denom = static_cast<double>(n - 1);
  if (n < d) {
    const MatrixXd gram = (xc * xc.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw NumericError("PCA: eigendecomposition failed");
    const VectorXd all = es.eigenvalues().reverse();
    const MatrixXd vecs = es.eigenvectors().rowwise().reverse();
    evals = all.head(k).cwiseMax(0.0);
    const double tol = 1e-12 * all(0);
    Index good = 0;
    for (Index i = 0; i < k && all(i) > tol; ++i, ++good) {
      comps.row(i) = (xc.transpose() * vecs.col(i)).transpose() / std::sqrt(denom * all(i));
    }
    // Rank-deficient fit data: complete the basis with any orthonormal directions.
    for (Index j = 0; good < k && j < d; ++j) {
      VectorXd v = VectorXd::Unit(d, j);
      for (int pass = 0; pass < 2; ++pass) {
        v -= comps.topRows(good).transpose() * (comps.topRows(good) * v);
      }
      const double norm = v.norm();
      if (norm > 0.5) {
        comps.row(good) = v.transpose() / norm;
        evals(good) = 0.0;
        ++good;
      }
    }
  } else {
    const MatrixXd cov = (xc.transpose() * xc) / denom;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("PCA: eigendecomposition failed");
    evals = es.eigenvalues().reverse().head(k).cwiseMax(0.0);
    comps = es.eigenvectors().rowwise().reverse().leftCols(k).transpose();
  }
  normalize_signs(comps);
  model.components = std::move(comps);
  model.eigenvalues = std::move(evals);
  return model;
}

VectorXd pca_project(const PcaModel& model, const VectorXd& v) {
  if (v.size() != model.input_dim()) {
    throw ShapeError("pca_project: expected dim " + std::to_string(model.input_dim()) + ", got " +
                     std::to_string(v.size()));
  }
  return model.components * (v - model.mean);
}

MatrixXd pca_project_rows(const PcaModel& model, const MatrixXd& x) {
  if (x.cols() != model.input_dim()) {
    throw ShapeError("pca_project: expected dim " + std::to_string(model.input_dim()) + ", got " +
                     std::to_string(x.cols()));
  }
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

VectorXd pca_reconstruct(const PcaModel& model, const VectorXd& coords) {
  if (coords.size() != model.output_dim()) throw ShapeError("pca_reconstruct: coordinate dim mismatch");
  return model.mean + model.components.transpose() * coords;
}

VectorXd SpeakerReducer::apply(const VectorXd& v) const {
  VectorXd out = VectorXd::Zero(out_dim);
  const VectorXd p = pca_project(pca, v);
  out.head(p.size()) = scale * p;
  return out;
}

SpeakerReducer fit_speaker_reducer(const MatrixXd& x, Index out_dim) {
  if (out_dim < 1) throw ConfigError("reducer output dim must be positive");
  SpeakerReducer r;
  r.out_dim = out_dim;
  const Index k = std::min({out_dim, x.rows() - 1, x.cols()});
  r.pca = pca_fit(x, std::max<Index>(k, 1));
  const double mean_var = r.pca.eigenvalues.mean();
  r.scale = mean_var > 0 ? 1.0 / std::sqrt(mean_var) : 1.0;
  return r;
}

MatrixXd pairwise_distances(const MatrixXd& x) {
  const Index n = x.rows();
  MatrixXd d = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
  }
  return d;
}

MatrixXd mds_embed(const MatrixXd& distances, Index out_dim) {
  const Index n = distances.rows();
  if (n != distances.cols()) throw ShapeError("MDS: distance matrix must be square, got " + std::to_string(n) + "x" + std::to_string(distances.cols()));
  if (n < 1 || out_dim < 1) throw ShapeError("MDS: empty input or output");
  if (!distances.allFinite()) throw NumericError("MDS: non-finite distances");
  const double scale = std::max(1.0, distances.cwiseAbs().maxCoeff());
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw NumericError("MDS: distance matrix is not symmetric");
  }
  if (distances.diagonal().cwiseAbs().maxCoeff() > 1e-9 * scale) throw NumericError("MDS: non-zero diagonal");
  if (distances.minCoeff() < 0) throw NumericError("MDS: negative distance");

  const MatrixXd sq = distances.array().square().matrix();
  const MatrixXd j = MatrixXd::Identity(n, n) - MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const MatrixXd b = -0.5 * j * sq * j;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(b);
  if (es.info() != Eigen::Success) throw NumericError("MDS: eigendecomposition failed");
  const Index k = std::min(out_dim, n);
  MatrixXd coords = MatrixXd::Zero(n, out_dim);
  // Eigenvalues at round-off level relative to the largest are null dimensions.
  const double cutoff = 1e-12 * std::max(0.0, es.eigenvalues()(n - 1));
  for (Index c = 0; c < k; ++c) {
    const Index src = n - 1 - c;
    const double lambda = es.eigenvalues()(src) > cutoff ? es.eigenvalues()(src) : 0.0;
    coords.col(c) = es.eigenvectors().col(src) * std::sqrt(lambda);
  }
  MatrixXd t = coords.transpose();
  normalize_signs(t);
  coords = t.transpose();
  // Remove round-off drift from the centring.
  coords.rowwise() -= coords.colwise().mean();
  return coords;
}

double silhouette_score(const MatrixXd& points, const std::vector<std::string>& labels) {
  const Index n = points.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw ShapeError("silhouette: label count mismatch");
  const MatrixXd d = pairwise_distances(points);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    std::map<std::string, std::pair<double, int>> per;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      auto& e = per[labels[static_cast<std::size_t>(j)]];
      e.first += d(i, j);
      ++e.second;
    }
    const auto& own = labels[static_cast<std::size_t>(i)];
    if (!per.count(own)) continue;  // singleton cluster scores 0
    const double a = per[own].first / per[own].second;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [lab, e] : per) {
      if (lab != own) b = std::min(b, e.first / e.second);
    }
    if (!std::isfinite(b)) throw Error("silhouette: need at least two clusters");
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

void EmbeddingStore::add(SpeakerEmbedding e) {
  if (dim_ == 0) dim_ = e.vector.size();
  if (e.vector.size() != dim_) {
    throw ShapeError("embedding '" + e.utterance_id + "' has dim " + std::to_string(e.vector.size()) +
                     ", store dim is " + std::to_string(dim_));
  }
  if (!e.vector.allFinite()) throw NumericError("embedding '" + e.utterance_id + "' has non-finite entries");
  if (find(e.utterance_id)) throw Error("duplicate embedding id '" + e.utterance_id + "'");
  records_.push_back(std::move(e));
}

const SpeakerEmbedding* EmbeddingStore::find(const std::string& id) const {
  for (const auto& r : records_) {
    if (r.utterance_id == id) return &r;
  }
  return nullptr;
}

const SpeakerEmbedding& EmbeddingStore::at(const std::string& id) const {
  if (const auto* r = find(id)) return *r;
  throw IndexError("no speaker embedding for '" + id + "'");
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  io::write_uint<std::uint64_t>(os, records_.size());
  io::write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(dim_));
  for (const auto& r : records_) {
    if (r.vector.size() != dim_) throw ShapeError("embedding '" + r.utterance_id + "' has inconsistent dim");
    io::write_string(os, r.utterance_id);
    for (Index i = 0; i < dim_; ++i) io::write_f64(os, r.vector(i));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open embedding store " + path.string());
  const auto count = io::read_uint<std::uint64_t>(is);
  const auto dim = io::read_uint<std::uint64_t>(is);
  if (dim > (1u << 24)) throw IoError("embedding store: implausible dim " + std::to_string(dim));
  EmbeddingStore store(static_cast<Index>(dim));
  for (std::uint64_t r = 0; r < count; ++r) {
    SpeakerEmbedding e;
    try {
      e.utterance_id = io::read_string(is, 1u << 16);
      e.vector.resize(static_cast<Index>(dim));
      for (std::uint64_t i = 0; i < dim; ++i) e.vector(static_cast<Index>(i)) = io::read_f64(is);
    } catch (const IoError& err) {
      throw IoError("embedding store " + path.string() + ": record " + std::to_string(r) +
                    " truncated or has inconsistent dim (" + err.what() + ")");
    }
    store.add(std::move(e));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw IoError("embedding store " + path.string() + ": trailing bytes (records with inconsistent dim?)");
  }
  return store;
}

void save_mds_csv(const std::filesystem::path& path, const std::vector<MdsPoint>& points) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.precision(17);
  os << "id,speaker,x,y\n";
  for (const auto& p : points) os << csv::field(p.id) << ',' << csv::field(p.speaker) << ',' << p.x << ',' << p.y << '\n';
}

void save_mds_png(const std::filesystem::path& path, const std::vector<MdsPoint>& points, int size) {
  if (size < 16) throw ConfigError("plot size too small");
  static constexpr std::array<std::array<unsigned char, 3>, 10> kPalette = {{{31, 119, 180},
                                                                             {255, 127, 14},
                                                                             {44, 160, 44},
                                                                             {214, 39, 40},
                                                                             {148, 103, 189},
                                                                             {140, 86, 75},
                                                                             {227, 119, 194},
                                                                             {127, 127, 127},
                                                                             {188, 189, 34},
                                                                             {23, 190, 207}}};
  std::vector<std::uint8_t> img(static_cast<std::size_t>(size) * size * 3, 255);
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points[0].x;
    ymin = ymax = points[0].y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
  std::map<std::string, std::size_t> colour;
  const int margin = size / 16;
  for (const auto& p : points) {
    const auto [it, fresh] = colour.emplace(p.speaker, colour.size());
    const auto& rgb = kPalette[it->second % kPalette.size()];
    const int cx = margin + static_cast<int>((p.x - xmin) / span * (size - 2 * margin));
    const int cy = size - 1 - margin - static_cast<int>((p.y - ymin) / span * (size - 2 * margin));
    for (int dy = -3; dy <= 3; ++dy) {
      for (int dx = -3; dx <= 3; ++dx) {
        const int x = cx + dx, y = cy + dy;
        if (dx * dx + dy * dy > 9 || x < 0 || y < 0 || x >= size || y >= size) continue;
        std::copy(rgb.begin(), rgb.end(), img.begin() + (static_cast<std::ptrdiff_t>(y) * size + x) * 3);
      }
    }
  }
  io::save_png(path, size, size, 3, img);
}

}  // namespace ser::speaker
