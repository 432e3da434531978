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

#include "ser/dsp/spectrogram.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <vector>

#include "ser/common/binary_io.hpp"
#include "ser/common/png.hpp"

namespace ser::dsp {

int SpectrogramConfig::window_length(int sample_rate) const {
  return static_cast<int>(std::lround(sample_rate * window_ms / 1000.0));
}

int SpectrogramConfig::hop_length(int sample_rate) const {
  return static_cast<int>(std::lround(sample_rate * hop_ms / 1000.0));
}

int SpectrogramConfig::resolved_fft_size(int sample_rate) const {
  if (fft_size > 0) return fft_size;
  int n = 1;
  while (n < window_length(sample_rate)) n <<= 1;
  return n;
}

double SpectrogramConfig::resolved_fmax(int sample_rate) const {
  return fmax > 0.0 ? fmax : sample_rate / 2.0;
}

void SpectrogramConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (window_length(sample_rate) < 2 || hop_length(sample_rate) < 1) {
    throw ConfigError("window must span >= 2 samples and hop >= 1 sample");
  }
  if (resolved_fft_size(sample_rate) < window_length(sample_rate)) {
    throw ConfigError("fft_size " + std::to_string(fft_size) + " shorter than the window");
  }
  if (n_mels < 2) throw ConfigError("n_mels must be >= 2");
  const double nyquist = sample_rate / 2.0;
  const double hi = resolved_fmax(sample_rate);
  if (fmin < 0.0 || fmin >= hi) throw ConfigError("need 0 <= fmin < fmax");
  if (hi > nyquist) {
    throw ConfigError("fmax " + std::to_string(hi) + " Hz exceeds Nyquist " + std::to_string(nyquist) + " Hz");
  }
  if (!(amin > 0.0) || !(db_floor < 0.0)) throw ConfigError("amin must be > 0 and db_floor < 0");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::Index frame_count(Eigen::Index length, Eigen::Index window, Eigen::Index hop) {
  if (length < window) return 0;
  return (length - window) / hop + 1;
}

Eigen::VectorXd hamming_window(int length, double alpha, double beta) {
  Eigen::VectorXd w(length);
  if (length == 1) {
    w[0] = 1.0;
    return w;
  }
  for (int n = 0; n < length; ++n) {
    w[n] = alpha - beta * std::cos(2.0 * std::numbers::pi * n / (length - 1));
  }
  return w;
}

Eigen::MatrixXd stft_power(const Waveform& w, const SpectrogramConfig& cfg) {
  cfg.validate(w.sample_rate);
  const int win = cfg.window_length(w.sample_rate);
  const int hop = cfg.hop_length(w.sample_rate);
  const int nfft = cfg.resolved_fft_size(w.sample_rate);
  if (w.samples.size() < win) {
    throw ShapeError("stft: need at least " + std::to_string(win) + " samples (one " +
                     std::to_string(cfg.window_ms) + " ms window), got " + std::to_string(w.samples.size()));
  }
  if (!w.samples.allFinite()) throw NumericError("stft: non-finite samples");

  const Eigen::Index frames = frame_count(w.samples.size(), win, hop);
  const Eigen::VectorXd window = hamming_window(win, cfg.window_alpha, cfg.window_beta);
  const int bins = nfft / 2 + 1;
  Eigen::MatrixXd power(bins, frames);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(nfft), 0.0);
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int n = 0; n < win; ++n) frame[static_cast<std::size_t>(n)] = w.samples[t * hop + n] * window[n];
    fft.fwd(spectrum, frame);
    for (int k = 0; k < bins; ++k) power(k, t) = std::norm(spectrum[static_cast<std::size_t>(k)]);
  }
  return power;
}

Eigen::VectorXd mel_center_frequencies(const SpectrogramConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.resolved_fmax(sample_rate));
  Eigen::VectorXd hz(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) hz[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  return hz;
}

Eigen::MatrixXd mel_filterbank(const SpectrogramConfig& cfg, int sample_rate) {
  const Eigen::VectorXd edges = mel_center_frequencies(cfg, sample_rate);
  const int nfft = cfg.resolved_fft_size(sample_rate);
  const int bins = nfft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / nfft;
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      fb(m, k) = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const SpectrogramConfig& cfg) {
  const Eigen::MatrixXd power = stft_power(w, cfg);
  const Eigen::MatrixXd mel = mel_filterbank(cfg, w.sample_rate) * power;
  MelSpectrogram out{Eigen::MatrixXd::Constant(mel.rows(), mel.cols(), cfg.db_floor), cfg, w.sample_rate};
  const double ref = mel.maxCoeff();
  if (ref <= cfg.amin) return out;  // silence
  for (Eigen::Index i = 0; i < mel.size(); ++i) {
    const double x = mel.data()[i];
    if (x > cfg.amin) out.values.data()[i] = std::max(cfg.db_floor, 10.0 * std::log10(x / ref));
  }
  return out;
}

Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& src, Eigen::Index height, Eigen::Index width) {
  if (src.size() == 0) throw ShapeError("resize: empty input");
  if (height <= 0 || width <= 0) throw ShapeError("resize: target must be positive");
  const auto sample_axis = [](Eigen::Index out_i, Eigen::Index in_n, Eigen::Index out_n, Eigen::Index& i0,
                              Eigen::Index& i1, double& frac) {
    double pos = (out_i + 0.5) * static_cast<double>(in_n) / static_cast<double>(out_n) - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(in_n - 1));
    i0 = static_cast<Eigen::Index>(std::floor(pos));
    i1 = std::min(i0 + 1, in_n - 1);
    frac = pos - static_cast<double>(i0);
  };
  Eigen::MatrixXd out(height, width);
  for (Eigen::Index y = 0; y < height; ++y) {
    Eigen::Index y0, y1;
    double fy;
    sample_axis(y, src.rows(), height, y0, y1, fy);
    for (Eigen::Index x = 0; x < width; ++x) {
      Eigen::Index x0, x1;
      double fx;
      sample_axis(x, src.cols(), width, x0, x1, fx);
      const double top = src(y0, x0) * (1.0 - fx) + src(y0, x1) * fx;
      const double bottom = src(y1, x0) * (1.0 - fx) + src(y1, x1) * fx;
      out(y, x) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

SpectrogramImage spectrogram_to_image(const MelSpectrogram& m, int height, int width) {
  if (m.values.size() == 0) throw ShapeError("spectrogram_to_image: empty spectrogram");
  const double floor_db = m.config.db_floor;
  const Eigen::MatrixXd unit = ((m.values.array() - floor_db) / -floor_db).cwiseMax(0.0).cwiseMin(1.0).matrix();
  const Eigen::MatrixXd resized = resize_bilinear(unit, height, width).cwiseMax(0.0).cwiseMin(1.0);
  SpectrogramImage img{nn::TensorD({3, height, width})};
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        img.pixels.data()[(static_cast<Eigen::Index>(c) * height + y) * width + x] = resized(y, x);
      }
    }
  }
  return img;
}

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  io::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
  io::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) io::write_f64(os, m(r, c));
  }
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const auto rows = io::read_uint<std::uint32_t>(is);
  const auto cols = io::read_uint<std::uint32_t>(is);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = io::read_f64(is);
  }
  return m;
}

void save_png(const std::filesystem::path& path, const Eigen::MatrixXd& unit, bool flip) {
  if (unit.size() == 0) throw ShapeError("cannot save an empty image");
  std::vector<std::uint8_t> px(static_cast<std::size_t>(unit.size()));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    const Eigen::Index src = flip ? unit.rows() - 1 - r : r;
    for (Eigen::Index c = 0; c < unit.cols(); ++c) {
      px[k++] = static_cast<std::uint8_t>(std::lround(std::clamp(unit(src, c), 0.0, 1.0) * 255.0));
    }
  }
  io::save_png(path, static_cast<int>(unit.cols()), static_cast<int>(unit.rows()), 1, px);
}

}  // namespace ser::dsp
