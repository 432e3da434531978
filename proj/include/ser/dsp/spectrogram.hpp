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

#include <Eigen/Dense>

#include <filesystem>

#include "ser/dsp/waveform.hpp"
#include "ser/nn/tensor.hpp"

namespace ser::dsp {

/// Framing, filterbank and dB parameters for log-Mel extraction.
struct SpectrogramConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  double window_alpha = 0.54;  ///< Hamming: alpha - beta cos(2 pi n / (N - 1))
  double window_beta = 0.46;
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = 0.0;   ///< 0 means Nyquist
  int fft_size = 0;    ///< 0 means next power of two >= window length
  double amin = 1e-10;
  double db_floor = -80.0;

  int window_length(int sample_rate) const;
  int hop_length(int sample_rate) const;
  int resolved_fft_size(int sample_rate) const;
  double resolved_fmax(int sample_rate) const;
  void validate(int sample_rate) const;
};

/// Log-Mel matrix [n_mels x n_frames] in dB relative to its own maximum.
struct MelSpectrogram {
  Eigen::MatrixXd values;
  SpectrogramConfig config;
  int sample_rate = 0;

  Eigen::Index n_mels() const { return values.rows(); }
  Eigen::Index n_frames() const { return values.cols(); }
};

/// Fixed-size network input: pixels [3 x H x W] in [0, 1].
struct SpectrogramImage {
  nn::TensorD pixels;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Number of full frames: floor((length - window) / hop) + 1, or 0 if too short.
Eigen::Index frame_count(Eigen::Index length, Eigen::Index window, Eigen::Index hop);

Eigen::VectorXd hamming_window(int length, double alpha = 0.54, double beta = 0.46);

/// One-sided power spectrum per frame: [fft_size/2 + 1 x n_frames].
Eigen::MatrixXd stft_power(const Waveform& w, const SpectrogramConfig& cfg);

/// Triangular filters with centers equally spaced in HTK mel: [n_mels x fft_size/2 + 1].
Eigen::MatrixXd mel_filterbank(const SpectrogramConfig& cfg, int sample_rate);

/// Center frequencies (Hz) of the filters built by mel_filterbank.
Eigen::VectorXd mel_center_frequencies(const SpectrogramConfig& cfg, int sample_rate);

MelSpectrogram mel_spectrogram(const Waveform& w, const SpectrogramConfig& cfg);

/// Maps [db_floor, 0] dB to [0, 1], bilinearly resizes, replicates to 3 channels.
SpectrogramImage spectrogram_to_image(const MelSpectrogram& m, int height = 224, int width = 224);

/// Bilinear resize with half-pixel centers; identity when sizes match.
Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& src, Eigen::Index height, Eigen::Index width);

/// Little-endian float matrix file: u32 n_mels, u32 n_frames, then row-major float64.
void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

/// Greyscale PNG of a [0, 1] matrix; row 0 is drawn at the bottom when `flip` is set.
void save_png(const std::filesystem::path& path, const Eigen::MatrixXd& unit, bool flip = true);

}  // namespace ser::dsp
