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

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "ser/dsp/spectrogram.hpp"
#include "ser/dsp/waveform.hpp"
#include "support/temp_dir.hpp"

namespace ser::dsp {
namespace {

using testing::TempDir;

Waveform sine(double hz, double seconds, int rate = 16000, double amp = 0.5) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<Eigen::Index>(std::lround(seconds * rate)));
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) w.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / rate);
  return w;
}

// Power spectrum of every frame by the O(N^2) definition.
Eigen::MatrixXd naive_power(const Waveform& w, const SpectrogramConfig& cfg) {
  const int win = cfg.window_length(w.sample_rate), hop = cfg.hop_length(w.sample_rate);
  const int nfft = cfg.resolved_fft_size(w.sample_rate);
  const Eigen::Index frames = (w.size() - win) / hop + 1;
  Eigen::MatrixXd p(nfft / 2 + 1, frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int k = 0; k <= nfft / 2; ++k) {
      std::complex<double> acc = 0;
      for (int n = 0; n < win; ++n) {
        const double wn = 0.54 - 0.46 * std::cos(2 * std::numbers::pi * n / (win - 1));
        acc += w.samples[t * hop + n] * wn * std::polar(1.0, -2 * std::numbers::pi * k * n / nfft);
      }
      p(k, t) = std::norm(acc);
    }
  }
  return p;
}

Eigen::Index nearest_center(const SpectrogramConfig& cfg, int rate, double hz) {
  const Eigen::VectorXd edges = mel_center_frequencies(cfg, rate);
  Eigen::Index best = 0;
  (edges.segment(1, cfg.n_mels).array() - hz).abs().minCoeff(&best);
  return best;
}

TEST(Wav, RoundTripIsWithinQuantisation) {
  TempDir dir;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  Waveform w;
  w.sample_rate = 22050;
  w.samples = Eigen::VectorXd::NullaryExpr(1000, [&] { return u(rng); });
  save_wav(dir / "a.wav", w);
  const Waveform r = load_wav(dir / "a.wav");
  EXPECT_EQ(r.sample_rate, 22050);
  ASSERT_EQ(r.size(), 1000);
  EXPECT_LT((r.samples - w.samples).cwiseAbs().maxCoeff(), 1.0 / 32768 + 1e-12);
}

TEST(Wav, ClipsOutOfRangeSamples) {
  TempDir dir;
  Waveform w;
  w.samples = Eigen::VectorXd::Constant(4, 3.0);
  w.samples[1] = -7.0;
  save_wav(dir / "c.wav", w);
  const Waveform r = load_wav(dir / "c.wav");
  EXPECT_NEAR(r.samples[0], 32767.0 / 32768, 1e-12);
  EXPECT_EQ(r.samples[1], -1.0);
}

std::string le16(unsigned v) { return {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)}; }
std::string le32(std::uint32_t v) { return le16(v & 0xffff) + le16(v >> 16); }

std::string wav_bytes(unsigned format, unsigned channels, unsigned bits, const std::string& data) {
  const unsigned block = channels * bits / 8;
  std::string fmt = le16(format) + le16(channels) + le32(8000) + le32(8000 * block) + le16(block) + le16(bits);
  return "RIFF" + le32(static_cast<std::uint32_t>(28 + fmt.size() + data.size())) + "WAVE" + "fmt " + le32(16) +
         fmt + "LIST" + le32(3) + "abc" + std::string(1, '\0') + "data" +
         le32(static_cast<std::uint32_t>(data.size())) + data;
}

TEST(Wav, StereoFloatIsDownmixedAndOddChunksSkipped) {
  TempDir dir;
  auto f32 = [](float f) { return le32(std::bit_cast<std::uint32_t>(f)); };
  testing::write_file(dir / "s.wav", wav_bytes(3, 2, 32, f32(0.5f) + f32(-0.25f) + f32(1.0f) + f32(0.0f)));
  const Waveform w = load_wav(dir / "s.wav");
  EXPECT_EQ(w.sample_rate, 8000);
  ASSERT_EQ(w.size(), 2);
  EXPECT_DOUBLE_EQ(w.samples[0], 0.125);
  EXPECT_DOUBLE_EQ(w.samples[1], 0.5);
}

TEST(Wav, EightBitPcmIsCentered) {
  TempDir dir;
  testing::write_file(dir / "b.wav", wav_bytes(1, 1, 8, std::string("\x80\x00\xc0", 3)));
  const Waveform w = load_wav(dir / "b.wav");
  ASSERT_EQ(w.size(), 3);
  EXPECT_EQ(w.samples[0], 0.0);
  EXPECT_EQ(w.samples[1], -1.0);
  EXPECT_EQ(w.samples[2], 0.5);
}

TEST(Wav, ErrorsAreClassified) {
  TempDir dir;
  auto kind_of = [](const std::filesystem::path& p) {
    try {
      load_wav(p);
    } catch (const WavError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error for " << p;
    return WavError::Kind::NotFound;
  };
  EXPECT_EQ(kind_of(dir / "missing.wav"), WavError::Kind::NotFound);
  testing::write_file(dir / "junk.wav", "not a wav file at all");
  EXPECT_EQ(kind_of(dir / "junk.wav"), WavError::Kind::Malformed);
  testing::write_file(dir / "short.wav", "RIFF");
  EXPECT_EQ(kind_of(dir / "short.wav"), WavError::Kind::Malformed);
  testing::write_file(dir / "mulaw.wav", wav_bytes(7, 1, 8, "abc"));
  EXPECT_EQ(kind_of(dir / "mulaw.wav"), WavError::Kind::UnsupportedCodec);
  testing::write_file(dir / "pcm24.wav", wav_bytes(1, 1, 24, "abcdef"));
  EXPECT_EQ(kind_of(dir / "pcm24.wav"), WavError::Kind::UnsupportedCodec);
  EXPECT_THROW(load_wav(dir / "junk.wav"), IoError);
}

TEST(FitDuration, PadsAndCropsAroundTheCenter) {
  Waveform w;
  w.sample_rate = 10;
  w.samples = Eigen::VectorXd::LinSpaced(6, 1, 6);
  const Waveform padded = fit_duration(w, 1.0);
  ASSERT_EQ(padded.size(), 10);
  EXPECT_EQ(padded.samples[1], 0.0);
  EXPECT_EQ(padded.samples[2], 1.0);
  EXPECT_EQ(padded.samples[7], 6.0);
  const Waveform cropped = fit_duration(w, 0.4);
  ASSERT_EQ(cropped.size(), 4);
  EXPECT_EQ(cropped.samples[0], 2.0);
  EXPECT_THROW(fit_duration(w, 0.0), ConfigError);
}

TEST(FrameCount, MatchesFormulaForRandomLengths) {
  std::mt19937_64 rng(3);
  SpectrogramConfig cfg;
  const int rate = 16000;
  const int win = cfg.window_length(rate), hop = cfg.hop_length(rate);
  EXPECT_EQ(win, 400);
  EXPECT_EQ(hop, 160);
  std::uniform_int_distribution<int> len(win, 3 * rate);
  for (int i = 0; i < 500; ++i) {
    Waveform w;
    w.sample_rate = rate;
    w.samples = Eigen::VectorXd::Zero(len(rng));
    const auto expected = (w.size() - win) / hop + 1;
    ASSERT_EQ(frame_count(w.size(), win, hop), expected);
    ASSERT_EQ(stft_power(w, cfg).cols(), expected) << w.size();
  }
  EXPECT_EQ(frame_count(399, 400, 160), 0);
}

TEST(Stft, RejectsShortAndNonFiniteInput) {
  SpectrogramConfig cfg;
  Waveform w;
  w.samples = Eigen::VectorXd::Zero(399);
  EXPECT_THROW(stft_power(w, cfg), ShapeError);
  w.samples = Eigen::VectorXd::Zero(400);
  w.samples[3] = std::nan("");
  EXPECT_THROW(stft_power(w, cfg), NumericError);
}

TEST(Stft, MatchesNaiveDft) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Waveform w;
  w.samples = Eigen::VectorXd::NullaryExpr(1200, [&] { return g(rng); });
  SpectrogramConfig cfg;
  const Eigen::MatrixXd fast = stft_power(w, cfg), slow = naive_power(w, cfg);
  ASSERT_EQ(fast.rows(), 257);
  EXPECT_LT((fast - slow).cwiseAbs().maxCoeff() / slow.maxCoeff(), 1e-10);
}

TEST(Stft, ZeroInputGivesZeroPower) {
  Waveform w;
  w.samples = Eigen::VectorXd::Zero(4000);
  EXPECT_EQ(stft_power(w, SpectrogramConfig{}).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Hamming, MatchesDefinition) {
  const auto w = hamming_window(5);
  EXPECT_NEAR(w[0], 0.08, 1e-15);
  EXPECT_NEAR(w[2], 1.0, 1e-15);
  EXPECT_NEAR(w[4], 0.08, 1e-15);
  EXPECT_NEAR(w[1], w[3], 1e-15);
  EXPECT_EQ(hamming_window(1)[0], 1.0);
}

TEST(MelScale, IsHtkAndInvertible) {
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
  for (double hz : {0.0, 100.0, 1000.0, 7999.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
}

TEST(MelFilterbank, DefaultHas128NonNegativeBands) {
  SpectrogramConfig cfg;
  const Eigen::MatrixXd fb = mel_filterbank(cfg, 16000);
  EXPECT_EQ(fb.rows(), 128);
  EXPECT_EQ(fb.cols(), 257);
  EXPECT_GE(fb.minCoeff(), 0.0);
  EXPECT_LE(fb.maxCoeff(), 1.0);
  const Eigen::VectorXd c = mel_center_frequencies(cfg, 16000);
  EXPECT_EQ(c.size(), 130);
  EXPECT_EQ(c[0], 0.0);
  EXPECT_NEAR(c[129], 8000.0, 1e-9);
  for (Eigen::Index i = 1; i < c.size(); ++i) EXPECT_GT(c[i], c[i - 1]);
  // At 31.25 Hz bin spacing only the lowest, narrowest bands can miss every bin.
  EXPECT_GT(fb.bottomRows(100).rowwise().sum().minCoeff(), 0.0);
}

TEST(MelFilterbank, InvalidConfigsThrow) {
  SpectrogramConfig cfg;
  cfg.fmax = 9000;
  EXPECT_THROW(mel_filterbank(cfg, 16000), ConfigError);
  cfg = {};
  cfg.n_mels = 1;
  EXPECT_THROW(mel_filterbank(cfg, 16000), ConfigError);
  cfg = {};
  cfg.fft_size = 256;
  EXPECT_THROW(mel_filterbank(cfg, 16000), ConfigError);
  cfg = {};
  EXPECT_THROW(mel_filterbank(cfg, 0), ConfigError);
}

TEST(MelSpectrogram, OneKilohertzPeaksInNearestBand) {
  SpectrogramConfig cfg;
  const Waveform w = sine(1000.0, 0.5);
  const MelSpectrogram m = mel_spectrogram(w, cfg);
  ASSERT_EQ(m.n_mels(), 128);
  Eigen::Index ours = 0, oracle = 0;
  m.values.rowwise().mean().maxCoeff(&ours);
  (mel_filterbank(cfg, 16000) * naive_power(w, cfg)).rowwise().mean().maxCoeff(&oracle);
  EXPECT_EQ(ours, oracle);
  EXPECT_EQ(ours, nearest_center(cfg, 16000, 1000.0));
}

TEST(MelSpectrogram, PeakBandTracksFrequency) {
  SpectrogramConfig cfg;
  cfg.n_mels = 40;
  Eigen::Index prev = -1;
  for (double hz = 150; hz < 7800; hz *= 1.15) {
    const MelSpectrogram m = mel_spectrogram(sine(hz, 0.2), cfg);
    Eigen::Index band = 0;
    m.values.rowwise().mean().maxCoeff(&band);
    EXPECT_LE(std::abs(band - nearest_center(cfg, 16000, hz)), 1) << hz;
    EXPECT_GE(band, prev) << hz;
    prev = band;
  }
}

TEST(MelSpectrogram, DbIsRelativeToMaxAndFloored) {
  const MelSpectrogram m = mel_spectrogram(sine(440.0, 0.3), SpectrogramConfig{});
  EXPECT_NEAR(m.values.maxCoeff(), 0.0, 1e-12);
  EXPECT_GE(m.values.minCoeff(), -80.0);
  Waveform silent;
  silent.samples = Eigen::VectorXd::Zero(8000);
  const MelSpectrogram s = mel_spectrogram(silent, SpectrogramConfig{});
  EXPECT_TRUE((s.values.array() == -80.0).all());
}

TEST(MelSpectrogram, ScaleInvariant) {
  const Waveform a = sine(300.0, 0.3, 16000, 0.1), b = sine(300.0, 0.3, 16000, 0.8);
  const auto ma = mel_spectrogram(a, SpectrogramConfig{}), mb = mel_spectrogram(b, SpectrogramConfig{});
  EXPECT_LT((ma.values - mb.values).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SpectrogramImage, HasThreeIdenticalUnitChannels) {
  const MelSpectrogram m = mel_spectrogram(sine(500.0, 1.0), SpectrogramConfig{});
  const auto img = spectrogram_to_image(m, 224, 224);
  ASSERT_EQ(img.pixels.shape(), (std::vector<Eigen::Index>{3, 224, 224}));
  EXPECT_GE(img.pixels.data().minCoeff(), 0.0);
  EXPECT_LE(img.pixels.data().maxCoeff(), 1.0);
  const Eigen::Index plane = 224 * 224;
  EXPECT_EQ(img.pixels.data().segment(0, plane), img.pixels.data().segment(plane, plane));
  EXPECT_EQ(img.pixels.data().segment(0, plane), img.pixels.data().segment(2 * plane, plane));
}

TEST(Resize, IdentityAndConstantPreservation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  const Eigen::MatrixXd src = Eigen::MatrixXd::NullaryExpr(7, 9, [&] { return u(rng); });
  EXPECT_EQ(resize_bilinear(src, 7, 9), src);
  const Eigen::MatrixXd flat = resize_bilinear(Eigen::MatrixXd::Constant(3, 5, 0.25), 11, 4);
  EXPECT_LT((flat.array() - 0.25).abs().maxCoeff(), 1e-15);
  const Eigen::MatrixXd up = resize_bilinear(src, 30, 31);
  EXPECT_LE(up.maxCoeff(), src.maxCoeff() + 1e-15);
  EXPECT_GE(up.minCoeff(), src.minCoeff() - 1e-15);
  EXPECT_THROW(resize_bilinear(src, 0, 3), ShapeError);
  EXPECT_THROW(resize_bilinear(Eigen::MatrixXd(), 3, 3), ShapeError);
}

TEST(MatrixFile, RoundTripsExactly) {
  TempDir dir;
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(5, 3);
  save_matrix(dir / "m.bin", m);
  EXPECT_EQ(std::filesystem::file_size(dir / "m.bin"), 8u + 15u * 8u);
  EXPECT_EQ(load_matrix(dir / "m.bin"), m);
  testing::write_file(dir / "t.bin", testing::read_file(dir / "m.bin").substr(0, 40));
  EXPECT_THROW(load_matrix(dir / "t.bin"), IoError);
}

TEST(Png, WritesSignature) {
  TempDir dir;
  save_png(dir / "x.png", Eigen::MatrixXd::Constant(4, 6, 0.5));
  const std::string bytes = testing::read_file(dir / "x.png");
  ASSERT_GT(bytes.size(), 8u);
  EXPECT_EQ(bytes.substr(1, 3), "PNG");
  EXPECT_THROW(save_png(dir / "e.png", Eigen::MatrixXd()), ShapeError);
}

}  // namespace
}  // namespace ser::dsp
