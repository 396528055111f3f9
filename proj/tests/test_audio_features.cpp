// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "stutterkit/audio.hpp"
#include "stutterkit/errors.hpp"
#include "stutterkit/features.hpp"
#include "test_util.hpp"

namespace sk {
namespace {

namespace fs = std::filesystem;
using std::numbers::pi;

std::vector<double> sine(double freq, int rate, std::size_t n, double amp = 0.5) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * pi * freq * static_cast<double>(i) / rate);
  return x;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = amp * rng.uniform(-1.0, 1.0);
  return x;
}

TEST(Wav, Pcm16RoundTripWithinQuantization) {
  const auto dir = sk::testing::temp_dir("wav16");
  const Waveform w{noise(1000, 1, 0.9), 16000};
  write_wav(dir / "a.wav", w);
  const DecodedAudio d = read_wav(dir / "a.wav");
  ASSERT_EQ(d.channels.size(), 1u);
  EXPECT_EQ(d.sample_rate, 16000);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(d.channels[0][i], w.samples[i], 0.5 / 32768.0);
}

TEST(Wav, Float32RoundTripIsExactForFloats) {
  const auto dir = sk::testing::temp_dir("wavf");
  Waveform w{noise(500, 2), 22050};
  for (auto& v : w.samples) v = static_cast<float>(v);
  write_wav(dir / "a.wav", w, WavEncoding::Float32);
  const DecodedAudio d = read_wav(dir / "a.wav");
  EXPECT_EQ(d.channels[0], w.samples);
  EXPECT_EQ(d.sample_rate, 22050);
}

TEST(Wav, RejectsMissingAndCorruptFiles) {
  const auto dir = sk::testing::temp_dir("wavbad");
  EXPECT_THROW(read_wav(dir / "none.wav"), DecodeError);
  std::ofstream(dir / "junk.wav") << "RIFF1234WAVEjunkjunkjunk";
  EXPECT_THROW(read_wav(dir / "junk.wav"), DecodeError);
  write_wav(dir / "empty.wav", Waveform{{}, 16000});
  EXPECT_THROW(load_audio(dir / "empty.wav"), EmptyInputError);
}

TEST(LoadAudio, ResamplesToTargetRatePreservingDuration) {
  const auto dir = sk::testing::temp_dir("resample");
  write_wav(dir / "a.wav", Waveform{sine(440.0, 44100, 3 * 44100), 44100}, WavEncoding::Float32);
  const Waveform w = load_audio(dir / "a.wav");
  EXPECT_EQ(w.sample_rate, 16000);
  EXPECT_EQ(w.size(), 48000u);
  // Away from the edges the band-limited resampler reproduces the tone.
  const auto ref = sine(440.0, 16000, 48000);
  for (std::size_t i = 1000; i < 47000; i += 37) EXPECT_NEAR(w.samples[i], ref[i], 2e-3);
}

TEST(LoadAudio, NativeRateIsPassThrough) {
  const auto dir = sk::testing::temp_dir("passthrough");
  write_wav(dir / "a.wav", Waveform{noise(1600, 3), 16000});
  const Waveform w = load_audio(dir / "a.wav");
  EXPECT_EQ(w.samples, read_wav(dir / "a.wav").channels[0]);
}

TEST(LoadAudio, StereoIsChannelAverage) {
  const auto dir = sk::testing::temp_dir("stereo");
  DecodedAudio st{{noise(800, 4, 1.0), noise(800, 5, 1.0)}, 16000};
  write_wav(dir / "s.wav", st, WavEncoding::Float32);
  const DecodedAudio d = read_wav(dir / "s.wav");
  const Waveform w = load_audio(dir / "s.wav");
  ASSERT_EQ(w.size(), 800u);
  for (std::size_t i = 0; i < 800; ++i) {
    EXPECT_EQ(w.samples[i], (d.channels[0][i] + d.channels[1][i]) / 2.0);
  }
  EXPECT_LE(peak_abs(w.samples), 1.0);
}

TEST(LoadAudio, SegmentCut) {
  const auto dir = sk::testing::temp_dir("segment");
  std::vector<double> x(32000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 1000) / 2000.0;
  write_wav(dir / "a.wav", Waveform{x, 16000}, WavEncoding::Float32);
  const Waveform w = load_audio_segment(dir / "a.wav", 0.5, 0.25);
  ASSERT_EQ(w.size(), 4000u);
  EXPECT_FLOAT_EQ(static_cast<float>(w.samples[0]), static_cast<float>(x[8000]));
  EXPECT_EQ(load_audio_segment(dir / "a.wav", 1.5, 0.0).size(), 8000u);
}

TEST(Resample, IdentityAndLength) {
  const auto x = noise(1234, 6);
  EXPECT_EQ(resample(x, 16000, 16000), x);
  EXPECT_EQ(resample(x, 48000, 16000).size(), 1234u * 16000 / 48000);
  EXPECT_EQ(resample(x, 8000, 16000).size(), 2468u);
}

TEST(Mfcc, FrameCountLaw) {
  EXPECT_EQ(frame_count(48000, 320, 160), 299);
  for (std::size_t L = 0; L < 2000; L += 7) {
    const Eigen::Index expected = L < 320 ? 0 : 1 + static_cast<Eigen::Index>((L - 320) / 160);
    EXPECT_EQ(frame_count(L, 320, 160), expected);
  }
  const FeatureMatrix f = mfcc(Waveform{noise(48000, 7), 16000}, FeatureConfig{});
  EXPECT_EQ(f.frames(), 299);
  EXPECT_EQ(f.dim(), 20);
}

TEST(Mfcc, TooShortClip) {
  EXPECT_THROW(mfcc(Waveform{noise(319, 8), 16000}, FeatureConfig{}), TooShortError);
}

TEST(Mfcc, SilenceIsConstant) {
  FeatureConfig raw;
  raw.cmn = false;
  const FeatureMatrix a = mfcc(Waveform{std::vector<double>(8000, 0.0), 16000}, raw);
  for (Eigen::Index t = 1; t < a.frames(); ++t) EXPECT_LT((a.values.row(t) - a.values.row(0)).cwiseAbs().maxCoeff(), 1e-9);
  const FeatureMatrix b = mfcc(Waveform{std::vector<double>(8000, 0.0), 16000}, FeatureConfig{});
  EXPECT_LT(b.values.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Mfcc, StationarySineGivesConstantFrames) {
  FeatureConfig raw;
  raw.cmn = false;
  const FeatureMatrix f = mfcc(Waveform{sine(1000.0, 16000, 16000), 16000}, raw);
  for (Eigen::Index t = 2; t < f.frames() - 1; ++t) {
    for (Eigen::Index c = 0; c < f.dim(); ++c) {
      EXPECT_LE(std::abs(f.values(t, c) - f.values(1, c)), 1e-3 * std::max(1.0, std::abs(f.values(1, c))));
    }
  }
}

TEST(Mfcc, CmnZeroMeanAndIdempotent) {
  const FeatureMatrix f = mfcc(Waveform{noise(16000, 9), 16000}, FeatureConfig{});
  EXPECT_LT(f.values.colwise().mean().cwiseAbs().maxCoeff(), 1e-6);
  RowMatrix twice = f.values;
  apply_cmn(twice);
  EXPECT_LT((twice - f.values).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Mfcc, GainShiftsOnlyCoefficientZero) {
  const auto x = noise(16000, 10);
  auto y = x;
  const double c = 3.7;
  for (auto& v : y) v *= c;
  FeatureConfig raw;
  raw.cmn = false;
  const RowMatrix d = mfcc(Waveform{y, 16000}, raw).values - mfcc(Waveform{x, 16000}, raw).values;
  // log(c) on every mel band becomes sqrt(n_mels) * log(c) in the orthonormal c0.
  EXPECT_LT((d.col(0).array() - std::sqrt(40.0) * std::log(c)).abs().maxCoeff(), 1e-9);
  EXPECT_LT(d.rightCols(19).cwiseAbs().maxCoeff(), 1e-9);
  const RowMatrix n = mfcc(Waveform{y, 16000}, FeatureConfig{}).values - mfcc(Waveform{x, 16000}, FeatureConfig{}).values;
  EXPECT_LT(n.cwiseAbs().maxCoeff(), 1e-5);
}

// Direct transcription of the documented pipeline with a naive DFT.
RowMatrix reference_mfcc(const std::vector<double>& samples, const FeatureConfig& cfg) {
  const int rate = 16000, win = 320, hop = 160, nfft = cfg.fft_size, bins = nfft / 2 + 1;
  std::vector<double> x = samples;
  for (std::size_t i = x.size() - 1; i > 0; --i) x[i] -= cfg.preemphasis * x[i - 1];
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> edge;
  for (int i = 0; i < cfg.n_mels + 2; ++i) edge.push_back(hz(mel(rate / 2.0) * i / (cfg.n_mels + 1)));
  const auto frames = static_cast<int>(frame_count(x.size(), win, hop));
  RowMatrix out(frames, cfg.n_mfcc);
  for (int t = 0; t < frames; ++t) {
    std::vector<double> mag(static_cast<std::size_t>(bins));
    for (int k = 0; k < bins; ++k) {
      std::complex<double> acc = 0.0;
      for (int n = 0; n < win; ++n) {
        const double w = 0.54 - 0.46 * std::cos(2.0 * pi * n / (win - 1));
        acc += x[static_cast<std::size_t>(t * hop + n)] * w * std::polar(1.0, -2.0 * pi * k * n / nfft);
      }
      mag[static_cast<std::size_t>(k)] = std::abs(acc);
    }
    std::vector<double> logmel(static_cast<std::size_t>(cfg.n_mels));
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (int k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * rate / nfft;
        const double l = edge[m], c = edge[m + 1], r = edge[m + 2];
        if (f > l && f <= c) e += mag[k] * (f - l) / (c - l);
        if (f > c && f < r) e += mag[k] * (r - f) / (r - c);
      }
      logmel[static_cast<std::size_t>(m)] = std::log(std::max(e, cfg.log_floor));
    }
    for (int k = 0; k < cfg.n_mfcc; ++k) {
      double acc = 0.0;
      for (int m = 0; m < cfg.n_mels; ++m) acc += logmel[m] * std::cos(pi * k * (m + 0.5) / cfg.n_mels);
      out(t, k) = acc * (k == 0 ? std::sqrt(1.0 / cfg.n_mels) : std::sqrt(2.0 / cfg.n_mels));
    }
  }
  return out;
}

TEST(Mfcc, MatchesNaiveReference) {
  const auto x = noise(1600, 11);
  FeatureConfig raw;
  raw.cmn = false;
  const RowMatrix got = mfcc(Waveform{x, 16000}, raw).values;
  const RowMatrix ref = reference_mfcc(x, raw);
  ASSERT_EQ(got.rows(), ref.rows());
  EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FeatureConfig, Validation) {
  FeatureConfig c;
  EXPECT_NO_THROW(c.validate());
  c.hop_ms = 25.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.n_mfcc = 41;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.fft_size = 256;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FeatureFile, RoundTripAtFloatPrecision) {
  const auto dir = sk::testing::temp_dir("skft");
  const FeatureMatrix f = mfcc(Waveform{noise(4000, 12), 16000}, FeatureConfig{});
  write_features(dir / "a.skft", f);
  const FeatureMatrix g = read_features(dir / "a.skft");
  ASSERT_EQ(g.values.rows(), f.values.rows());
  for (Eigen::Index i = 0; i < f.values.size(); ++i) {
    EXPECT_EQ(g.values.data()[i], static_cast<double>(static_cast<float>(f.values.data()[i])));
  }
  std::ofstream(dir / "bad.skft") << "SKFX";
  EXPECT_THROW(read_features(dir / "bad.skft"), DecodeError);
}

}  // namespace
}  // namespace sk
