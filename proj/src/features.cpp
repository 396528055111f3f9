// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/features.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "stutterkit/errors.hpp"

namespace sk {

namespace {

constexpr std::uint32_t kFeatureVersion = 1;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// n_mels x (fft/2 + 1) triangular filters, HTK mel scale.
RowMatrix mel_filterbank(int n_mels, int fft_size, int rate, double low, double high) {
  const int bins = fft_size / 2 + 1;
  RowMatrix fb = RowMatrix::Zero(n_mels, bins);
  const double mel_lo = hz_to_mel(low);
  const double mel_hi = hz_to_mel(high);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * rate / fft_size;
      double w = 0.0;
      if (f > left && f <= center) w = (f - left) / (center - left);
      else if (f > center && f < right) w = (right - f) / (right - center);
      fb(m, k) = w;
    }
  }
  return fb;
}

// Orthonormal DCT-II, n_out x n_in.
RowMatrix dct_matrix(int n_out, int n_in) {
  RowMatrix d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int m = 0; m < n_in; ++m) {
      d(k, m) = scale * std::cos(std::numbers::pi * k * (m + 0.5) / n_in);
    }
  }
  return d;
}

}  // namespace

int FeatureConfig::win_samples(int rate) const {
  return static_cast<int>(std::lround(win_ms * rate / 1000.0));
}
int FeatureConfig::hop_samples(int rate) const {
  return static_cast<int>(std::lround(hop_ms * rate / 1000.0));
}

void FeatureConfig::validate(int rate) const {
  if (!(hop_ms > 0.0 && win_ms > hop_ms)) throw ConfigError("feature config: need win_ms > hop_ms > 0");
  if (n_mfcc < 1 || n_mfcc > n_mels) throw ConfigError("feature config: need 1 <= n_mfcc <= n_mels");
  if (fft_size < win_samples(rate)) throw ConfigError("feature config: fft_size shorter than window");
  if (preemphasis < 0.0 || preemphasis >= 1.0) throw ConfigError("feature config: preemphasis must be in [0,1)");
  if (log_floor <= 0.0) throw ConfigError("feature config: log_floor must be positive");
}

Eigen::Index frame_count(std::size_t length, int win, int hop) {
  if (length < static_cast<std::size_t>(win)) return 0;
  return 1 + static_cast<Eigen::Index>((length - static_cast<std::size_t>(win)) / static_cast<std::size_t>(hop));
}

void apply_cmn(RowMatrix& m) {
  if (m.rows() == 0) return;
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
}

FeatureMatrix mfcc(const Waveform& w, const FeatureConfig& cfg) {
  cfg.validate(w.sample_rate);
  const int win = cfg.win_samples(w.sample_rate);
  const int hop = cfg.hop_samples(w.sample_rate);
  const Eigen::Index frames = frame_count(w.samples.size(), win, hop);
  if (frames < 1) {
    throw TooShortError("clip of " + std::to_string(w.samples.size()) + " samples is shorter than one " +
                        std::to_string(win) + "-sample window");
  }

  std::vector<double> x = w.samples;
  if (cfg.preemphasis > 0.0) {
    for (std::size_t i = x.size() - 1; i > 0; --i) x[i] -= cfg.preemphasis * x[i - 1];
  }

  std::vector<double> window(win);
  for (int n = 0; n < win; ++n) {
    window[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (win - 1));
  }

  const double high = cfg.high_freq > 0.0 ? cfg.high_freq : 0.5 * w.sample_rate;
  const RowMatrix fb = mel_filterbank(cfg.n_mels, cfg.fft_size, w.sample_rate, cfg.low_freq, high);
  const RowMatrix dct = dct_matrix(cfg.n_mfcc, cfg.n_mels);
  const int bins = cfg.fft_size / 2 + 1;

  Eigen::FFT<double> fft;
  std::vector<double> frame(cfg.fft_size);
  std::vector<std::complex<double>> spectrum;
  RowMatrix magnitudes(frames, bins);
  Eigen::VectorXd log_energy(frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    double energy = 0.0;
    for (int n = 0; n < win; ++n) {
      frame[n] = x[static_cast<std::size_t>(t * hop + n)] * window[n];
      energy += frame[n] * frame[n];
    }
    log_energy(t) = std::log(std::max(energy, cfg.log_floor));
    fft.fwd(spectrum, frame);
    for (int k = 0; k < bins; ++k) magnitudes(t, k) = std::abs(spectrum[k]);
  }

  RowMatrix mel = magnitudes * fb.transpose();
  mel = mel.unaryExpr([&](double e) { return std::log(std::max(e, cfg.log_floor)); });

  FeatureMatrix out;
  out.frame_hop_ms = cfg.hop_ms;
  out.values = mel * dct.transpose();
  if (!cfg.keep_c0) out.values.col(0) = log_energy;
  if (cfg.cmn) apply_cmn(out.values);
  return out;
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write feature file: " + path.string());
  auto put32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  os.write("SKFT", 4);
  put32(kFeatureVersion);
  put32(static_cast<std::uint32_t>(f.values.rows()));
  put32(static_cast<std::uint32_t>(f.values.cols()));
  for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
      const float v = static_cast<float>(f.values(r, c));
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      put32(u);
    }
  }
  if (!os) throw IoError("failed writing feature file: " + path.string());
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open feature file: " + path.string());
  auto get32 = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DecodeError("truncated feature file: " + path.string());
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
  };
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SKFT", 4) != 0) {
    throw DecodeError("bad feature file magic: " + path.string());
  }
  if (get32() != kFeatureVersion) throw DecodeError("unsupported feature file version: " + path.string());
  const std::uint32_t rows = get32();
  const std::uint32_t cols = get32();
  FeatureMatrix f;
  f.values.resize(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::uint32_t u = get32();
      float v;
      std::memcpy(&v, &u, 4);
      f.values(r, c) = v;
    }
  }
  return f;
}

}  // namespace sk
