// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <filesystem>

#include "stutterkit/audio.hpp"

namespace sk {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// MFCC front-end settings. Defaults: 20 coefficients (c0 kept) from a
/// 40-band mel filterbank on 512-point magnitude spectra of 20 ms Hamming
/// frames every 10 ms, 0.97 pre-emphasis, log floor 1e-10, orthonormal
/// DCT-II, per-utterance mean normalization.
struct FeatureConfig {
  int n_mfcc = 20;
  double win_ms = 20.0;
  double hop_ms = 10.0;
  int n_mels = 40;
  int fft_size = 512;
  double preemphasis = 0.97;
  double log_floor = 1e-10;
  double low_freq = 0.0;
  double high_freq = 0.0;  ///< <= 0 means Nyquist
  /// When false, coefficient 0 is replaced by the frame log-energy.
  bool keep_c0 = true;
  bool cmn = true;

  int win_samples(int rate) const;
  int hop_samples(int rate) const;
  /// Throws ConfigError when the invariants win > hop > 0, n_mfcc <= n_mels
  /// and fft_size >= window length do not hold.
  void validate(int rate = kModelSampleRate) const;
  bool operator==(const FeatureConfig&) const = default;
};

/// T x n_mfcc, one row per frame.
struct FeatureMatrix {
  RowMatrix values;
  double frame_hop_ms = 10.0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

/// 1 + floor((L - win) / hop) for L >= win, else 0.
Eigen::Index frame_count(std::size_t length, int win, int hop);

/// Throws TooShortError when the waveform is shorter than one window.
FeatureMatrix mfcc(const Waveform& w, const FeatureConfig& cfg);

/// Subtracts each column's mean in place.
void apply_cmn(RowMatrix& m);

/// Binary container: "SKFT", u32 version, u32 T, u32 D, then T*D
/// little-endian float32 values in row-major order.
void write_features(const std::filesystem::path& path, const FeatureMatrix& f);
FeatureMatrix read_features(const std::filesystem::path& path);

}  // namespace sk
