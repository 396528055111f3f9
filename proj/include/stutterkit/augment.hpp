// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stutterkit/audio.hpp"
#include "stutterkit/dataset.hpp"
#include "stutterkit/rng.hpp"

namespace sk {

struct SnrSpec {
  double min_db = 0.0;
  double max_db = 0.0;

  double draw(Rng& rng) const;
};

inline constexpr SnrSpec kMusicSnr{5.0, 15.0};
inline constexpr SnrSpec kNoiseSnr{0.0, 15.0};
inline constexpr SnrSpec kBabbleSnr{13.0, 20.0};
inline constexpr int kBabbleMinSpeakers = 3;
inline constexpr int kBabbleMaxSpeakers = 7;

/// Shoebox room for the image-source simulator. Lengths in metres.
struct RoomConfig {
  std::array<double, 3> dims{5.0, 4.0, 3.0};
  std::array<double, 3> source{1.5, 1.2, 1.5};
  std::array<double, 3> mic{3.5, 2.8, 1.4};
  double absorption = 0.5;  ///< energy absorption of every wall, in (0, 1]
  int max_order = 6;        ///< reflections per axis
};

inline constexpr double kSpeedOfSound = 343.0;

/// Image-source impulse response: each image with per-axis reflection counts
/// up to max_order contributes beta^(total reflections) / distance at the
/// nearest-sample delay round(distance / c * rate), beta = sqrt(1 - absorption).
/// Length ends at the latest non-zero tap. Throws ContractViolation for a
/// source or mic outside the room and DegenerateInputError when they coincide.
std::vector<double> simulate_rir(const RoomConfig& room, int rate);

/// Random shoebox room: dims 3-10 x 3-8 x 2.5-4 m, absorption 0.2-0.8,
/// source and mic at least 0.5 m from every wall.
RoomConfig random_room(Rng& rng);

/// Interference sources. `rooms` are simulated on demand; when
/// simulate_random_rooms is set and no RIR source is listed, a random room
/// is drawn per call.
struct NoisePool {
  std::vector<std::filesystem::path> music;
  std::vector<std::filesystem::path> noises;
  std::vector<std::filesystem::path> speech;
  std::vector<std::filesystem::path> rirs;
  std::vector<RoomConfig> rooms;
  bool simulate_random_rooms = false;
};

/// Listing format, one entry per line, '#' starts a comment:
///   music  <path>      noise <path>      speech <path>      rir <path>
///   room   Lx Ly Lz  Sx Sy Sz  Mx My Mz  absorption  max_order
///   simulate-rooms
/// Relative paths resolve against the listing's directory.
NoisePool parse_noise_pool(const std::filesystem::path& listing);
NoisePool parse_noise_pool_text(std::string_view text, const std::filesystem::path& base_dir = {});

/// Returns clean + g * interferer with g = sqrt(P_clean / (P_int * 10^(snr/10))).
/// Throws ContractViolation on length or rate mismatch, DegenerateInputError
/// when either signal has zero power.
Waveform mix_at_snr(const Waveform& clean, const Waveform& interferer, double snr_db);
double snr_gain(double clean_power, double interferer_power, double snr_db);

/// Loops `src` end to end and truncates to `length` when shorter; otherwise
/// takes a contiguous slice starting at a random offset.
std::vector<double> fit_length(const std::vector<double>& src, std::size_t length, Rng& rng);

/// What one augmentation call did.
struct Placement {
  std::size_t begin = 0;
  std::size_t length = 0;
  std::vector<std::string> sources;
  double snr_db = 0.0;
  bool skipped_silent = false;
};

struct AugmentResult {
  Waveform audio;
  std::vector<Placement> placements;
};

enum class NoiseSnrMode { PerInterval, PerClip };

struct AugmentOptions {
  /// Unreadable pool files are skipped and redrawn at most this many times.
  int max_load_attempts = 8;
  NoiseSnrMode noise_snr_mode = NoiseSnrMode::PerInterval;
  double noise_interval_s = 1.0;
};

/// Every augmenter throws PoolError when the category it needs is empty,
/// too small, or unreadable after the retry budget.
AugmentResult music_augment(const Waveform& clean, const NoisePool& pool, Rng& rng,
                            const AugmentOptions& opt = {});
/// Tiles the clip with non-overlapping intervals from t = 0 (the last one may
/// be partial) and mixes an independently drawn noise file into each.
/// Intervals whose clean power is zero are copied unchanged and flagged.
AugmentResult noise_augment(const Waveform& clean, const NoisePool& pool, Rng& rng,
                            const AugmentOptions& opt = {});
AugmentResult babble_augment(const Waveform& clean, const NoisePool& pool, Rng& rng,
                             const AugmentOptions& opt = {});
/// Full convolution truncated to the clean length, then scaled so the peak
/// matches the clean peak. Throws DegenerateInputError for an all-zero RIR.
AugmentResult reverb_augment(const Waveform& clean, const NoisePool& pool, Rng& rng,
                             const AugmentOptions& opt = {});

/// Linear convolution, length |x| + |h| - 1. FFT-based for long inputs.
std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h);
/// Convolution followed by truncation to |x| and peak matching to x.
std::vector<double> reverberate(const std::vector<double>& x, const std::vector<double>& rir);

inline constexpr std::array<AugmentationType, 4> kAllAugmentations = {
    AugmentationType::Music, AugmentationType::Noise, AugmentationType::Babble, AugmentationType::Reverb};

struct ExpandOptions {
  std::vector<AugmentationType> types{kAllAugmentations.begin(), kAllAugmentations.end()};
  AugmentOptions augment;
  int jobs = 1;
};

/// Writes one 16 kHz PCM WAV per (record, type) into out_dir and returns the
/// clean records plus their copies, sorted by (source id, type). Each copy
/// inherits label and podcast; its audio is drawn from an Rng forked by
/// (record id, type), so results do not depend on job count or order.
/// Output paths are relative to out_dir; the manifest's base_dir is out_dir
/// and clean records are rewritten to absolute paths.
Manifest expand_manifest(const Manifest& clean, const NoisePool& pool, const Rng& rng,
                         const std::filesystem::path& out_dir, const ExpandOptions& opt = {});

}  // namespace sk
