// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

// Toy corpus of harmonic tone sequences. Each class carries one acoustic
// signature:
//   Repetition    2-4 identical short bursts separated by gaps
//   Prolongation  one tone held for 1.5-2.0 s
//   Block         0.8-1.2 s of leading silence, then tones
//   Interjection  a two-tone chirp (about 900 Hz then 1300 Hz) inside a sequence
//   Fluent        short tones whose neighbours differ by at least 10% in pitch

#pragma once

#include <filesystem>
#include <map>

#include "stutterkit/audio.hpp"
#include "stutterkit/dataset.hpp"

namespace sk {

struct SynthSpec {
  int n_per_class = 40;
  double clip_s = 3.0;
  int rate = kModelSampleRate;
  int n_podcasts = 10;
  std::uint64_t seed = 0;
  /// Per-class count multiplier, e.g. {Fluent: 4}.
  std::map<Label, double> class_imbalance;
  /// Peak amplitude of the white background noise.
  double noise_level = 0.003;

  int count(Label l) const;
  /// Throws ConfigError.
  void validate() const;
};

/// One clip of the given class, exactly clip_s long.
Waveform synth_clip(Label label, const SynthSpec& spec, Rng& rng);

/// Writes clips/<id>.wav (16-bit PCM) and manifest.csv under out_dir and
/// returns the manifest. Podcasts are assigned round-robin within each class.
/// Throws IoError naming the path on write failures.
Manifest generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Diagnostics used by the separability check: seconds of leading silence and
/// the longest run of consecutive voiced 10 ms frames.
double leading_silence_s(const Waveform& w, double threshold = 0.02);
double longest_tonal_run_s(const Waveform& w, double threshold = 0.02);

}  // namespace sk
