// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "stutterkit/augment.hpp"
#include "stutterkit/synth.hpp"
#include "stutterkit/trainer.hpp"

namespace sk::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kIncompatible = 3, kDataError = 4 };

struct AugmentSection {
  std::filesystem::path pool;
  std::vector<AugmentationType> types{kAllAugmentations.begin(), kAllAugmentations.end()};
  NoiseSnrMode noise_snr_mode = NoiseSnrMode::PerInterval;
};

struct SplitSection {
  int folds = 10;
  double valid = 0.1;
  double test = 0.1;
};

struct Paths {
  std::filesystem::path manifest;
  std::filesystem::path out;
  std::filesystem::path split;
  std::filesystem::path valid_manifest;
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path checkpoint;
  std::filesystem::path feature_cache;
};

/// Everything a command can be configured with. The JSON form has the
/// sections "seed", "jobs", "features", "train", "synth", "augment", "split"
/// and "paths"; unknown keys are rejected at every level. The top-level seed
/// drives training, synthesis, augmentation and splitting.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  FeatureConfig features;
  TrainConfig train;
  SynthSpec synth;
  AugmentSection augment;
  SplitSection split;
  Paths paths;

  nlohmann::json to_json() const;
  /// Throws ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
};

/// Runs one command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sk::cli
