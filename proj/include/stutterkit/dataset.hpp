// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stutterkit/rng.hpp"

namespace sk {

/// The five-way taxonomy, in the column order used by every report.
enum class Label : int { Repetition = 0, Prolongation = 1, Block = 2, Interjection = 3, Fluent = 4 };

inline constexpr int kNumClasses = 5;
inline constexpr std::array<Label, kNumClasses> kAllLabels = {
    Label::Repetition, Label::Prolongation, Label::Block, Label::Interjection, Label::Fluent};

/// FluentBranch target: index 0 is Fluent, index 1 is Disfluent.
enum class FluencyLabel : int { Fluent = 0, Disfluent = 1 };

std::string_view label_name(Label l);
std::string_view label_short_name(Label l);  ///< R, P, B, In, F
/// Accepts full names and short codes, case-insensitive. nullopt otherwise.
std::optional<Label> parse_label(std::string_view s);
inline int label_index(Label l) { return static_cast<int>(l); }

/// Source tag attached to augmented copies; "clean" for originals.
enum class AugmentationType { Clean, Music, Noise, Babble, Reverb };
std::string_view augmentation_name(AugmentationType t);
std::optional<AugmentationType> parse_augmentation(std::string_view s);

struct SegmentRecord {
  std::string id;
  std::string audio_path;
  double offset_s = 0.0;
  double duration_s = 0.0;
  Label label = Label::Fluent;
  std::string podcast_id;
  AugmentationType augmentation = AugmentationType::Clean;

  bool operator==(const SegmentRecord&) const = default;
};

FluencyLabel fluent_pseudo_label(const SegmentRecord& r);
FluencyLabel fluent_pseudo_label(Label l);

struct Manifest {
  std::vector<SegmentRecord> records;
  std::string source_name;
  /// Directory that relative audio paths are resolved against.
  std::filesystem::path base_dir;
  /// Rows dropped by the parser because their label is outside the taxonomy.
  std::size_t excluded_rows = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::filesystem::path resolve(const SegmentRecord& r) const;
  std::set<std::string> podcasts() const;
  std::array<std::size_t, kNumClasses> class_counts() const;
  /// Records whose podcast is in `podcasts`, order preserved.
  Manifest subset(const std::set<std::string>& podcasts) const;
  /// Throws ValidationError on duplicate ids or non-positive durations.
  void validate() const;
};

/// CSV with header `id,audio_path,offset_s,duration_s,label,podcast_id` and
/// an optional trailing `augmentation` column. Throws ParseError (with line
/// number) on malformed rows and ValidationError on duplicate ids. Rows with
/// labels outside the taxonomy are dropped and counted in excluded_rows.
Manifest parse_manifest(const std::filesystem::path& path);
Manifest parse_manifest_text(std::string_view text, std::string source_name = "");
std::string serialize_manifest(const Manifest& m);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

struct FoldSets {
  std::set<std::string> train;
  std::set<std::string> valid;
  std::set<std::string> test;
  bool operator==(const FoldSets&) const = default;
};

struct SplitPlan {
  std::vector<FoldSets> folds;
  std::uint64_t seed = 0;
  bool operator==(const SplitPlan&) const = default;
};

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

/// Podcast-grouped rotation. Podcasts are shuffled with the seed and cut
/// into n_folds contiguous groups; fold k tests group k, validates on the
/// round(valid * P) podcasts that follow it cyclically, and trains on the
/// rest. Throws InfeasibleSplitError when there are fewer podcasts than folds
/// or no podcasts remain for training.
SplitPlan make_split(const Manifest& m, const SplitRatios& ratios, int n_folds, Rng& rng);

/// JSON text: {"seed":..,"folds":[{"train":[..],"valid":[..],"test":[..]}]}.
std::string serialize_split(const SplitPlan& plan);
SplitPlan parse_split(std::string_view text);
void write_split(const std::filesystem::path& path, const SplitPlan& plan);
SplitPlan read_split(const std::filesystem::path& path);

/// w_i = N / (C * N_i) over the taxonomy (C = 5).
struct ClassWeights {
  std::vector<double> w;

  double operator[](int cls) const { return w[static_cast<std::size_t>(cls)]; }
  double operator[](Label l) const { return w[static_cast<std::size_t>(label_index(l))]; }
  std::size_t size() const { return w.size(); }
  static ClassWeights uniform(std::size_t n_classes) { return {std::vector<double>(n_classes, 1.0)}; }
};

/// Throws MissingClassError naming the first empty class.
ClassWeights class_weights(const Manifest& m);
/// Same formula over arbitrary counts; `names` label errors.
ClassWeights inverse_frequency_weights(const std::vector<std::size_t>& counts,
                                       const std::vector<std::string>& names = {});

}  // namespace sk
