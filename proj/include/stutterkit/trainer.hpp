// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "stutterkit/checkpoint.hpp"
#include "stutterkit/dataset.hpp"
#include "stutterkit/features.hpp"
#include "stutterkit/losses.hpp"
#include "stutterkit/metrics.hpp"
#include "stutterkit/model.hpp"
#include "stutterkit/optimizer.hpp"

namespace sk {

enum class LossMode { CE, WCE };
enum class FreezeWorkflow { None, EncFrz, EncDisfFrz, EncFluentFrz };

std::string_view loss_mode_name(LossMode m);
std::optional<LossMode> parse_loss_mode(std::string_view s);
std::string_view workflow_name(FreezeWorkflow w);
std::optional<FreezeWorkflow> parse_workflow(std::string_view s);

struct TrainConfig {
  AdamConfig adam;
  int batch_size = 128;
  int max_epochs = 50;
  int patience = 7;
  std::uint64_t seed = 0;
  ModelConfig model = ModelConfig::make(VariantKind::SingleBranch);
  LossMode loss_mode = LossMode::CE;
  FreezeWorkflow workflow = FreezeWorkflow::None;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys throw ConfigError.
  static TrainConfig from_json(const nlohmann::json& j);
};

nlohmann::json feature_config_to_json(const FeatureConfig& c);
FeatureConfig feature_config_from_json(const nlohmann::json& j);

/// Thread-safe cache of MFCC matrices keyed by (resolved path, offset,
/// duration). With a cache directory, matrices are also persisted there.
class FeatureStore {
 public:
  explicit FeatureStore(FeatureConfig cfg = {}, std::filesystem::path cache_dir = {});

  /// Throws the underlying DataError/IoError when the audio is unusable.
  const FeatureMatrix& get(const Manifest& m, const SegmentRecord& r);
  /// Computes every record of `m`, `jobs` at a time. Errors propagate.
  void precompute(const Manifest& m, int jobs = 1);
  const FeatureConfig& config() const { return cfg_; }

 private:
  FeatureConfig cfg_;
  std::filesystem::path cache_dir_;
  std::mutex mu_;
  std::unordered_map<std::string, std::unique_ptr<FeatureMatrix>> cache_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> train_fluent, train_disfluent;
  std::optional<double> val_fluent, val_disfluent;
  double elapsed_s = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  bool stopped_early = false;

  /// Tab-separated, one line per epoch after a header. Losses use 17
  /// significant digits so logs compare exactly.
  std::string to_tsv(bool with_elapsed = true) const;
};

struct TrainHooks {
  /// Replaces the measured validation loss for an epoch.
  std::function<double(int epoch, double measured)> val_loss_override;
  std::function<void(int epoch, StutterNet& net)> on_epoch_end;
  /// Ids of every training mini-batch, in order.
  std::function<void(const std::vector<std::string>& ids)> on_batch;
};

struct TrainResult {
  Checkpoint best;
  TrainingLog log;
};

/// Per-head targets and weights derived from a training split.
struct LossSetup {
  ClassWeights disfluent;
  ClassWeights fluent;
};

/// Uniform weights for CE; inverse-frequency weights of `train` for WCE
/// (5-class or 4-class labels for the disfluent head, Fluent/Disfluent
/// pseudo-labels for the fluent head). Throws MissingClassError.
LossSetup make_loss_setup(const ModelConfig& model, LossMode mode, const Manifest& train);

/// Disfluent-head target for a label: the class index, or kIgnoreLabel for
/// Fluent samples under the four-class head.
int disfluent_target(const ModelConfig& model, Label l);

struct StepLoss {
  double total = 0.0;
  std::optional<double> fluent;
  std::optional<double> disfluent;
};

/// Forward + loss (+ backward when phase is Train) for one batch.
StepLoss batch_loss(StutterNet& net, const std::vector<const FeatureMatrix*>& feats, const std::vector<Label>& labels,
                    const LossSetup& setup, nn::Phase phase, std::uint64_t dropout_seed);

/// Trains `net` in place (honoring its freeze mask) and leaves it at the
/// best-validation state, which is also returned as a checkpoint.
TrainResult train_model(StutterNet& net, const TrainConfig& cfg, const Manifest& train, const Manifest& valid,
                        FeatureStore& store, const TrainHooks& hooks = {});

/// Fresh model from cfg.model and cfg.seed, then train_model.
TrainResult train_fold(const TrainConfig& cfg, const Manifest& train, const Manifest& valid, FeatureStore& store,
                       const TrainHooks& hooks = {});

struct FinetuneResult {
  Checkpoint pretrained;
  TrainResult finetuned;
  TrainingLog pretrain_log;
};

/// The three pretrain-then-freeze schemes. Pretraining uses WCE on a model
/// with the target's encoders and a single head: the disfluent head for
/// EncFrz/EncDisfFrz, the fluent head for EncFluentFrz. The target model
/// (cfg.model, both heads) receives the encoder and pretrained head, the
/// other head starts fresh, and the workflow's groups are frozen.
FinetuneResult pretrain_finetune(const TrainConfig& cfg, const Manifest& train, const Manifest& valid,
                                 FeatureStore& store, const TrainHooks& pretrain_hooks = {},
                                 const TrainHooks& finetune_hooks = {});

FreezeMask workflow_mask(FreezeWorkflow w);

struct Prediction {
  std::string id;
  Label truth = Label::Fluent;
  int predicted = 0;
};

/// Inference in evaluation mode. Unreadable records are skipped and
/// counted. Branched models use combined_prediction; single-head models use
/// a plain argmax (a fluent-only model reports a 2-class confusion).
RunReport evaluate(StutterNet& net, const Manifest& test, FeatureStore& store, int batch_size = 128,
                   std::string fold_id = "", std::string cfg_hash = "", std::vector<Prediction>* predictions = nullptr);

struct CvOptions {
  int jobs = 1;
  /// When set, fold_<k>/ gets train.log, checkpoint.skck and report.json.
  std::filesystem::path out_dir;
  std::string config_hash;
  std::function<TrainHooks(std::size_t fold)> hooks;
};

struct CvResult {
  std::vector<RunReport> folds;
  RunReport average;
  std::vector<TrainingLog> logs;
  std::vector<std::string> failures;
};

/// Per fold: trains on every record (clean and augmented) of the train
/// podcasts, validates and tests on the clean records of the valid and test
/// podcasts. Each fold starts from cfg.seed, so results do not depend on fold
/// order or job count.
CvResult run_cv(const TrainConfig& cfg, const Manifest& m, const SplitPlan& plan, FeatureStore& store,
                const CvOptions& opt = {});

/// Records of `m` whose podcast is in `podcasts`; clean_only drops augmented copies.
Manifest select(const Manifest& m, const std::set<std::string>& podcasts, bool clean_only);

}  // namespace sk
