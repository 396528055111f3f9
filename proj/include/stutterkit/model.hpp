// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stutterkit/features.hpp"
#include "stutterkit/layers.hpp"

namespace sk {

using nn::Index;
using nn::Matrix;

/// First-layer frame window of an encoder: 5 frames ([t-2, t+2]) or 9 frames
/// ([t-4, t+4]). Deeper layers are the same in both.
enum class Context { C5, C9 };

std::string_view context_name(Context c);

/// One time-delay layer: a temporal linear map over tap_offsets followed by
/// ReLU and batch normalization.
struct TdnnLayerSpec {
  Index in_dim = 0;
  Index out_dim = 0;
  std::vector<int> tap_offsets;
};

struct EncoderConfig {
  Context context = Context::C5;
  std::vector<TdnnLayerSpec> layer_specs;
  Index bilstm_hidden = 64;
  int bilstm_layers = 2;

  /// Five layers with widths `dims` (default 64, 64, 64, 64, 192) and taps
  /// {-2..2} or {-4..4}, {-2,0,2}, {-3,0,3}, {0}, {0}.
  static EncoderConfig make(Context c, Index input_dim = 20, std::vector<Index> dims = {64, 64, 64, 64, 192},
                            Index bilstm_hidden = 64, int bilstm_layers = 2);

  /// Sum over layers of max |offset|: 7 for C5, 9 for C9.
  int half_width() const;
  /// 2 * half_width + 1: the minimum number of input frames.
  int total_context() const { return 2 * half_width() + 1; }
  Index input_dim() const { return layer_specs.front().in_dim; }
  Index output_dim() const { return 2 * bilstm_hidden; }
  void validate() const;
};

/// The TDNN stack plus the stacked bidirectional LSTM.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, const std::string& prefix, Rng& rng);

  /// TDNN stack only (valid frames, no padding).
  nn::SeqBatch forward_tdnn(const nn::SeqBatch& x, nn::Phase phase);
  /// Full encoder: per-frame embeddings of width 2 * bilstm_hidden.
  nn::SeqBatch forward(const nn::SeqBatch& x, nn::Phase phase);
  nn::SeqBatch backward(const nn::SeqBatch& dy, bool need_input_grad);

  void collect(std::vector<nn::NamedParam>& out);
  void collect_buffers(std::vector<nn::NamedBuffer>& out);
  const EncoderConfig& config() const { return cfg_; }

 private:
  struct Block {
    nn::TdnnLayer tdnn;
    nn::Relu relu;
    nn::BatchNorm bn;
  };
  EncoderConfig cfg_;
  std::string prefix_;
  std::vector<Block> blocks_;
  std::vector<nn::BiLstmLayer> lstm_;
};

/// Stacks feature matrices row-wise into one SeqBatch.
nn::SeqBatch make_batch(std::span<const FeatureMatrix* const> features);

struct HeadConfig {
  std::vector<Index> hidden{64, 64};
  double dropout = 0.3;
};

/// FC -> ReLU -> BN -> dropout for every hidden layer, then a linear output
/// layer producing logits.
class BranchHead {
 public:
  BranchHead() = default;
  BranchHead(Index in, const HeadConfig& cfg, Index n_classes, const std::string& prefix, Rng& rng);

  Matrix forward(const Matrix& x, nn::Phase phase, std::uint64_t dropout_seed);
  Matrix backward(const Matrix& dlogits, bool need_input_grad);
  void collect(std::vector<nn::NamedParam>& out);
  void collect_buffers(std::vector<nn::NamedBuffer>& out);
  Index n_classes() const { return out_.out_dim(); }

 private:
  struct Hidden {
    nn::Linear fc;
    nn::Relu relu;
    nn::BatchNorm bn;
    nn::Dropout drop;
  };
  std::string prefix_;
  std::vector<Hidden> hidden_;
  nn::Linear out_;
};

enum class VariantKind { SingleBranch, MultiBranch, MultiContext };
std::string_view variant_name(VariantKind k);
std::optional<VariantKind> parse_variant(std::string_view s);

/// FiveClass: the DisfluentBranch predicts all five labels and trains on
/// every sample. FourClass: it predicts R/P/B/In and trains on disfluent
/// samples only.
enum class DisfluentHeadMode { FiveClass, FourClass };

/// Parameter groups addressed by freezing.
enum class ParamGroup { Encoder, FluentBranch, DisfluentBranch };

struct ModelConfig {
  VariantKind kind = VariantKind::SingleBranch;
  /// Derived from `kind` by make(); may be overridden, e.g. a single-head
  /// model on both contexts used for pretraining.
  std::vector<Context> contexts{Context::C5};
  bool fluent_head = false;
  bool disfluent_head = true;

  Index input_dim = 20;
  std::vector<Index> tdnn_dims{64, 64, 64, 64, 192};
  Index bilstm_hidden = 64;
  int bilstm_layers = 2;
  HeadConfig head;
  DisfluentHeadMode disfluent_mode = DisfluentHeadMode::FiveClass;

  static ModelConfig make(VariantKind kind);

  EncoderConfig encoder_config(Context c) const;
  /// Concatenated pooled width: contexts * 2 * (2 * bilstm_hidden).
  Index embedding_dim() const;
  Index disfluent_classes() const { return disfluent_mode == DisfluentHeadMode::FiveClass ? 5 : 4; }
  /// Largest total context over the encoders.
  int min_frames() const;
  void validate() const;

  nlohmann::json to_json() const;
  /// Throws ConfigError on unknown keys or invalid values.
  static ModelConfig from_json(const nlohmann::json& j);
};

struct FreezeMask {
  bool encoder = false;
  bool fluent_branch = false;
  bool disfluent_branch = false;

  bool frozen(ParamGroup g) const;
  bool any() const { return encoder || fluent_branch || disfluent_branch; }
  bool operator==(const FreezeMask&) const = default;
};

struct ModelOutput {
  std::optional<Matrix> fluent_logits;
  std::optional<Matrix> fluent_probs;
  std::optional<Matrix> disfluent_logits;
  std::optional<Matrix> disfluent_probs;
  Matrix embedding;  ///< B x embedding_dim
};

struct GroupedParam {
  std::string name;
  nn::Parameter* param;
  ParamGroup group;
};

/// Per-component trainable parameter counts.
struct ParamCount {
  std::map<std::string, std::int64_t> encoders;  ///< keyed by context name
  std::int64_t fluent_branch = 0;
  std::int64_t disfluent_branch = 0;
  std::int64_t total = 0;
};

/// Closed-form trainable parameter count for a configuration.
ParamCount param_count(const ModelConfig& cfg);
std::int64_t tdnn_linear_params(const TdnnLayerSpec& spec);

/// Encoders, statistics pooling, concatenation and the branch heads.
/// Parameter paths: "enc.c5.tdnn1.weight", "enc.c9.lstm2.bwd.w_hh",
/// "fluent.fc1.bn.gamma", "disfluent.out.bias", ...
class StutterNet {
 public:
  StutterNet(ModelConfig cfg, std::uint64_t seed);

  /// Frozen components run in evaluation mode even when phase == Train, so
  /// neither their parameters nor their batch-norm statistics move.
  ModelOutput forward(std::span<const FeatureMatrix* const> batch, nn::Phase phase, std::uint64_t dropout_seed = 0);
  ModelOutput forward(const std::vector<FeatureMatrix>& batch, nn::Phase phase, std::uint64_t dropout_seed = 0);

  /// Gradients of the objective with respect to each head's logits; pass
  /// nullptr for a head that does not contribute.
  void backward(const Matrix* d_fluent_logits, const Matrix* d_disfluent_logits);
  void zero_grad();

  std::vector<GroupedParam> parameters();
  std::vector<nn::NamedBuffer> buffers();

  /// Throws ConfigError when the mask names a branch the model lacks.
  void apply_freeze(const FreezeMask& mask);
  const FreezeMask& freeze_mask() const { return freeze_; }

  const ModelConfig& config() const { return cfg_; }
  Encoder& encoder(std::size_t i) { return encoders_[i]; }
  std::size_t encoder_count() const { return encoders_.size(); }
  BranchHead* fluent_head() { return fluent_ ? &*fluent_ : nullptr; }
  BranchHead* disfluent_head() { return disfluent_ ? &*disfluent_ : nullptr; }

  /// Re-initialises one branch with fresh parameters from `seed`.
  void reset_branch(ParamGroup branch, std::uint64_t seed);

 private:
  nn::Phase phase_for(ParamGroup g, nn::Phase requested) const;

  ModelConfig cfg_;
  FreezeMask freeze_;
  std::vector<Encoder> encoders_;
  std::vector<nn::StatPool> pools_;
  std::optional<BranchHead> fluent_;
  std::optional<BranchHead> disfluent_;
  std::vector<Index> pooled_widths_;
  std::vector<Index> last_lengths_;
};

Matrix softmax_rows(const Matrix& logits);

}  // namespace sk
