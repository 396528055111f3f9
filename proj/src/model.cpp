// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stutterkit/errors.hpp"

namespace sk {

std::string_view context_name(Context c) { return c == Context::C5 ? "c5" : "c9"; }

namespace {

std::optional<Context> parse_context(std::string_view s) {
  if (s == "c5" || s == "C5" || s == "5") return Context::C5;
  if (s == "c9" || s == "C9" || s == "9") return Context::C9;
  return std::nullopt;
}

std::vector<int> dense(int half) {
  std::vector<int> v;
  for (int k = -half; k <= half; ++k) v.push_back(k);
  return v;
}

}  // namespace

// ---------------------------------------------------------------- configs

EncoderConfig EncoderConfig::make(Context c, Index input_dim, std::vector<Index> dims, Index bilstm_hidden,
                                  int bilstm_layers) {
  if (dims.size() != 5) throw ConfigError("encoder needs exactly 5 tdnn widths");
  const std::vector<std::vector<int>> taps = {
      dense(c == Context::C5 ? 2 : 4), {-2, 0, 2}, {-3, 0, 3}, {0}, {0}};
  EncoderConfig cfg;
  cfg.context = c;
  cfg.bilstm_hidden = bilstm_hidden;
  cfg.bilstm_layers = bilstm_layers;
  Index in = input_dim;
  for (std::size_t l = 0; l < 5; ++l) {
    cfg.layer_specs.push_back({in, dims[l], taps[l]});
    in = dims[l];
  }
  cfg.validate();
  return cfg;
}

int EncoderConfig::half_width() const {
  int h = 0;
  for (const auto& s : layer_specs) {
    int m = 0;
    for (int o : s.tap_offsets) m = std::max(m, std::abs(o));
    h += m;
  }
  return h;
}

void EncoderConfig::validate() const {
  if (layer_specs.empty()) throw ConfigError("encoder has no tdnn layers");
  for (std::size_t l = 0; l < layer_specs.size(); ++l) {
    const auto& s = layer_specs[l];
    if (s.in_dim <= 0 || s.out_dim <= 0) throw ConfigError("tdnn layer dims must be positive");
    if (s.tap_offsets.empty()) throw ConfigError("tdnn layer needs taps");
    if (l > 0 && s.in_dim != layer_specs[l - 1].out_dim) throw ConfigError("tdnn layer widths do not chain");
  }
  if (bilstm_hidden <= 0 || bilstm_layers < 1) throw ConfigError("bilstm needs positive hidden size and depth");
}

std::string_view variant_name(VariantKind k) {
  switch (k) {
    case VariantKind::SingleBranch: return "single";
    case VariantKind::MultiBranch: return "mb";
    case VariantKind::MultiContext: return "mc";
  }
  return "?";
}

std::optional<VariantKind> parse_variant(std::string_view s) {
  if (s == "single") return VariantKind::SingleBranch;
  if (s == "mb") return VariantKind::MultiBranch;
  if (s == "mc") return VariantKind::MultiContext;
  return std::nullopt;
}

ModelConfig ModelConfig::make(VariantKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.contexts = kind == VariantKind::MultiContext ? std::vector<Context>{Context::C5, Context::C9}
                                                 : std::vector<Context>{Context::C5};
  c.fluent_head = kind != VariantKind::SingleBranch;
  c.disfluent_head = true;
  return c;
}

EncoderConfig ModelConfig::encoder_config(Context c) const {
  return EncoderConfig::make(c, input_dim, tdnn_dims, bilstm_hidden, bilstm_layers);
}

Index ModelConfig::embedding_dim() const {
  return static_cast<Index>(contexts.size()) * 2 * (2 * bilstm_hidden);
}

int ModelConfig::min_frames() const {
  int m = 0;
  for (Context c : contexts) m = std::max(m, encoder_config(c).total_context());
  return m;
}

void ModelConfig::validate() const {
  if (contexts.empty()) throw ConfigError("model needs at least one context");
  std::set<Context> seen(contexts.begin(), contexts.end());
  if (seen.size() != contexts.size()) throw ConfigError("model contexts must be distinct");
  if (!fluent_head && !disfluent_head) throw ConfigError("model needs at least one head");
  if (input_dim <= 0) throw ConfigError("input_dim must be positive");
  for (Index h : head.hidden) {
    if (h <= 0) throw ConfigError("head widths must be positive");
  }
  if (!(head.dropout >= 0.0 && head.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  for (Context c : contexts) encoder_config(c).validate();
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["kind"] = std::string(variant_name(kind));
  j["contexts"] = nlohmann::json::array();
  for (Context c : contexts) j["contexts"].push_back(std::string(context_name(c)));
  j["fluent_head"] = fluent_head;
  j["disfluent_head"] = disfluent_head;
  j["input_dim"] = input_dim;
  j["tdnn_dims"] = tdnn_dims;
  j["bilstm_hidden"] = bilstm_hidden;
  j["bilstm_layers"] = bilstm_layers;
  j["head_hidden"] = head.hidden;
  j["dropout"] = head.dropout;
  j["disfluent_mode"] = disfluent_mode == DisfluentHeadMode::FiveClass ? "five" : "four";
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  static const std::set<std::string> known = {"kind",          "contexts",      "fluent_head", "disfluent_head",
                                              "input_dim",     "tdnn_dims",     "bilstm_hidden", "bilstm_layers",
                                              "head_hidden",   "dropout",       "disfluent_mode"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown model config key '" + k + "'");
  }
  try {
    ModelConfig c;
    if (j.contains("kind")) {
      auto kind = parse_variant(j.at("kind").get<std::string>());
      if (!kind) throw ConfigError("unknown variant '" + j.at("kind").get<std::string>() + "'");
      c = make(*kind);
    }
    if (j.contains("contexts")) {
      c.contexts.clear();
      for (const auto& v : j.at("contexts")) {
        auto ctx = parse_context(v.get<std::string>());
        if (!ctx) throw ConfigError("unknown context '" + v.get<std::string>() + "'");
        c.contexts.push_back(*ctx);
      }
    }
    if (j.contains("fluent_head")) c.fluent_head = j.at("fluent_head").get<bool>();
    if (j.contains("disfluent_head")) c.disfluent_head = j.at("disfluent_head").get<bool>();
    if (j.contains("input_dim")) c.input_dim = j.at("input_dim").get<Index>();
    if (j.contains("tdnn_dims")) c.tdnn_dims = j.at("tdnn_dims").get<std::vector<Index>>();
    if (j.contains("bilstm_hidden")) c.bilstm_hidden = j.at("bilstm_hidden").get<Index>();
    if (j.contains("bilstm_layers")) c.bilstm_layers = j.at("bilstm_layers").get<int>();
    if (j.contains("head_hidden")) c.head.hidden = j.at("head_hidden").get<std::vector<Index>>();
    if (j.contains("dropout")) c.head.dropout = j.at("dropout").get<double>();
    if (j.contains("disfluent_mode")) {
      const auto m = j.at("disfluent_mode").get<std::string>();
      if (m == "five") {
        c.disfluent_mode = DisfluentHeadMode::FiveClass;
      } else if (m == "four") {
        c.disfluent_mode = DisfluentHeadMode::FourClass;
      } else {
        throw ConfigError("disfluent_mode must be 'five' or 'four'");
      }
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

bool FreezeMask::frozen(ParamGroup g) const {
  switch (g) {
    case ParamGroup::Encoder: return encoder;
    case ParamGroup::FluentBranch: return fluent_branch;
    case ParamGroup::DisfluentBranch: return disfluent_branch;
  }
  return false;
}

// ---------------------------------------------------------------- counting

std::int64_t tdnn_linear_params(const TdnnLayerSpec& spec) {
  return spec.out_dim * spec.in_dim * static_cast<std::int64_t>(spec.tap_offsets.size()) + spec.out_dim;
}

namespace {

std::int64_t encoder_params(const EncoderConfig& e) {
  std::int64_t n = 0;
  for (const auto& s : e.layer_specs) n += tdnn_linear_params(s) + 2 * s.out_dim;
  const std::int64_t H = e.bilstm_hidden;
  std::int64_t in = e.layer_specs.back().out_dim;
  for (int l = 0; l < e.bilstm_layers; ++l) {
    n += 2 * (4 * H * in + 4 * H * H + 4 * H);
    in = 2 * H;
  }
  return n;
}

std::int64_t head_params(std::int64_t in, const HeadConfig& h, std::int64_t classes) {
  std::int64_t n = 0;
  for (Index w : h.hidden) {
    n += in * w + w + 2 * w;
    in = w;
  }
  return n + in * classes + classes;
}

}  // namespace

ParamCount param_count(const ModelConfig& cfg) {
  ParamCount pc;
  for (Context c : cfg.contexts) {
    const auto n = encoder_params(cfg.encoder_config(c));
    pc.encoders[std::string(context_name(c))] = n;
    pc.total += n;
  }
  if (cfg.fluent_head) pc.fluent_branch = head_params(cfg.embedding_dim(), cfg.head, 2);
  if (cfg.disfluent_head) pc.disfluent_branch = head_params(cfg.embedding_dim(), cfg.head, cfg.disfluent_classes());
  pc.total += pc.fluent_branch + pc.disfluent_branch;
  return pc;
}

// ---------------------------------------------------------------- encoder

Encoder::Encoder(const EncoderConfig& cfg, const std::string& prefix, Rng& rng) : cfg_(cfg), prefix_(prefix) {
  cfg_.validate();
  for (std::size_t l = 0; l < cfg_.layer_specs.size(); ++l) {
    const auto& s = cfg_.layer_specs[l];
    Block b{nn::TdnnLayer(s.in_dim, s.out_dim, s.tap_offsets), nn::Relu{}, nn::BatchNorm(s.out_dim)};
    Rng r = rng.fork(prefix_ + ".tdnn" + std::to_string(l + 1));
    b.tdnn.init(r);
    blocks_.push_back(std::move(b));
  }
  Index in = cfg_.layer_specs.back().out_dim;
  for (int l = 0; l < cfg_.bilstm_layers; ++l) {
    nn::BiLstmLayer layer(in, cfg_.bilstm_hidden);
    layer.init(rng, prefix_ + ".lstm" + std::to_string(l + 1));
    lstm_.push_back(std::move(layer));
    in = 2 * cfg_.bilstm_hidden;
  }
}

nn::SeqBatch Encoder::forward_tdnn(const nn::SeqBatch& x, nn::Phase phase) {
  for (Index len : x.lengths) {
    if (len < cfg_.total_context()) {
      throw TooShortError("input of " + std::to_string(len) + " frames is shorter than the " +
                          std::to_string(cfg_.total_context()) + "-frame context of encoder " + prefix_);
    }
  }
  nn::SeqBatch h = x;
  for (auto& b : blocks_) {
    h = b.tdnn.forward(h);
    h.data = b.relu.forward(h.data);
    h.data = b.bn.forward(h.data, phase);
  }
  return h;
}

nn::SeqBatch Encoder::forward(const nn::SeqBatch& x, nn::Phase phase) {
  nn::SeqBatch h = forward_tdnn(x, phase);
  for (auto& l : lstm_) h = l.forward(h);
  return h;
}

nn::SeqBatch Encoder::backward(const nn::SeqBatch& dy, bool need_input_grad) {
  nn::SeqBatch d = dy;
  for (auto it = lstm_.rbegin(); it != lstm_.rend(); ++it) d = it->backward(d, true);
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    auto& b = blocks_[l];
    d.data = b.bn.backward(d.data);
    d.data = b.relu.backward(d.data);
    d = b.tdnn.backward(d, l > 0 || need_input_grad);
  }
  return d;
}

void Encoder::collect(std::vector<nn::NamedParam>& out) {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = prefix_ + ".tdnn" + std::to_string(l + 1);
    blocks_[l].tdnn.collect(p, out);
    blocks_[l].bn.collect(p + ".bn", out);
  }
  for (std::size_t l = 0; l < lstm_.size(); ++l) lstm_[l].collect(prefix_ + ".lstm" + std::to_string(l + 1), out);
}

void Encoder::collect_buffers(std::vector<nn::NamedBuffer>& out) {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    blocks_[l].bn.collect_buffers(prefix_ + ".tdnn" + std::to_string(l + 1) + ".bn", out);
  }
}

nn::SeqBatch make_batch(std::span<const FeatureMatrix* const> features) {
  if (features.empty()) throw ContractViolation("empty batch");
  nn::SeqBatch x;
  Index total = 0;
  const Index d = features.front()->dim();
  for (const auto* f : features) {
    if (f->dim() != d) throw ContractViolation("feature widths differ within a batch");
    x.lengths.push_back(f->frames());
    total += f->frames();
  }
  x.data.resize(total, d);
  Index r = 0;
  for (const auto* f : features) {
    x.data.middleRows(r, f->frames()) = f->values;
    r += f->frames();
  }
  return x;
}

// ---------------------------------------------------------------- heads

BranchHead::BranchHead(Index in, const HeadConfig& cfg, Index n_classes, const std::string& prefix, Rng& rng)
    : prefix_(prefix) {
  for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
    Hidden h{nn::Linear(in, cfg.hidden[l]), nn::Relu{}, nn::BatchNorm(cfg.hidden[l]), nn::Dropout(cfg.dropout)};
    Rng r = rng.fork(prefix_ + ".fc" + std::to_string(l + 1));
    h.fc.init(r);
    hidden_.push_back(std::move(h));
    in = cfg.hidden[l];
  }
  out_ = nn::Linear(in, n_classes);
  Rng r = rng.fork(prefix_ + ".out");
  out_.init(r);
}

Matrix BranchHead::forward(const Matrix& x, nn::Phase phase, std::uint64_t dropout_seed) {
  Matrix h = x;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    auto& L = hidden_[l];
    h = L.fc.forward(h);
    h = L.relu.forward(h);
    h = L.bn.forward(h, phase);
    h = L.drop.forward(h, phase, mix_seed(dropout_seed, l + 1));
  }
  return out_.forward(h);
}

Matrix BranchHead::backward(const Matrix& dlogits, bool need_input_grad) {
  Matrix d = out_.backward(dlogits, true);
  for (std::size_t l = hidden_.size(); l-- > 0;) {
    auto& L = hidden_[l];
    d = L.drop.backward(d);
    d = L.bn.backward(d);
    d = L.relu.backward(d);
    d = L.fc.backward(d, l > 0 || need_input_grad);
  }
  return d;
}

void BranchHead::collect(std::vector<nn::NamedParam>& out) {
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    const std::string p = prefix_ + ".fc" + std::to_string(l + 1);
    hidden_[l].fc.collect(p, out);
    hidden_[l].bn.collect(p + ".bn", out);
  }
  out_.collect(prefix_ + ".out", out);
}

void BranchHead::collect_buffers(std::vector<nn::NamedBuffer>& out) {
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    hidden_[l].bn.collect_buffers(prefix_ + ".fc" + std::to_string(l + 1) + ".bn", out);
  }
}

// ---------------------------------------------------------------- network

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

StutterNet::StutterNet(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng root(seed);
  for (Context c : cfg_.contexts) {
    encoders_.emplace_back(cfg_.encoder_config(c), "enc." + std::string(context_name(c)), root);
    pools_.emplace_back();
    pooled_widths_.push_back(2 * encoders_.back().config().output_dim());
  }
  if (cfg_.fluent_head) reset_branch(ParamGroup::FluentBranch, seed);
  if (cfg_.disfluent_head) reset_branch(ParamGroup::DisfluentBranch, seed);
}

void StutterNet::reset_branch(ParamGroup branch, std::uint64_t seed) {
  Rng root(seed);
  if (branch == ParamGroup::FluentBranch) {
    if (!cfg_.fluent_head) throw ConfigError("model has no fluent branch");
    fluent_.emplace(cfg_.embedding_dim(), cfg_.head, 2, "fluent", root);
  } else if (branch == ParamGroup::DisfluentBranch) {
    if (!cfg_.disfluent_head) throw ConfigError("model has no disfluent branch");
    disfluent_.emplace(cfg_.embedding_dim(), cfg_.head, cfg_.disfluent_classes(), "disfluent", root);
  } else {
    throw ConfigError("reset_branch expects a branch group");
  }
}

nn::Phase StutterNet::phase_for(ParamGroup g, nn::Phase requested) const {
  return freeze_.frozen(g) ? nn::Phase::Eval : requested;
}

ModelOutput StutterNet::forward(const std::vector<FeatureMatrix>& batch, nn::Phase phase, std::uint64_t dropout_seed) {
  std::vector<const FeatureMatrix*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& f : batch) ptrs.push_back(&f);
  return forward(std::span<const FeatureMatrix* const>(ptrs), phase, dropout_seed);
}

ModelOutput StutterNet::forward(std::span<const FeatureMatrix* const> batch, nn::Phase phase,
                                std::uint64_t dropout_seed) {
  const nn::SeqBatch x = make_batch(batch);
  if (x.data.cols() != cfg_.input_dim) {
    throw IncompatibleError("feature width " + std::to_string(x.data.cols()) + " does not match model input_dim " +
                            std::to_string(cfg_.input_dim));
  }
  ModelOutput out;
  out.embedding.resize(x.batch(), cfg_.embedding_dim());
  Index col = 0;
  const nn::Phase enc_phase = phase_for(ParamGroup::Encoder, phase);
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    const nn::SeqBatch h = encoders_[i].forward(x, enc_phase);
    out.embedding.middleCols(col, pooled_widths_[i]) = pools_[i].forward(h);
    col += pooled_widths_[i];
  }
  if (fluent_) {
    out.fluent_logits = fluent_->forward(out.embedding, phase_for(ParamGroup::FluentBranch, phase),
                                         mix_seed(dropout_seed, fnv1a64("fluent")));
    out.fluent_probs = softmax_rows(*out.fluent_logits);
  }
  if (disfluent_) {
    out.disfluent_logits = disfluent_->forward(out.embedding, phase_for(ParamGroup::DisfluentBranch, phase),
                                               mix_seed(dropout_seed, fnv1a64("disfluent")));
    out.disfluent_probs = softmax_rows(*out.disfluent_logits);
  }
  return out;
}

void StutterNet::backward(const Matrix* d_fluent_logits, const Matrix* d_disfluent_logits) {
  const bool enc_trainable = !freeze_.encoder;
  Matrix d_emb;
  auto add = [&](const Matrix& d) {
    if (d_emb.size() == 0) {
      d_emb = d;
    } else {
      d_emb += d;
    }
  };
  if (d_fluent_logits && fluent_ && (enc_trainable || !freeze_.fluent_branch)) {
    Matrix d = fluent_->backward(*d_fluent_logits, enc_trainable);
    if (enc_trainable) add(d);
  }
  if (d_disfluent_logits && disfluent_ && (enc_trainable || !freeze_.disfluent_branch)) {
    Matrix d = disfluent_->backward(*d_disfluent_logits, enc_trainable);
    if (enc_trainable) add(d);
  }
  if (!enc_trainable || d_emb.size() == 0) return;
  Index col = 0;
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    const nn::SeqBatch dh = pools_[i].backward(d_emb.middleCols(col, pooled_widths_[i]));
    encoders_[i].backward(dh, false);
    col += pooled_widths_[i];
  }
}

void StutterNet::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

std::vector<GroupedParam> StutterNet::parameters() {
  std::vector<GroupedParam> out;
  auto append = [&](std::vector<nn::NamedParam>& v, ParamGroup g) {
    for (auto& p : v) out.push_back({std::move(p.name), p.param, g});
    v.clear();
  };
  std::vector<nn::NamedParam> tmp;
  for (auto& e : encoders_) e.collect(tmp);
  append(tmp, ParamGroup::Encoder);
  if (fluent_) fluent_->collect(tmp);
  append(tmp, ParamGroup::FluentBranch);
  if (disfluent_) disfluent_->collect(tmp);
  append(tmp, ParamGroup::DisfluentBranch);
  return out;
}

std::vector<nn::NamedBuffer> StutterNet::buffers() {
  std::vector<nn::NamedBuffer> out;
  for (auto& e : encoders_) e.collect_buffers(out);
  if (fluent_) fluent_->collect_buffers(out);
  if (disfluent_) disfluent_->collect_buffers(out);
  return out;
}

void StutterNet::apply_freeze(const FreezeMask& mask) {
  if (mask.fluent_branch && !fluent_) throw ConfigError("cannot freeze the fluent branch: variant has none");
  if (mask.disfluent_branch && !disfluent_) throw ConfigError("cannot freeze the disfluent branch: variant has none");
  freeze_ = mask;
}

}  // namespace sk
