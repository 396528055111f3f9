// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

#include "stutterkit/audio.hpp"
#include "stutterkit/errors.hpp"
#include "stutterkit/logging.hpp"

namespace sk {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view loss_mode_name(LossMode m) { return m == LossMode::CE ? "ce" : "wce"; }

std::optional<LossMode> parse_loss_mode(std::string_view s) {
  if (s == "ce") return LossMode::CE;
  if (s == "wce") return LossMode::WCE;
  return std::nullopt;
}

std::string_view workflow_name(FreezeWorkflow w) {
  switch (w) {
    case FreezeWorkflow::None: return "none";
    case FreezeWorkflow::EncFrz: return "enc-frz";
    case FreezeWorkflow::EncDisfFrz: return "enc-disf-frz";
    case FreezeWorkflow::EncFluentFrz: return "enc-fluent-frz";
  }
  return "?";
}

std::optional<FreezeWorkflow> parse_workflow(std::string_view s) {
  for (auto w : {FreezeWorkflow::None, FreezeWorkflow::EncFrz, FreezeWorkflow::EncDisfFrz,
                 FreezeWorkflow::EncFluentFrz}) {
    if (s == workflow_name(w)) return w;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (!(adam.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  model.validate();
  if (workflow != FreezeWorkflow::None && !(model.fluent_head && model.disfluent_head)) {
    throw ConfigError("freeze workflows need a model with both branches (mb or mc)");
  }
}

json TrainConfig::to_json() const {
  return json{{"lr", adam.lr},
              {"beta1", adam.beta1},
              {"beta2", adam.beta2},
              {"eps", adam.eps},
              {"batch_size", batch_size},
              {"max_epochs", max_epochs},
              {"patience", patience},
              {"seed", seed},
              {"model", model.to_json()},
              {"loss", std::string(loss_mode_name(loss_mode))},
              {"workflow", std::string(workflow_name(workflow))}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be an object");
  static const std::set<std::string> known = {"lr",       "beta1",   "beta2", "eps",  "batch_size", "max_epochs",
                                              "patience", "seed",    "model", "loss", "workflow"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown train config key '" + k + "'");
  }
  TrainConfig c;
  try {
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("eps", c.adam.eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("loss")) {
      auto m = parse_loss_mode(j.at("loss").get<std::string>());
      if (!m) throw ConfigError("loss must be 'ce' or 'wce'");
      c.loss_mode = *m;
    }
    if (j.contains("workflow")) {
      auto w = parse_workflow(j.at("workflow").get<std::string>());
      if (!w) throw ConfigError("unknown workflow '" + j.at("workflow").get<std::string>() + "'");
      c.workflow = *w;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

json feature_config_to_json(const FeatureConfig& c) {
  return json{{"n_mfcc", c.n_mfcc},       {"win_ms", c.win_ms},         {"hop_ms", c.hop_ms},
              {"n_mels", c.n_mels},       {"fft_size", c.fft_size},     {"preemphasis", c.preemphasis},
              {"log_floor", c.log_floor}, {"low_freq", c.low_freq},     {"high_freq", c.high_freq},
              {"keep_c0", c.keep_c0},     {"cmn", c.cmn}};
}

FeatureConfig feature_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("feature config must be an object");
  static const std::set<std::string> known = {"n_mfcc",    "win_ms",   "hop_ms",    "n_mels",  "fft_size", "preemphasis",
                                              "log_floor", "low_freq", "high_freq", "keep_c0", "cmn"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown feature config key '" + k + "'");
  }
  FeatureConfig c;
  try {
    c.n_mfcc = j.value("n_mfcc", c.n_mfcc);
    c.win_ms = j.value("win_ms", c.win_ms);
    c.hop_ms = j.value("hop_ms", c.hop_ms);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.fft_size = j.value("fft_size", c.fft_size);
    c.preemphasis = j.value("preemphasis", c.preemphasis);
    c.log_floor = j.value("log_floor", c.log_floor);
    c.low_freq = j.value("low_freq", c.low_freq);
    c.high_freq = j.value("high_freq", c.high_freq);
    c.keep_c0 = j.value("keep_c0", c.keep_c0);
    c.cmn = j.value("cmn", c.cmn);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("feature config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- features

FeatureStore::FeatureStore(FeatureConfig cfg, fs::path cache_dir) : cfg_(cfg), cache_dir_(std::move(cache_dir)) {
  cfg_.validate();
}

const FeatureMatrix& FeatureStore::get(const Manifest& m, const SegmentRecord& r) {
  const fs::path path = m.resolve(r);
  char buf[64];
  std::snprintf(buf, sizeof buf, "|%.17g|%.17g", r.offset_s, r.duration_s);
  const std::string key = path.string() + buf;
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
  }
  fs::path cached;
  if (!cache_dir_.empty()) {
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.skft",
                  static_cast<unsigned long long>(mix_seed(fnv1a64(key), fnv1a64(feature_config_to_json(cfg_).dump()))));
    cached = cache_dir_ / name;
  }
  auto f = std::make_unique<FeatureMatrix>();
  if (!cached.empty() && fs::exists(cached)) {
    *f = read_features(cached);
  } else {
    *f = mfcc(load_audio_segment(path, r.offset_s, r.duration_s), cfg_);
    if (!cached.empty()) {
      fs::create_directories(cache_dir_);
      write_features(cached, *f);
      // The cache stores float32; reload so cached and fresh runs agree.
      *f = read_features(cached);
    }
  }
  std::lock_guard lock(mu_);
  auto [it, inserted] = cache_.try_emplace(key, std::move(f));
  return *it->second;
}

void FeatureStore::precompute(const Manifest& m, int jobs) {
  if (jobs <= 1 || m.size() < 2) {
    for (const auto& r : m.records) get(m, r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < m.size();) {
        try {
          get(m, m.records[i]);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------- logs

std::string TrainingLog::to_tsv(bool with_elapsed) const {
  auto num = [](std::optional<double> v) -> std::string {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
  };
  std::string out = "epoch\ttrain_loss\tval_loss\ttrain_fluent\ttrain_disfluent\tval_fluent\tval_disfluent";
  if (with_elapsed) out += "\telapsed_s";
  out += "\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "\t" + num(e.train_loss) + "\t" + num(e.val_loss) + "\t" + num(e.train_fluent) +
           "\t" + num(e.train_disfluent) + "\t" + num(e.val_fluent) + "\t" + num(e.val_disfluent);
    if (with_elapsed) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", e.elapsed_s);
      out += std::string("\t") + buf;
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------- losses

int disfluent_target(const ModelConfig& model, Label l) {
  if (model.disfluent_mode == DisfluentHeadMode::FourClass && l == Label::Fluent) return kIgnoreLabel;
  return label_index(l);
}

LossSetup make_loss_setup(const ModelConfig& model, LossMode mode, const Manifest& train) {
  LossSetup s{ClassWeights::uniform(static_cast<std::size_t>(model.disfluent_classes())), ClassWeights::uniform(2)};
  if (mode == LossMode::CE) return s;
  const auto counts = train.class_counts();
  if (model.disfluent_head) {
    std::vector<std::size_t> c;
    std::vector<std::string> names;
    for (int k = 0; k < model.disfluent_classes(); ++k) {
      c.push_back(counts[static_cast<std::size_t>(k)]);
      names.emplace_back(label_name(static_cast<Label>(k)));
    }
    s.disfluent = inverse_frequency_weights(c, names);
  }
  if (model.fluent_head) {
    const std::size_t fluent = counts[static_cast<std::size_t>(label_index(Label::Fluent))];
    s.fluent = inverse_frequency_weights({fluent, train.size() - fluent}, {"Fluent", "Disfluent"});
  }
  return s;
}

StepLoss batch_loss(StutterNet& net, const std::vector<const FeatureMatrix*>& feats, const std::vector<Label>& labels,
                    const LossSetup& setup, nn::Phase phase, std::uint64_t dropout_seed) {
  const auto out = net.forward(std::span<const FeatureMatrix* const>(feats), phase, dropout_seed);
  StepLoss s;
  std::optional<LogitLoss> lf, ld;
  if (out.fluent_logits) {
    std::vector<int> y;
    for (Label l : labels) y.push_back(static_cast<int>(fluent_pseudo_label(l)));
    lf = wce_from_logits(*out.fluent_logits, y, setup.fluent);
    s.fluent = lf->loss.value;
  }
  if (out.disfluent_logits) {
    std::vector<int> y;
    for (Label l : labels) y.push_back(disfluent_target(net.config(), l));
    ld = wce_from_logits(*out.disfluent_logits, y, setup.disfluent);
    s.disfluent = ld->loss.value;
  }
  s.total = joint_loss(s.fluent.value_or(0.0), s.disfluent.value_or(0.0));
  if (phase == nn::Phase::Train) {
    net.zero_grad();
    net.backward(lf ? &lf->grad : nullptr, ld ? &ld->grad : nullptr);
  }
  return s;
}

// ---------------------------------------------------------------- training

namespace {

struct Accum {
  double total = 0.0, fluent = 0.0, disfluent = 0.0;
  int n = 0;
  void add(const StepLoss& s) {
    total += s.total;
    fluent += s.fluent.value_or(0.0);
    disfluent += s.disfluent.value_or(0.0);
    ++n;
  }
};

double mean(double s, int n) { return n > 0 ? s / n : 0.0; }

std::vector<const FeatureMatrix*> gather(FeatureStore& store, const Manifest& m, const std::vector<std::size_t>& idx) {
  std::vector<const FeatureMatrix*> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(&store.get(m, m.records[i]));
  return out;
}

Accum validation_loss(StutterNet& net, const Manifest& valid, FeatureStore& store, const LossSetup& setup,
                      int batch_size) {
  Accum a;
  for (std::size_t b = 0; b < valid.size(); b += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    std::vector<Label> labels;
    for (std::size_t i = b; i < std::min(valid.size(), b + static_cast<std::size_t>(batch_size)); ++i) {
      idx.push_back(i);
      labels.push_back(valid.records[i].label);
    }
    a.add(batch_loss(net, gather(store, valid, idx), labels, setup, nn::Phase::Eval, 0));
  }
  return a;
}

}  // namespace

TrainResult train_model(StutterNet& net, const TrainConfig& cfg, const Manifest& train, const Manifest& valid,
                        FeatureStore& store, const TrainHooks& hooks) {
  cfg.validate();
  if (train.empty()) throw ValidationError("training manifest is empty");
  if (valid.empty()) throw ValidationError("validation manifest is empty");
  const ModelConfig& mc = net.config();
  const LossSetup setup = make_loss_setup(mc, cfg.loss_mode, train);
  store.precompute(train);
  store.precompute(valid);

  Adam opt(cfg.adam);
  TrainResult res;
  double best = std::numeric_limits<double>::infinity();
  int since = 0;
  const auto t0 = std::chrono::steady_clock::now();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    Accum tr;
    std::size_t batch_id = 0;
    for (std::size_t b = 0; b < order.size(); b += bs, ++batch_id) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + bs)));
      std::vector<Label> labels;
      std::vector<std::string> ids;
      for (auto i : idx) {
        labels.push_back(train.records[i].label);
        ids.push_back(train.records[i].id);
      }
      if (hooks.on_batch) hooks.on_batch(ids);
      const std::uint64_t dseed = mix_seed(mix_seed(cfg.seed ^ 0x5eedULL, static_cast<std::uint64_t>(epoch)), batch_id);
      const StepLoss s = batch_loss(net, gather(store, train, idx), labels, setup, nn::Phase::Train, dseed);
      if (!std::isfinite(s.total)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "non-finite training loss at epoch %d, batch %zu (lr %g)", epoch, batch_id,
                      cfg.adam.lr);
        throw TrainingDivergedError(buf);
      }
      opt.step(net.parameters(), net.freeze_mask());
      tr.add(s);
    }

    const Accum va = validation_loss(net, valid, store, setup, cfg.batch_size);
    double val = mean(va.total, va.n);
    if (!std::isfinite(val)) {
      throw TrainingDivergedError("non-finite validation loss at epoch " + std::to_string(epoch) + " (lr " +
                                  std::to_string(cfg.adam.lr) + ")");
    }
    if (hooks.val_loss_override) val = hooks.val_loss_override(epoch, val);

    EpochLog e;
    e.epoch = epoch;
    e.train_loss = mean(tr.total, tr.n);
    e.val_loss = val;
    if (mc.fluent_head) {
      e.train_fluent = mean(tr.fluent, tr.n);
      e.val_fluent = mean(va.fluent, va.n);
    }
    if (mc.disfluent_head) {
      e.train_disfluent = mean(tr.disfluent, tr.n);
      e.val_disfluent = mean(va.disfluent, va.n);
    }
    e.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.log.epochs.push_back(e);

    if (val < best) {
      best = val;
      since = 0;
      res.log.best_epoch = epoch;
      res.best = capture(net, &opt, epoch, best);
    } else {
      ++since;
    }
    log(LogLevel::Debug, "epoch ", epoch, " train ", e.train_loss, " val ", val, since == 0 ? " *" : "");
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, net);
    if (since >= cfg.patience) {
      res.log.stopped_early = true;
      break;
    }
  }
  restore(net, res.best);
  return res;
}

TrainResult train_fold(const TrainConfig& cfg, const Manifest& train, const Manifest& valid, FeatureStore& store,
                       const TrainHooks& hooks) {
  cfg.validate();
  StutterNet net(cfg.model, cfg.seed);
  return train_model(net, cfg, train, valid, store, hooks);
}

FreezeMask workflow_mask(FreezeWorkflow w) {
  switch (w) {
    case FreezeWorkflow::None: return {};
    case FreezeWorkflow::EncFrz: return {true, false, false};
    case FreezeWorkflow::EncDisfFrz: return {true, false, true};
    case FreezeWorkflow::EncFluentFrz: return {true, true, false};
  }
  return {};
}

FinetuneResult pretrain_finetune(const TrainConfig& cfg, const Manifest& train, const Manifest& valid,
                                 FeatureStore& store, const TrainHooks& pretrain_hooks,
                                 const TrainHooks& finetune_hooks) {
  cfg.validate();
  if (cfg.workflow == FreezeWorkflow::None) throw ConfigError("pretrain_finetune needs a freeze workflow");
  const bool via_fluent = cfg.workflow == FreezeWorkflow::EncFluentFrz;

  TrainConfig pre = cfg;
  pre.workflow = FreezeWorkflow::None;
  pre.loss_mode = LossMode::WCE;
  pre.model.kind = VariantKind::SingleBranch;
  pre.model.fluent_head = via_fluent;
  pre.model.disfluent_head = !via_fluent;

  FinetuneResult out;
  TrainResult pr = train_fold(pre, train, valid, store, pretrain_hooks);
  out.pretrained = pr.best;
  out.pretrain_log = pr.log;

  StutterNet net(cfg.model, mix_seed(cfg.seed, fnv1a64("finetune")));
  const ParamGroup kept = via_fluent ? ParamGroup::FluentBranch : ParamGroup::DisfluentBranch;
  transplant(net, out.pretrained, {ParamGroup::Encoder, kept});
  net.apply_freeze(workflow_mask(cfg.workflow));
  out.finetuned = train_model(net, cfg, train, valid, store, finetune_hooks);
  return out;
}

// ---------------------------------------------------------------- evaluation

RunReport evaluate(StutterNet& net, const Manifest& test, FeatureStore& store, int batch_size, std::string fold_id,
                   std::string cfg_hash, std::vector<Prediction>* predictions) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  const ModelConfig& mc = net.config();
  const bool fluent_only = mc.fluent_head && !mc.disfluent_head;
  EvalCounts counts(fluent_only ? 2 : kNumClasses);
  std::size_t skipped = 0;

  std::vector<std::size_t> ok;
  std::vector<const FeatureMatrix*> feats;
  for (std::size_t i = 0; i < test.size(); ++i) {
    try {
      const FeatureMatrix& f = store.get(test, test.records[i]);
      if (f.frames() < mc.min_frames()) throw TooShortError("segment too short for the model context");
      feats.push_back(&f);
      ok.push_back(i);
    } catch (const DataError& e) {
      log_warn("skipping ", test.records[i].id, ": ", e.what());
      ++skipped;
    } catch (const IoError& e) {
      log_warn("skipping ", test.records[i].id, ": ", e.what());
      ++skipped;
    }
  }

  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t b = 0; b < ok.size(); b += bs) {
    const std::size_t e = std::min(ok.size(), b + bs);
    std::vector<const FeatureMatrix*> chunk(feats.begin() + static_cast<std::ptrdiff_t>(b),
                                            feats.begin() + static_cast<std::ptrdiff_t>(e));
    const auto out = net.forward(std::span<const FeatureMatrix* const>(chunk), nn::Phase::Eval, 0);
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      const auto& rec = test.records[ok[b + k]];
      const auto r = static_cast<Index>(k);
      int truth = label_index(rec.label);
      int pred = 0;
      if (fluent_only) {
        const Eigen::RowVectorXd p = out.fluent_probs->row(r);
        truth = static_cast<int>(fluent_pseudo_label(rec.label));
        pred = static_cast<int>(argmax(std::span<const double>(p.data(), 2)));
      } else if (mc.fluent_head) {
        const Eigen::RowVectorXd pf = out.fluent_probs->row(r);
        const Eigen::RowVectorXd pd = out.disfluent_probs->row(r);
        pred = label_index(combined_prediction(std::span<const double>(pf.data(), 2),
                                               std::span<const double>(pd.data(), static_cast<std::size_t>(pd.size()))));
      } else {
        const Eigen::RowVectorXd pd = out.disfluent_probs->row(r);
        pred = static_cast<int>(argmax(std::span<const double>(pd.data(), static_cast<std::size_t>(pd.size()))));
      }
      counts.add(truth, pred);
      if (predictions) predictions->push_back({rec.id, rec.label, pred});
    }
  }
  RunReport rep = make_report(counts, std::move(fold_id), std::move(cfg_hash), skipped);
  if (skipped > 0) log_warn("evaluation coverage ", rep.coverage * 100.0, "% (", skipped, " skipped)");
  return rep;
}

// ---------------------------------------------------------------- cross-validation

Manifest select(const Manifest& m, const std::set<std::string>& podcasts, bool clean_only) {
  Manifest out = m.subset(podcasts);
  if (clean_only) {
    std::erase_if(out.records, [](const SegmentRecord& r) { return r.augmentation != AugmentationType::Clean; });
  }
  return out;
}

CvResult run_cv(const TrainConfig& cfg, const Manifest& m, const SplitPlan& plan, FeatureStore& store,
                const CvOptions& opt) {
  cfg.validate();
  if (plan.folds.empty()) throw ConfigError("split plan has no folds");
  const auto present = m.podcasts();
  for (const auto& f : plan.folds) {
    for (const auto* s : {&f.train, &f.valid, &f.test}) {
      for (const auto& p : *s) {
        if (!present.count(p)) throw ValidationError("split plan names podcast '" + p + "' absent from the manifest");
      }
    }
  }

  const std::size_t n = plan.folds.size();
  std::vector<std::optional<RunReport>> reports(n);
  std::vector<TrainingLog> logs(n);
  std::vector<std::string> errors(n);

  auto run_one = [&](std::size_t k) {
    const auto& f = plan.folds[k];
    const Manifest train = select(m, f.train, false);
    const Manifest valid = select(m, f.valid, true);
    const Manifest test = select(m, f.test, true);
    const TrainHooks hooks = opt.hooks ? opt.hooks(k) : TrainHooks{};
    std::optional<StutterNet> net;
    Checkpoint best;
    if (cfg.workflow == FreezeWorkflow::None) {
      net.emplace(cfg.model, cfg.seed);
      TrainResult r = train_model(*net, cfg, train, valid, store, hooks);
      logs[k] = r.log;
      best = std::move(r.best);
    } else {
      FinetuneResult r = pretrain_finetune(cfg, train, valid, store, {}, hooks);
      logs[k] = r.finetuned.log;
      best = std::move(r.finetuned.best);
      net.emplace(load_model(best));
    }
    reports[k] = evaluate(*net, test, store, cfg.batch_size, std::to_string(k), opt.config_hash);
    if (!opt.out_dir.empty()) {
      const fs::path dir = opt.out_dir / ("fold_" + std::to_string(k));
      fs::create_directories(dir);
      std::ofstream(dir / "train.log") << logs[k].to_tsv();
      best.meta["config_hash"] = opt.config_hash;
      best.meta["features"] = feature_config_to_json(store.config());
      write_checkpoint(dir / "checkpoint.skck", best);
      std::ofstream(dir / "report.json") << reports[k]->to_json().dump(2) << "\n";
    }
  };
  auto guarded = [&](std::size_t k) {
    try {
      run_one(k);
    } catch (const std::exception& e) {
      errors[k] = e.what();
      log_warn("fold ", k, " failed: ", e.what());
    }
  };

  if (opt.jobs <= 1) {
    for (std::size_t k = 0; k < n; ++k) guarded(k);
  } else {
    // Features are computed once up front so workers only read the cache.
    store.precompute(m, opt.jobs);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(opt.jobs, static_cast<int>(n)); ++t) {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < n;) guarded(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  CvResult res;
  for (std::size_t k = 0; k < n; ++k) {
    if (reports[k]) {
      res.folds.push_back(*reports[k]);
      res.logs.push_back(logs[k]);
    } else {
      res.failures.push_back("fold " + std::to_string(k) + ": " + errors[k]);
    }
  }
  res.average = average_reports(res.folds, res.failures);
  res.average.config_hash = opt.config_hash;
  return res;
}

}  // namespace sk
