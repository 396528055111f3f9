// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "stutterkit/errors.hpp"
#include "stutterkit/logging.hpp"

namespace sk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

std::vector<AugmentationType> parse_types(const std::vector<std::string>& names) {
  std::vector<AugmentationType> out;
  for (const auto& n : names) {
    auto t = parse_augmentation(n);
    if (!t || *t == AugmentationType::Clean) throw ConfigError("unknown augmentation type '" + n + "'");
    if (std::find(out.begin(), out.end(), *t) == out.end()) out.push_back(*t);
  }
  if (out.empty()) throw ConfigError("no augmentation types selected");
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::map<Label, double> parse_imbalance(const std::string& s) {
  std::map<Label, double> out;
  for (const auto& item : split_list(s)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("imbalance entries look like F=4, got '" + item + "'");
    auto l = parse_label(item.substr(0, eq));
    if (!l) throw ConfigError("unknown label '" + item.substr(0, eq) + "'");
    try {
      out[*l] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad multiplier in '" + item + "'");
    }
  }
  return out;
}

std::string path_str(const fs::path& p) { return p.generic_string(); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void require(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("missing required ") + what);
}

void require_file(const fs::path& p, const char* what) {
  require(p, what);
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

/// Writes the resolved config with its hash and returns the hash.
std::string echo_config(const RunConfig& rc, const fs::path& path) {
  json j = rc.to_json();
  // The output location does not change results, so it stays out of the hash.
  json keyed = j;
  keyed["paths"].erase("out");
  const std::string hash = config_hash(keyed);
  j["config_hash"] = hash;
  write_text(path, j.dump(2) + "\n");
  return hash;
}

}  // namespace

// ---------------------------------------------------------------- config

json RunConfig::to_json() const {
  json synth_j{{"n_per_class", synth.n_per_class},
               {"clip_s", synth.clip_s},
               {"rate", synth.rate},
               {"n_podcasts", synth.n_podcasts},
               {"noise_level", synth.noise_level},
               {"imbalance", json::object()}};
  for (const auto& [l, m] : synth.class_imbalance) synth_j["imbalance"][std::string(label_short_name(l))] = m;
  json types = json::array();
  for (auto t : augment.types) types.push_back(std::string(augmentation_name(t)));
  json train_j = train.to_json();
  train_j.erase("seed");
  return json{{"seed", seed},
              {"jobs", jobs},
              {"features", feature_config_to_json(features)},
              {"train", train_j},
              {"synth", synth_j},
              {"augment",
               {{"pool", path_str(augment.pool)},
                {"types", types},
                {"noise_snr_mode", augment.noise_snr_mode == NoiseSnrMode::PerInterval ? "interval" : "clip"}}},
              {"split", {{"folds", split.folds}, {"valid", split.valid}, {"test", split.test}}},
              {"paths",
               {{"manifest", path_str(paths.manifest)},
                {"out", path_str(paths.out)},
                {"split", path_str(paths.split)},
                {"valid_manifest", path_str(paths.valid_manifest)},
                {"train_manifest", path_str(paths.train_manifest)},
                {"test_manifest", path_str(paths.test_manifest)},
                {"checkpoint", path_str(paths.checkpoint)},
                {"feature_cache", path_str(paths.feature_cache)}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, {"seed", "jobs", "features", "train", "synth", "augment", "split", "paths"}, "config");
  RunConfig rc;
  try {
    rc.seed = j.value("seed", rc.seed);
    rc.jobs = j.value("jobs", rc.jobs);
    if (j.contains("features")) rc.features = feature_config_from_json(j.at("features"));
    if (j.contains("train")) {
      if (j.at("train").contains("seed")) throw ConfigError("set the seed at the top level, not under 'train'");
      rc.train = TrainConfig::from_json(j.at("train"));
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      check_keys(s, {"n_per_class", "clip_s", "rate", "n_podcasts", "noise_level", "imbalance"}, "synth");
      rc.synth.n_per_class = s.value("n_per_class", rc.synth.n_per_class);
      rc.synth.clip_s = s.value("clip_s", rc.synth.clip_s);
      rc.synth.rate = s.value("rate", rc.synth.rate);
      rc.synth.n_podcasts = s.value("n_podcasts", rc.synth.n_podcasts);
      rc.synth.noise_level = s.value("noise_level", rc.synth.noise_level);
      if (s.contains("imbalance")) {
        for (const auto& [k, v] : s.at("imbalance").items()) {
          auto l = parse_label(k);
          if (!l) throw ConfigError("unknown label '" + k + "' in synth.imbalance");
          rc.synth.class_imbalance[*l] = v.get<double>();
        }
      }
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      check_keys(a, {"pool", "types", "noise_snr_mode"}, "augment");
      rc.augment.pool = a.value("pool", std::string{});
      if (a.contains("types")) rc.augment.types = parse_types(a.at("types").get<std::vector<std::string>>());
      if (a.contains("noise_snr_mode")) {
        const auto m = a.at("noise_snr_mode").get<std::string>();
        if (m != "interval" && m != "clip") throw ConfigError("noise_snr_mode must be 'interval' or 'clip'");
        rc.augment.noise_snr_mode = m == "interval" ? NoiseSnrMode::PerInterval : NoiseSnrMode::PerClip;
      }
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, {"folds", "valid", "test"}, "split");
      rc.split.folds = s.value("folds", rc.split.folds);
      rc.split.valid = s.value("valid", rc.split.valid);
      rc.split.test = s.value("test", rc.split.test);
    }
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      check_keys(p,
                 {"manifest", "out", "split", "valid_manifest", "train_manifest", "test_manifest", "checkpoint",
                  "feature_cache"},
                 "paths");
      rc.paths.manifest = p.value("manifest", std::string{});
      rc.paths.out = p.value("out", std::string{});
      rc.paths.split = p.value("split", std::string{});
      rc.paths.valid_manifest = p.value("valid_manifest", std::string{});
      rc.paths.train_manifest = p.value("train_manifest", std::string{});
      rc.paths.test_manifest = p.value("test_manifest", std::string{});
      rc.paths.checkpoint = p.value("checkpoint", std::string{});
      rc.paths.feature_cache = p.value("feature_cache", std::string{});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  rc.train.seed = rc.seed;
  rc.synth.seed = rc.seed;
  return rc;
}

// ---------------------------------------------------------------- commands

namespace {

/// Flag values; unset options leave the config untouched.
struct Flags {
  std::string config;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool verbose = false;

  std::optional<std::string> manifest, out, split, valid_manifest, train_manifest, test_manifest, checkpoint,
      feature_cache, pool;
  std::optional<int> n_per_class, n_podcasts, folds, batch_size, max_epochs, patience;
  std::optional<double> clip_s, noise_level, lr, valid_ratio, test_ratio;
  std::optional<std::string> imbalance, types, variant, loss, workflow, noise_snr_mode;
};

void apply(const Flags& f, RunConfig& rc) {
  if (f.jobs) rc.jobs = *f.jobs;
  if (f.manifest) rc.paths.manifest = *f.manifest;
  if (f.out) rc.paths.out = *f.out;
  if (f.split) rc.paths.split = *f.split;
  if (f.valid_manifest) rc.paths.valid_manifest = *f.valid_manifest;
  if (f.train_manifest) rc.paths.train_manifest = *f.train_manifest;
  if (f.test_manifest) rc.paths.test_manifest = *f.test_manifest;
  if (f.checkpoint) rc.paths.checkpoint = *f.checkpoint;
  if (f.feature_cache) rc.paths.feature_cache = *f.feature_cache;
  if (f.pool) rc.augment.pool = *f.pool;
  if (f.types) rc.augment.types = parse_types(split_list(*f.types));
  if (f.noise_snr_mode) {
    if (*f.noise_snr_mode != "interval" && *f.noise_snr_mode != "clip") {
      throw ConfigError("--noise-snr-mode must be interval or clip");
    }
    rc.augment.noise_snr_mode = *f.noise_snr_mode == "interval" ? NoiseSnrMode::PerInterval : NoiseSnrMode::PerClip;
  }
  if (f.n_per_class) rc.synth.n_per_class = *f.n_per_class;
  if (f.n_podcasts) rc.synth.n_podcasts = *f.n_podcasts;
  if (f.clip_s) rc.synth.clip_s = *f.clip_s;
  if (f.noise_level) rc.synth.noise_level = *f.noise_level;
  if (f.imbalance) rc.synth.class_imbalance = parse_imbalance(*f.imbalance);
  if (f.folds) rc.split.folds = *f.folds;
  if (f.valid_ratio) rc.split.valid = *f.valid_ratio;
  if (f.test_ratio) rc.split.test = *f.test_ratio;
  if (f.batch_size) rc.train.batch_size = *f.batch_size;
  if (f.max_epochs) rc.train.max_epochs = *f.max_epochs;
  if (f.patience) rc.train.patience = *f.patience;
  if (f.lr) rc.train.adam.lr = *f.lr;
  if (f.variant) {
    auto v = parse_variant(*f.variant);
    if (!v) throw ConfigError("--variant must be single, mb or mc");
    const ModelConfig old = rc.train.model;
    rc.train.model = ModelConfig::make(*v);
    rc.train.model.input_dim = old.input_dim;
    rc.train.model.tdnn_dims = old.tdnn_dims;
    rc.train.model.bilstm_hidden = old.bilstm_hidden;
    rc.train.model.bilstm_layers = old.bilstm_layers;
    rc.train.model.head = old.head;
    rc.train.model.disfluent_mode = old.disfluent_mode;
  }
  if (f.loss) {
    auto m = parse_loss_mode(*f.loss);
    if (!m) throw ConfigError("--loss must be ce or wce");
    rc.train.loss_mode = *m;
  }
  if (f.workflow) {
    auto w = parse_workflow(*f.workflow);
    if (!w) throw ConfigError("--workflow must be none, enc-frz, enc-disf-frz or enc-fluent-frz");
    rc.train.workflow = *w;
  }
  rc.train.seed = rc.seed;
  rc.synth.seed = rc.seed;
}

SplitRatios ratios(const SplitSection& s) { return {1.0 - s.valid - s.test, s.valid, s.test}; }

int cmd_synth(const RunConfig& rc, std::ostream& out) {
  require(rc.paths.out, "--out");
  rc.synth.validate();
  const Manifest m = generate(rc.synth, rc.paths.out);
  echo_config(rc, rc.paths.out / "synth_config.json");
  log_info("wrote ", m.size(), " clips");
  out << path_str(rc.paths.out / "manifest.csv") << "\n";
  return kOk;
}

int cmd_augment(const RunConfig& rc, std::ostream& out) {
  require_file(rc.paths.manifest, "--manifest");
  require_file(rc.augment.pool, "--pool");
  require(rc.paths.out, "--out");
  const Manifest clean = parse_manifest(rc.paths.manifest);
  const NoisePool pool = parse_noise_pool(rc.augment.pool);
  ExpandOptions opt;
  opt.types = rc.augment.types;
  opt.jobs = rc.jobs;
  opt.augment.noise_snr_mode = rc.augment.noise_snr_mode;
  fs::create_directories(rc.paths.out);
  const Manifest aug = expand_manifest(clean, pool, Rng(rc.seed), rc.paths.out, opt);
  write_manifest(rc.paths.out / "manifest.csv", aug);
  echo_config(rc, rc.paths.out / "augment_config.json");
  log_info("augmented ", clean.size(), " records into ", aug.size());
  out << path_str(rc.paths.out / "manifest.csv") << "\n";
  return kOk;
}

int cmd_features(const RunConfig& rc, std::ostream& out) {
  require_file(rc.paths.manifest, "--manifest");
  require(rc.paths.out, "--out");
  const Manifest m = parse_manifest(rc.paths.manifest);
  fs::create_directories(rc.paths.out);
  FeatureStore store(rc.features);
  std::size_t written = 0, skipped = 0;
  for (const auto& r : m.records) {
    try {
      write_features(rc.paths.out / (r.id + ".skft"), store.get(m, r));
      ++written;
    } catch (const DataError& e) {
      log_warn("skipping ", r.id, ": ", e.what());
      ++skipped;
    }
  }
  echo_config(rc, rc.paths.out / "features_config.json");
  out << written << " feature files written, " << skipped << " skipped\n";
  return kOk;
}

int cmd_split(const RunConfig& rc, std::ostream& out) {
  require_file(rc.paths.manifest, "--manifest");
  require(rc.paths.out, "--out");
  const Manifest m = parse_manifest(rc.paths.manifest);
  Rng rng(rc.seed);
  const SplitPlan plan = make_split(m, ratios(rc.split), rc.split.folds, rng);
  write_split(rc.paths.out, plan);
  out << path_str(rc.paths.out) << "\n";
  return kOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  require_file(rc.paths.manifest, "--manifest");
  require(rc.paths.out, "--out");
  rc.train.validate();
  if (rc.jobs < 1) throw ConfigError("--jobs must be >= 1");
  const Manifest m = parse_manifest(rc.paths.manifest);
  fs::create_directories(rc.paths.out);
  const std::string hash = echo_config(rc, rc.paths.out / "config.json");
  FeatureStore store(rc.features, rc.paths.feature_cache);

  if (!rc.paths.valid_manifest.empty()) {
    require_file(rc.paths.valid_manifest, "--valid-manifest");
    const Manifest valid = parse_manifest(rc.paths.valid_manifest);
    Checkpoint best;
    TrainingLog log;
    if (rc.train.workflow == FreezeWorkflow::None) {
      TrainResult r = train_fold(rc.train, m, valid, store);
      best = std::move(r.best);
      log = std::move(r.log);
    } else {
      FinetuneResult r = pretrain_finetune(rc.train, m, valid, store);
      best = std::move(r.finetuned.best);
      log = std::move(r.finetuned.log);
      write_text(rc.paths.out / "pretrain.log", r.pretrain_log.to_tsv());
    }
    best.meta["config_hash"] = hash;
    best.meta["features"] = feature_config_to_json(rc.features);
    write_checkpoint(rc.paths.out / "checkpoint.skck", best);
    write_text(rc.paths.out / "train.log", log.to_tsv());
    json summary{{"best_epoch", log.best_epoch}, {"best_val_loss", best.best_val_loss}, {"config_hash", hash}};
    if (!rc.paths.test_manifest.empty()) {
      require_file(rc.paths.test_manifest, "--test-manifest");
      StutterNet net = load_model(best);
      const RunReport rep = evaluate(net, parse_manifest(rc.paths.test_manifest), store, rc.train.batch_size, "test", hash);
      write_text(rc.paths.out / "report.json", rep.to_json().dump(2) + "\n");
      summary["report"] = rep.to_json();
    }
    out << summary.dump(2) << "\n";
    return kOk;
  }

  SplitPlan plan;
  if (!rc.paths.split.empty()) {
    require_file(rc.paths.split, "--split");
    plan = read_split(rc.paths.split);
  } else {
    Rng rng(rc.seed);
    plan = make_split(m, ratios(rc.split), rc.split.folds, rng);
  }
  write_split(rc.paths.out / "split.json", plan);

  CvOptions opt;
  opt.jobs = rc.jobs;
  opt.out_dir = rc.paths.out;
  opt.config_hash = hash;
  const CvResult res = run_cv(rc.train, m, plan, store, opt);
  json all = json::array();
  for (const auto& r : res.folds) all.push_back(r.to_json());
  write_text(rc.paths.out / "average.json", res.average.to_json().dump(2) + "\n");
  write_text(rc.paths.out / "reports.json", json{{"folds", all}, {"average", res.average.to_json()}}.dump(2) + "\n");
  out << res.average.to_json().dump(2) << "\n";
  if (res.folds.empty()) {
    log(LogLevel::Error, "every fold failed");
    return kDataError;
  }
  return kOk;
}

int cmd_eval(const RunConfig& rc, bool features_given, std::ostream& out) {
  require_file(rc.paths.checkpoint, "--checkpoint");
  require_file(rc.paths.test_manifest, "--test-manifest");
  const Checkpoint ck = read_checkpoint(rc.paths.checkpoint);
  FeatureConfig fc = rc.features;
  if (ck.meta.contains("features")) {
    const FeatureConfig stored = feature_config_from_json(ck.meta.at("features"));
    if (features_given && !(stored == fc)) {
      throw IncompatibleError("feature config differs from the one the checkpoint was trained with");
    }
    fc = stored;
  }
  if (fc.n_mfcc != ck.model.input_dim) {
    throw IncompatibleError("checkpoint expects " + std::to_string(ck.model.input_dim) + "-dim features, config has " +
                            std::to_string(fc.n_mfcc));
  }
  StutterNet net = load_model(ck);
  const Manifest test = parse_manifest(rc.paths.test_manifest);
  FeatureStore store(fc, rc.paths.feature_cache);
  const std::string hash = ck.meta.value("config_hash", std::string{});
  RunReport rep = evaluate(net, test, store, rc.train.batch_size, "eval", hash);
  json j = rep.to_json();
  j["test_manifest"] = path_str(rc.paths.test_manifest);
  if (!rc.paths.train_manifest.empty()) j["train_manifest"] = path_str(rc.paths.train_manifest);
  if (!rc.paths.out.empty()) write_text(rc.paths.out, j.dump(2) + "\n");
  out << j.dump(2) << "\n";
  return kOk;
}

int cmd_report(const RunConfig& rc, std::ostream& out) {
  require(rc.paths.out, "--run-dir");
  std::vector<RunReport> reports;
  std::vector<fs::path> fold_dirs;
  if (fs::is_directory(rc.paths.out)) {
    for (const auto& e : fs::directory_iterator(rc.paths.out)) {
      if (e.is_directory() && e.path().filename().string().starts_with("fold_") && fs::exists(e.path() / "report.json")) {
        fold_dirs.push_back(e.path());
      }
    }
  }
  std::sort(fold_dirs.begin(), fold_dirs.end(), [](const fs::path& a, const fs::path& b) {
    return std::stoi(a.filename().string().substr(5)) < std::stoi(b.filename().string().substr(5));
  });
  for (const auto& d : fold_dirs) reports.push_back(RunReport::from_json(read_json(d / "report.json")));
  for (const char* name : {"average.json", "report.json"}) {
    if (fs::exists(rc.paths.out / name)) reports.push_back(RunReport::from_json(read_json(rc.paths.out / name)));
  }
  if (fs::is_regular_file(rc.paths.out)) reports.push_back(RunReport::from_json(read_json(rc.paths.out)));
  if (reports.empty()) throw ConfigError("no reports found under " + rc.paths.out.string());

  out << std::left << std::setw(10) << "fold";
  for (Label l : kAllLabels) out << std::right << std::setw(8) << label_short_name(l);
  out << std::setw(8) << "TA" << std::setw(8) << "F1" << std::setw(10) << "coverage" << "\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : reports) {
    out << std::left << std::setw(10) << r.fold_id << std::right;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      if (k < r.per_class_accuracy.size() && r.per_class_accuracy[k]) {
        out << std::setw(8) << 100.0 * *r.per_class_accuracy[k];
      } else {
        out << std::setw(8) << "-";
      }
    }
    out << std::setw(8) << 100.0 * r.total_accuracy << std::setw(8) << 100.0 * r.macro_f1 << std::setw(10)
        << 100.0 * r.coverage << (r.partial ? "  (partial)" : "") << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"stutterkit: stuttering detection training and evaluation"};
  app.require_subcommand(1);
  // Global options may also follow the subcommand.
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration");
  app.add_option("--jobs", f.jobs, "parallel workers");
  app.add_option("--seed", f.seed, "random seed (overrides SK_SEED and the config)");
  app.add_flag("-q,--quiet", f.quiet, "only print warnings and errors");
  app.add_flag("-v,--verbose", f.verbose, "print per-epoch progress");

  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  synth->add_option("--out", f.out, "output directory");
  synth->add_option("--n-per-class", f.n_per_class);
  synth->add_option("--n-podcasts", f.n_podcasts);
  synth->add_option("--clip-s", f.clip_s);
  synth->add_option("--noise-level", f.noise_level);
  synth->add_option("--imbalance", f.imbalance, "per-class multipliers, e.g. F=4");

  auto* augment = app.add_subcommand("augment", "expand a clean manifest with augmented copies");
  augment->add_option("--manifest", f.manifest);
  augment->add_option("--pool", f.pool, "noise pool listing");
  augment->add_option("--out", f.out, "output directory");
  augment->add_option("--types", f.types, "comma list of music,noise,babble,reverb");
  augment->add_option("--noise-snr-mode", f.noise_snr_mode, "interval or clip");

  auto* features = app.add_subcommand("features", "write MFCC matrices for every record");
  features->add_option("--manifest", f.manifest);
  features->add_option("--out", f.out, "output directory");

  auto* split = app.add_subcommand("split", "build a podcast-grouped fold plan");
  split->add_option("--manifest", f.manifest);
  split->add_option("--out", f.out, "plan file");
  split->add_option("--folds", f.folds);
  split->add_option("--valid-ratio", f.valid_ratio);
  split->add_option("--test-ratio", f.test_ratio);

  auto* train = app.add_subcommand("train", "cross-validated or single-split training");
  train->add_option("--manifest", f.manifest);
  train->add_option("--out", f.out, "run directory");
  train->add_option("--split", f.split, "fold plan file");
  train->add_option("--folds", f.folds);
  train->add_option("--valid-manifest", f.valid_manifest, "train on --manifest, validate on this");
  train->add_option("--test-manifest", f.test_manifest, "with --valid-manifest: evaluate on this");
  train->add_option("--variant", f.variant, "single, mb or mc");
  train->add_option("--loss", f.loss, "ce or wce");
  train->add_option("--workflow", f.workflow, "none, enc-frz, enc-disf-frz or enc-fluent-frz");
  train->add_option("--lr", f.lr);
  train->add_option("--batch-size", f.batch_size);
  train->add_option("--max-epochs", f.max_epochs);
  train->add_option("--patience", f.patience);
  train->add_option("--feature-cache", f.feature_cache);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  eval->add_option("--checkpoint", f.checkpoint);
  eval->add_option("--test-manifest", f.test_manifest);
  eval->add_option("--train-manifest", f.train_manifest, "recorded in the report for cross-corpus runs");
  eval->add_option("--out", f.out, "report file");
  eval->add_option("--batch-size", f.batch_size);
  eval->add_option("--feature-cache", f.feature_cache);

  auto* report = app.add_subcommand("report", "tabulate run reports");
  report->add_option("--run-dir", f.out, "run directory or report file");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  const LogLevel prev = log_level();
  set_log_level(f.quiet ? LogLevel::Warn : f.verbose ? LogLevel::Debug : LogLevel::Info);
  int code = kFailure;
  try {
    json cfg_json = json::object();
    if (!f.config.empty()) cfg_json = read_json(f.config);
    RunConfig rc = RunConfig::from_json(cfg_json);
    if (const char* env = std::getenv("SK_SEED"); env && *env) {
      try {
        rc.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("SK_SEED is not an unsigned integer: ") + env);
      }
    }
    if (f.seed) rc.seed = *f.seed;
    apply(f, rc);

    if (synth->parsed()) {
      code = cmd_synth(rc, out);
    } else if (augment->parsed()) {
      code = cmd_augment(rc, out);
    } else if (features->parsed()) {
      code = cmd_features(rc, out);
    } else if (split->parsed()) {
      code = cmd_split(rc, out);
    } else if (train->parsed()) {
      code = cmd_train(rc, out);
    } else if (eval->parsed()) {
      code = cmd_eval(rc, cfg_json.contains("features"), out);
    } else if (report->parsed()) {
      code = cmd_report(rc, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    code = kUsage;
  } catch (const PoolError& e) {
    err << "error: " << e.what() << "\n";
    code = kUsage;
  } catch (const IncompatibleError& e) {
    err << "error: " << e.what() << "\n";
    code = kIncompatible;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    code = kDataError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    code = kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kFailure;
  }
  set_log_level(prev);
  return code;
}

}  // namespace sk::cli
