// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/metrics.hpp"

#include <cstdio>

#include "stutterkit/errors.hpp"
#include "stutterkit/rng.hpp"

namespace sk {

EvalCounts::EvalCounts(int n_classes) : c_(n_classes), cells_(static_cast<std::size_t>(n_classes * n_classes), 0) {
  if (n_classes < 1) throw ContractViolation("confusion matrix needs at least one class");
}

void EvalCounts::add(int truth, int predicted, std::int64_t count) {
  if (truth < 0 || truth >= c_ || predicted < 0 || predicted >= c_) {
    throw ContractViolation("confusion index out of range");
  }
  if (count < 0) throw ContractViolation("negative confusion count");
  cells_[static_cast<std::size_t>(truth * c_ + predicted)] += count;
  n_ += count;
}

std::int64_t EvalCounts::at(int truth, int predicted) const {
  return cells_[static_cast<std::size_t>(truth * c_ + predicted)];
}

std::int64_t EvalCounts::row_sum(int truth) const {
  std::int64_t s = 0;
  for (int p = 0; p < c_; ++p) s += at(truth, p);
  return s;
}

std::int64_t EvalCounts::col_sum(int predicted) const {
  std::int64_t s = 0;
  for (int t = 0; t < c_; ++t) s += at(t, predicted);
  return s;
}

EvalCounts& EvalCounts::operator+=(const EvalCounts& o) {
  if (o.c_ != c_) throw ContractViolation("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += o.cells_[i];
  n_ += o.n_;
  return *this;
}

std::vector<std::vector<std::int64_t>> EvalCounts::rows() const {
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(c_));
  for (int t = 0; t < c_; ++t) {
    for (int p = 0; p < c_; ++p) out[static_cast<std::size_t>(t)].push_back(at(t, p));
  }
  return out;
}

std::vector<double> per_class_f1(const EvalCounts& c) {
  std::vector<double> f1(static_cast<std::size_t>(c.n_classes()), 0.0);
  for (int k = 0; k < c.n_classes(); ++k) {
    const double tp = static_cast<double>(c.at(k, k));
    const double pred = static_cast<double>(c.col_sum(k));
    const double sup = static_cast<double>(c.row_sum(k));
    if (pred == 0.0 || sup == 0.0) continue;
    const double p = tp / pred;
    const double r = tp / sup;
    if (p + r > 0.0) f1[static_cast<std::size_t>(k)] = 2.0 * p * r / (p + r);
  }
  return f1;
}

double macro_f1(const EvalCounts& c) {
  const auto f1 = per_class_f1(c);
  double s = 0.0;
  for (double v : f1) s += v;
  return s / static_cast<double>(f1.size());
}

std::vector<std::optional<double>> per_class_accuracy(const EvalCounts& c) {
  std::vector<std::optional<double>> acc(static_cast<std::size_t>(c.n_classes()));
  for (int k = 0; k < c.n_classes(); ++k) {
    const auto sup = c.row_sum(k);
    if (sup > 0) acc[static_cast<std::size_t>(k)] = static_cast<double>(c.at(k, k)) / static_cast<double>(sup);
  }
  return acc;
}

double total_accuracy(const EvalCounts& c) {
  if (c.n() == 0) return 0.0;
  std::int64_t diag = 0;
  for (int k = 0; k < c.n_classes(); ++k) diag += c.at(k, k);
  return static_cast<double>(diag) / static_cast<double>(c.n());
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ContractViolation("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Label combined_prediction(std::span<const double> fluent_probs, std::span<const double> disfluent_probs) {
  if (fluent_probs.size() != 2) throw ContractViolation("fluent head must have 2 outputs");
  if (disfluent_probs.size() != 5 && disfluent_probs.size() != 4) {
    throw ContractViolation("disfluent head must have 4 or 5 outputs");
  }
  if (argmax(fluent_probs) == static_cast<std::size_t>(FluencyLabel::Fluent)) return Label::Fluent;
  return static_cast<Label>(argmax(disfluent_probs.first(4)));
}

RunReport make_report(const EvalCounts& counts, std::string fold_id, std::string config_hash,
                      std::size_t n_skipped) {
  RunReport r;
  r.fold_id = std::move(fold_id);
  r.config_hash = std::move(config_hash);
  r.confusion = counts;
  r.per_class_accuracy = per_class_accuracy(counts);
  r.total_accuracy = total_accuracy(counts);
  r.macro_f1 = macro_f1(counts);
  r.n_evaluated = static_cast<std::size_t>(counts.n());
  r.n_skipped = n_skipped;
  const double total = static_cast<double>(r.n_evaluated + n_skipped);
  r.coverage = total > 0 ? static_cast<double>(r.n_evaluated) / total : 1.0;
  return r;
}

RunReport average_reports(const std::vector<RunReport>& folds, const std::vector<std::string>& failures) {
  RunReport avg;
  avg.fold_id = "average";
  avg.failures = failures;
  avg.partial = !failures.empty();
  if (folds.empty()) {
    avg.partial = true;
    return avg;
  }
  const int c = folds.front().confusion.n_classes();
  avg.confusion = EvalCounts(c);
  avg.config_hash = folds.front().config_hash;
  std::vector<double> acc_sum(static_cast<std::size_t>(c), 0.0);
  std::vector<int> acc_n(static_cast<std::size_t>(c), 0);
  for (const auto& f : folds) {
    avg.total_accuracy += f.total_accuracy;
    avg.macro_f1 += f.macro_f1;
    avg.confusion += f.confusion;
    avg.n_evaluated += f.n_evaluated;
    avg.n_skipped += f.n_skipped;
    avg.completed_folds.push_back(f.fold_id);
    for (std::size_t k = 0; k < f.per_class_accuracy.size(); ++k) {
      if (f.per_class_accuracy[k]) {
        acc_sum[k] += *f.per_class_accuracy[k];
        ++acc_n[k];
      }
    }
  }
  const double n = static_cast<double>(folds.size());
  avg.total_accuracy /= n;
  avg.macro_f1 /= n;
  avg.per_class_accuracy.resize(static_cast<std::size_t>(c));
  for (std::size_t k = 0; k < acc_sum.size(); ++k) {
    if (acc_n[k] > 0) avg.per_class_accuracy[k] = acc_sum[k] / acc_n[k];
  }
  const double total = static_cast<double>(avg.n_evaluated + avg.n_skipped);
  avg.coverage = total > 0 ? static_cast<double>(avg.n_evaluated) / total : 1.0;
  return avg;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["fold_id"] = fold_id;
  nlohmann::json acc = nlohmann::json::object();
  for (std::size_t k = 0; k < per_class_accuracy.size(); ++k) {
    const std::string key = per_class_accuracy.size() == kNumClasses
                                ? std::string(label_short_name(static_cast<Label>(k)))
                                : std::to_string(k);
    acc[key] = per_class_accuracy[k] ? nlohmann::json(*per_class_accuracy[k]) : nlohmann::json(nullptr);
  }
  j["per_class_accuracy"] = acc;
  j["total_accuracy"] = total_accuracy;
  j["macro_f1"] = macro_f1;
  j["confusion"] = confusion.rows();
  j["config_hash"] = config_hash;
  j["n_evaluated"] = n_evaluated;
  j["n_skipped"] = n_skipped;
  j["coverage"] = coverage;
  if (fold_id == "average") {
    j["completed_folds"] = completed_folds;
    j["failures"] = failures;
    j["partial"] = partial;
  }
  return j;
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    r.fold_id = j.at("fold_id").get<std::string>();
    const auto rows = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
    r.confusion = EvalCounts(static_cast<int>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != rows.size()) throw ParseError("confusion matrix is not square", 0);
      for (std::size_t p = 0; p < rows.size(); ++p) {
        r.confusion.add(static_cast<int>(t), static_cast<int>(p), rows[t][p]);
      }
    }
    r.per_class_accuracy.resize(rows.size());
    const auto& acc = j.at("per_class_accuracy");
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::string key =
          rows.size() == kNumClasses ? std::string(label_short_name(static_cast<Label>(k))) : std::to_string(k);
      if (acc.contains(key) && !acc.at(key).is_null()) r.per_class_accuracy[k] = acc.at(key).get<double>();
    }
    r.total_accuracy = j.at("total_accuracy").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.config_hash = j.value("config_hash", "");
    r.n_evaluated = j.value("n_evaluated", std::size_t{0});
    r.n_skipped = j.value("n_skipped", std::size_t{0});
    r.coverage = j.value("coverage", 1.0);
    r.completed_folds = j.value("completed_folds", std::vector<std::string>{});
    r.failures = j.value("failures", std::vector<std::string>{});
    r.partial = j.value("partial", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run report: ") + e.what(), 0);
  }
}

std::string config_hash(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace sk
