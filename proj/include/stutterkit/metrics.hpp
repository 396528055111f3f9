// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stutterkit/dataset.hpp"

namespace sk {

/// Confusion counts, rows = true class, columns = predicted class.
class EvalCounts {
 public:
  explicit EvalCounts(int n_classes = kNumClasses);

  void add(int truth, int predicted, std::int64_t count = 1);
  std::int64_t at(int truth, int predicted) const;
  std::int64_t row_sum(int truth) const;
  std::int64_t col_sum(int predicted) const;
  std::int64_t n() const { return n_; }
  int n_classes() const { return c_; }
  EvalCounts& operator+=(const EvalCounts& o);
  bool operator==(const EvalCounts&) const = default;

  std::vector<std::vector<std::int64_t>> rows() const;

 private:
  int c_;
  std::vector<std::int64_t> cells_;
  std::int64_t n_ = 0;
};

/// Per-class F1 with 0 wherever precision or recall is undefined or both
/// are zero.
std::vector<double> per_class_f1(const EvalCounts& c);
/// Mean of per_class_f1 over all classes.
double macro_f1(const EvalCounts& c);
/// Recall per class; nullopt for classes without support.
std::vector<std::optional<double>> per_class_accuracy(const EvalCounts& c);
double total_accuracy(const EvalCounts& c);

std::size_t argmax(std::span<const double> v);

/// Decision rule for branched models. fluent_probs is (Fluent, Disfluent).
/// A five-class disfluent distribution has its Fluent coordinate excluded
/// from the argmax; a four-class one maps directly onto R, P, B, In.
Label combined_prediction(std::span<const double> fluent_probs, std::span<const double> disfluent_probs);

struct RunReport {
  std::string fold_id;  ///< "0".."k-1" or "average"
  std::vector<std::optional<double>> per_class_accuracy;
  double total_accuracy = 0.0;
  double macro_f1 = 0.0;
  EvalCounts confusion;
  std::string config_hash;
  std::size_t n_evaluated = 0;
  std::size_t n_skipped = 0;
  double coverage = 1.0;
  /// Averages only: folds that finished and folds that failed (with reason).
  std::vector<std::string> completed_folds;
  std::vector<std::string> failures;
  bool partial = false;

  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
};

RunReport make_report(const EvalCounts& counts, std::string fold_id, std::string config_hash,
                      std::size_t n_skipped = 0);

/// Unweighted mean of the fold metrics; per-class accuracy averages the
/// folds where the class has support; confusion matrices are summed.
RunReport average_reports(const std::vector<RunReport>& folds, const std::vector<std::string>& failures = {});

/// 16 hex digits of FNV-1a over the compact JSON dump.
std::string config_hash(const nlohmann::json& j);

}  // namespace sk
