// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "stutterkit/dataset.hpp"
#include "stutterkit/layers.hpp"

namespace sk {

inline constexpr double kProbFloor = 1e-12;

/// Label value that excludes a sample from a loss (weight zero).
inline constexpr int kIgnoreLabel = -1;

struct BatchLoss {
  double value = 0.0;
  /// -log p[y] per sample, unweighted; 0 for ignored samples.
  std::vector<double> per_sample;
  /// Sum of the weights of the contributing samples.
  double weight_normalizer = 0.0;
  /// True when some true-class probability fell below kProbFloor.
  bool clamped = false;
};

/// sum_i w[y_i] * -log p_i[y_i] / sum_i w[y_i].
/// Throws ContractViolation when a row is not a distribution (tolerance
/// 1e-6), a label is out of range or a weight is not positive.
BatchLoss wce(const nn::Matrix& probs, const std::vector<int>& labels, const ClassWeights& weights);
BatchLoss cross_entropy(const nn::Matrix& probs, const std::vector<int>& labels);

struct LogitLoss {
  BatchLoss loss;
  nn::Matrix grad;  ///< d loss / d logits
};

/// Softmax followed by wce; the gradient row i is w[y_i] / S * (p_i - e_{y_i}).
/// Samples labelled kIgnoreLabel contribute neither loss nor gradient.
LogitLoss wce_from_logits(const nn::Matrix& logits, const std::vector<int>& labels, const ClassWeights& weights);

/// Multi-branch objective: fluent + disfluent.
double joint_loss(double fluent_loss, double disfluent_loss);

}  // namespace sk
