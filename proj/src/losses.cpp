// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/losses.hpp"

#include <cmath>
#include <string>

#include "stutterkit/errors.hpp"
#include "stutterkit/model.hpp"

namespace sk {

namespace {

void check_inputs(const nn::Matrix& m, const std::vector<int>& labels, const ClassWeights& weights) {
  if (static_cast<std::size_t>(m.rows()) != labels.size()) {
    throw ContractViolation("loss: " + std::to_string(m.rows()) + " rows but " + std::to_string(labels.size()) +
                            " labels");
  }
  if (weights.size() != static_cast<std::size_t>(m.cols())) {
    throw ContractViolation("loss: weight count does not match class count");
  }
  for (double w : weights.w) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ContractViolation("loss: weights must be positive and finite");
  }
  for (int y : labels) {
    if (y != kIgnoreLabel && (y < 0 || y >= m.cols())) throw ContractViolation("loss: label out of range");
  }
}

BatchLoss accumulate(const nn::Matrix& probs, const std::vector<int>& labels, const ClassWeights& weights) {
  BatchLoss out;
  out.per_sample.assign(labels.size(), 0.0);
  double num = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y == kIgnoreLabel) continue;
    double p = probs(static_cast<nn::Index>(i), y);
    if (p < kProbFloor) {
      p = kProbFloor;
      out.clamped = true;
    }
    const double nll = -std::log(p);
    out.per_sample[i] = nll;
    num += weights[y] * nll;
    out.weight_normalizer += weights[y];
  }
  out.value = out.weight_normalizer > 0.0 ? num / out.weight_normalizer : 0.0;
  return out;
}

}  // namespace

BatchLoss wce(const nn::Matrix& probs, const std::vector<int>& labels, const ClassWeights& weights) {
  check_inputs(probs, labels, weights);
  for (nn::Index i = 0; i < probs.rows(); ++i) {
    if (probs.row(i).minCoeff() < 0.0 || std::abs(probs.row(i).sum() - 1.0) > 1e-6) {
      throw ContractViolation("loss: row " + std::to_string(i) + " is not a probability distribution");
    }
  }
  return accumulate(probs, labels, weights);
}

BatchLoss cross_entropy(const nn::Matrix& probs, const std::vector<int>& labels) {
  return wce(probs, labels, ClassWeights::uniform(static_cast<std::size_t>(probs.cols())));
}

LogitLoss wce_from_logits(const nn::Matrix& logits, const std::vector<int>& labels, const ClassWeights& weights) {
  check_inputs(logits, labels, weights);
  const nn::Matrix probs = softmax_rows(logits);
  LogitLoss out;
  out.loss = accumulate(probs, labels, weights);
  out.grad = nn::Matrix::Zero(logits.rows(), logits.cols());
  if (out.loss.weight_normalizer <= 0.0) return out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y == kIgnoreLabel) continue;
    const auto r = static_cast<nn::Index>(i);
    out.grad.row(r) = probs.row(r) * (weights[y] / out.loss.weight_normalizer);
    out.grad(r, y) -= weights[y] / out.loss.weight_normalizer;
  }
  return out;
}

double joint_loss(double fluent_loss, double disfluent_loss) { return fluent_loss + disfluent_loss; }

}  // namespace sk
