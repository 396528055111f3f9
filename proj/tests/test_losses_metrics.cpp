// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "stutterkit/errors.hpp"
#include "stutterkit/losses.hpp"
#include "stutterkit/metrics.hpp"
#include "test_util.hpp"

namespace sk {
namespace {

using sk::testing::random_matrix;

std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.uniform_int(0, classes - 1));
  return y;
}

TEST(Wce, HandComputedValue) {
  Matrix p(2, 2);
  p << 0.8, 0.2, 0.4, 0.6;
  const BatchLoss l = wce(p, {0, 1}, ClassWeights{{2.0, 1.0}});
  EXPECT_NEAR(l.value, (2.0 * -std::log(0.8) + 1.0 * -std::log(0.6)) / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(l.weight_normalizer, 3.0);
  EXPECT_FALSE(l.clamped);
}

TEST(Wce, UniformWeightsEqualCrossEntropy) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix p = softmax_rows(random_matrix(8, 5, rng, 2.0));
    const auto y = random_labels(rng, 8, 5);
    EXPECT_NEAR(wce(p, y, ClassWeights::uniform(5)).value, cross_entropy(p, y).value, 1e-9);
  }
}

TEST(Wce, InvariantToGlobalWeightScale) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix p = softmax_rows(random_matrix(8, 5, rng, 2.0));
    const auto y = random_labels(rng, 8, 5);
    ClassWeights w{{0.3, 1.7, 2.2, 0.9, 0.4}};
    ClassWeights scaled = w;
    const double k = rng.uniform(0.01, 100.0);
    for (double& v : scaled.w) v *= k;
    EXPECT_NEAR(wce(p, y, w).value, wce(p, y, scaled).value, 1e-9);
  }
}

TEST(Wce, ClampsZeroProbability) {
  Matrix p(1, 2);
  p << 1.0, 0.0;
  const BatchLoss l = wce(p, {1}, ClassWeights::uniform(2));
  EXPECT_TRUE(l.clamped);
  EXPECT_NEAR(l.value, -std::log(kProbFloor), 1e-9);
}

TEST(Wce, RejectsInvalidInput) {
  Matrix p(1, 2);
  p << 0.7, 0.2;
  EXPECT_THROW(wce(p, {0}, ClassWeights::uniform(2)), ContractViolation);
  p << 0.7, 0.3;
  EXPECT_THROW(wce(p, {2}, ClassWeights::uniform(2)), ContractViolation);
  EXPECT_THROW(wce(p, {0}, ClassWeights{{0.0, 1.0}}), ContractViolation);
}

TEST(WceFromLogits, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  const ClassWeights w{{1.4347, 2.6636, 2.2419, 1.1801, 0.3796}};
  for (int trial = 0; trial < 20; ++trial) {
    Matrix z = random_matrix(8, 5, rng, 3.0);
    const auto y = random_labels(rng, 8, 5);
    const LogitLoss l = wce_from_logits(z, y, w);
    auto loss = [&] { return wce_from_logits(z, y, w).loss.value; };
    EXPECT_LT(sk::testing::max_grad_error(z, l.grad, loss, 1e-3), 1e-5);
  }
}

TEST(WceFromLogits, IgnoredSamplesContributeNothing) {
  Rng rng(4);
  const Matrix z = random_matrix(3, 4, rng);
  const LogitLoss all = wce_from_logits(z.topRows(2), {1, 3}, ClassWeights::uniform(4));
  const LogitLoss masked = wce_from_logits(z, {1, 3, kIgnoreLabel}, ClassWeights::uniform(4));
  EXPECT_NEAR(all.loss.value, masked.loss.value, 1e-15);
  EXPECT_EQ(masked.grad.row(2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((masked.grad.topRows(2) - all.grad).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(JointLoss, IsTheSum) { EXPECT_DOUBLE_EQ(joint_loss(0.25, 1.5), 1.75); }

TEST(Metrics, MatchBruteForceOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 100));
    const auto truth = random_labels(rng, n, 5);
    const auto pred = random_labels(rng, n, 5);
    EvalCounts c(5);
    for (std::size_t i = 0; i < n; ++i) c.add(truth[i], pred[i]);
    const auto ref = oracle::scores(truth, pred, 5);
    const auto f1 = per_class_f1(c);
    const auto acc = per_class_accuracy(c);
    for (int k = 0; k < 5; ++k) {
      EXPECT_EQ(f1[static_cast<std::size_t>(k)], ref[static_cast<std::size_t>(k)].f1);
      EXPECT_EQ(acc[static_cast<std::size_t>(k)], ref[static_cast<std::size_t>(k)].accuracy);
    }
    EXPECT_EQ(macro_f1(c), oracle::macro_f1(truth, pred, 5));
  }
}

TEST(Metrics, PerfectAndEmpty) {
  EvalCounts c(5);
  for (int k = 0; k < 5; ++k) c.add(k, k, 3);
  EXPECT_EQ(macro_f1(c), 1.0);
  EXPECT_EQ(total_accuracy(c), 1.0);
  EvalCounts empty(5);
  EXPECT_EQ(macro_f1(empty), 0.0);
  EXPECT_FALSE(per_class_accuracy(empty)[0].has_value());
  EXPECT_THROW(c.add(5, 0), ContractViolation);
}

TEST(CombinedPrediction, DecisionTable) {
  struct Case {
    std::vector<double> fluent, disfluent;
    Label expected;
  };
  const std::vector<Case> table{
      // The fluent gate wins regardless of the disfluent head.
      {{0.6, 0.4}, {0.9, 0.05, 0.02, 0.02, 0.01}, Label::Fluent},
      {{0.51, 0.49}, {0.1, 0.1, 0.1, 0.1, 0.6}, Label::Fluent},
      // Four-class head: plain argmax.
      {{0.2, 0.8}, {0.1, 0.2, 0.6, 0.1}, Label::Block},
      {{0.3, 0.7}, {0.1, 0.2, 0.3, 0.4}, Label::Interjection},
      // Five-class head: the Fluent coordinate is excluded.
      {{0.1, 0.9}, {0.1, 0.3, 0.05, 0.05, 0.5}, Label::Prolongation},
      {{0.4, 0.6}, {0.4, 0.1, 0.05, 0.05, 0.4}, Label::Repetition},
  };
  for (const auto& c : table) EXPECT_EQ(combined_prediction(c.fluent, c.disfluent), c.expected);
  EXPECT_THROW(combined_prediction(std::vector<double>{1.0}, std::vector<double>(5, 0.2)), ContractViolation);
}

TEST(RunReport, JsonRoundTrip) {
  EvalCounts c(5);
  c.add(0, 0, 4);
  c.add(1, 4, 2);
  c.add(4, 4, 7);
  RunReport r = make_report(c, "3", "abcd", 1);
  const RunReport back = RunReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_EQ(back.confusion, c);
  EXPECT_NEAR(r.coverage, 13.0 / 14.0, 1e-15);
  EXPECT_FALSE(r.per_class_accuracy[2].has_value());
}

TEST(RunReport, AverageOverFolds) {
  EvalCounts a(5), b(5);
  a.add(0, 0, 2);
  a.add(1, 0, 2);
  b.add(0, 0, 1);
  b.add(2, 2, 1);
  const RunReport ra = make_report(a, "0", "h"), rb = make_report(b, "1", "h");
  const RunReport avg = average_reports({ra, rb}, {"2: diverged"});
  EXPECT_NEAR(avg.macro_f1, (ra.macro_f1 + rb.macro_f1) / 2.0, 1e-15);
  EXPECT_NEAR(avg.total_accuracy, 0.75, 1e-15);
  EXPECT_EQ(avg.confusion.n(), 6);
  EXPECT_NEAR(*avg.per_class_accuracy[0], 1.0, 1e-15);
  EXPECT_NEAR(*avg.per_class_accuracy[1], 0.0, 1e-15);
  EXPECT_NEAR(*avg.per_class_accuracy[2], 1.0, 1e-15);
  EXPECT_TRUE(avg.partial);
  EXPECT_EQ(avg.failures.size(), 1u);
}

TEST(ConfigHash, StableAndSensitive) {
  const nlohmann::json a = {{"x", 1}, {"y", "z"}};
  nlohmann::json b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b["x"] = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
}

}  // namespace
}  // namespace sk
