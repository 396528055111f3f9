// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stutterkit/model.hpp"

namespace sk {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Matrix m;
  Matrix v;
};

/// Adam with bias correction. Moments are keyed by parameter name; frozen
/// groups are skipped entirely, so their values and moments never change.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<GroupedParam>& params, const FreezeMask& frozen = {});

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }
  const std::map<std::string, AdamMoments>& state() const { return state_; }
  void set_state(std::int64_t steps, std::map<std::string, AdamMoments> state);

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, AdamMoments> state_;
};

}  // namespace sk
