// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/optimizer.hpp"

#include <cmath>

namespace sk {

void Adam::step(const std::vector<GroupedParam>& params, const FreezeMask& frozen) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& gp : params) {
    if (frozen.frozen(gp.group)) continue;
    auto& p = *gp.param;
    auto [it, fresh] = state_.try_emplace(gp.name);
    auto& s = it->second;
    if (fresh || s.m.rows() != p.value.rows() || s.m.cols() != p.value.cols()) {
      s.m = Matrix::Zero(p.value.rows(), p.value.cols());
      s.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * p.grad;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg_.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.eps);
  }
}

void Adam::set_state(std::int64_t steps, std::map<std::string, AdamMoments> state) {
  t_ = steps;
  state_ = std::move(state);
}

}  // namespace sk
