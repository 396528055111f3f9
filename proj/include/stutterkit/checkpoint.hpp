// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <map>
#include <set>
#include <string>

#include "stutterkit/model.hpp"
#include "stutterkit/optimizer.hpp"

namespace sk {

/// Everything needed to resume or evaluate a model. Tensors hold both
/// trainable parameters and batch-norm running statistics, keyed by path.
struct Checkpoint {
  ModelConfig model;
  nlohmann::json meta = nlohmann::json::object();  ///< feature/train config echo
  std::map<std::string, Matrix> tensors;
  std::int64_t adam_steps = 0;
  std::map<std::string, AdamMoments> adam;
  int epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

Checkpoint capture(StutterNet& net, const Adam* opt = nullptr, int epoch = 0,
                   double best_val_loss = std::numeric_limits<double>::infinity());

/// Copies every tensor into `net`. Throws IncompatibleError listing missing,
/// unexpected and mis-shaped keys.
void restore(StutterNet& net, const Checkpoint& ck);

/// Copies the tensors of the given groups (parameters and buffers whose path
/// begins with the group prefix). Throws IncompatibleError listing the keys
/// that are missing from `src` or differ in shape.
void transplant(StutterNet& net, const Checkpoint& src, const std::set<ParamGroup>& groups);

/// Builds a model from the checkpoint's config and restores it.
StutterNet load_model(const Checkpoint& ck);

/// "SKCK", u32 version, u64 JSON length, JSON header (config, meta, epoch,
/// best loss, Adam step, tensor directory), then raw little-endian doubles.
std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string_view group_prefix(ParamGroup g);

}  // namespace sk
