// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/logging.hpp"

#include <atomic>
#include <mutex>

namespace sk {

namespace {
std::atomic<LogLevel> g_level{LogLevel::Info};
std::mutex g_mutex;
}  // namespace

LogLevel log_level() { return g_level.load(); }
void set_log_level(LogLevel level) { g_level.store(level); }

namespace detail {
void emit(LogLevel level, std::string_view msg) {
  static constexpr std::string_view kTags[] = {"debug", "info", "warn", "error"};
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << '[' << kTags[static_cast<int>(level)] << "] " << msg << '\n';
}
}  // namespace detail

}  // namespace sk
