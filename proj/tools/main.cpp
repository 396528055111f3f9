// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "stutterkit/cli.hpp"

int main(int argc, char** argv) {
  return sk::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
