// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sk {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes (see ExitCode in cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: undecodable audio, bad manifests, missing classes.
class DataError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

class TooShortError : public DataError {
 public:
  using DataError::DataError;
};

/// An input whose power (or energy) is zero where a ratio is required.
class DegenerateInputError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, long line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

class MissingClassError : public DataError {
 public:
  MissingClassError(const std::string& cls)
      : DataError("class '" + cls + "' has no samples"), cls_(cls) {}
  const std::string& class_name() const { return cls_; }

 private:
  std::string cls_;
};

class InfeasibleSplitError : public DataError {
 public:
  using DataError::DataError;
};

class PoolError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (length mismatch, bad shapes).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Checkpoint/model/feature configuration mismatch.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration detected before any compute starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sk
