// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace moe3d {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not agree with an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or out-of-range configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed user input (prompts, datasets, categories).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Expert bank lookups and registrations.
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// Violated preconditions of an operation (non-scalar loss, bad target, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint and corpus loading failures, including checksum mismatches.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A synthetic shape could not be placed inside the volume.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace moe3d
