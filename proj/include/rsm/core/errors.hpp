// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace rsm {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse: calling into a closed context, committing an aborted
/// transaction, bad CLI arguments.
class UsageError : public Error {
 public:
  using Error::Error;
};

class UnknownClassError : public Error {
 public:
  explicit UnknownClassError(const std::string& name)
      : Error("unknown machine class '" + name + "'") {}
};

class UnknownFieldError : public Error {
 public:
  using Error::Error;
};

class UnknownStateError : public Error {
 public:
  explicit UnknownStateError(const std::string& name)
      : Error("unknown state '" + name + "'") {}
};

/// A volatile field reached through the persistent API or vice versa.
class FieldAccessError : public Error {
 public:
  using Error::Error;
};

class ContextClosedError : public UsageError {
 public:
  ContextClosedError() : UsageError("handler context used after the handler completed") {}
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsm
