// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "rsm/semantics/syntax.hpp"

namespace rsm::sem {

struct GeneratorOptions {
  int max_machines = 3;
  int max_classes = 2;
  /// Statement budget per handler, counting each branch of an if.
  int max_statements = 6;
  Value star_domain = 3;
  int max_inbox = 2;
};

/// A random well-formed program whose machine 1 has a non-empty inbox.
/// Volatile fields only ever flow into volatile fields, so every handler is
/// non-interfering by construction, and every send targets an existing
/// machine or the environment.
Program generate_program(std::uint64_t seed, const GeneratorOptions& options = {});

}  // namespace rsm::sem
