// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Random single-step instances for every rule of the calculus, evaluated by
// the interpreter and by the reference rendering, and compared as text.

#include <cstdint>
#include <string>
#include <vector>

namespace rsm_crosscheck {

struct RuleTally {
  std::string rule;
  int instances = 0;
  int agreed = 0;
  /// Agreed instances where the rule actually fired (not stuck).
  int fired = 0;
  std::vector<std::string> mismatches;  // first few only
};

/// All 20 rules: 6 expression, 8 local, 6 global.
std::vector<std::string> rule_names();

RuleTally crosscheck_rule(const std::string& rule, int instances, std::uint64_t seed);

}  // namespace rsm_crosscheck
