// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "reference_semantics.hpp"
#include "rule_crosscheck.hpp"

TEST_CASE("reference stepper reads and prints a small global configuration") {
  const char* instance =
      "(instance (program (class A (persistent (p0 0)) (volatile) (locals (a 0)) (handler (store p0 x_p))))"
      " (tape (stars) (ids))"
      " (global (rule start) (machine 1)"
      " (global (M (1 (local (E) (F (p0 0)) (L) (s (skip)) (b 0))))"
      " (Pi (1 A (I (0 1 5)) (O) (P (p0 0)) (T))))))";
  CHECK(rsm_reference::step(instance) ==
        "(global (M (1 (local (E) (F (p0 0)) (L (a 0) (x_e 1) (x_p 5) (x_s 0)) (s (store p0 x_p)) (b 1))))"
        " (Pi (1 A (I (0 1 5)) (O) (P (p0 0)) (T))))");
}

TEST_CASE("interpreter agrees with the reference stepper on every rule") {
  for (const auto& rule : rsm_crosscheck::rule_names()) {
    auto tally = rsm_crosscheck::crosscheck_rule(rule, 200, 7);
    INFO(rule);
    for (const auto& m : tally.mismatches) INFO(m);
    CHECK(tally.agreed == tally.instances);
    // The generators aim most instances at the rule's premises.
    CHECK(tally.fired * 2 > tally.instances);
  }
}
