// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rsm/semantics/run.hpp"

namespace rsm::sem {

/// A run does not have the shape the failure-transparency check requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// M1(r) ~= M2(r): equal in E, F_p, L, s and b; volatile fields ignored.
/// Throws UsageError when the classes differ.
bool check_local_equiv(const ClassDef& ca, const LocalConfig& a, const ClassDef& cb, const LocalConfig& b);
bool check_local_equiv(const ClassDef& c, const LocalConfig& a, const LocalConfig& b);

/// Runs local steps from `start` until skip. Throws StuckError when stuck and
/// when `max_steps` is exceeded.
LocalConfig run_handler(const Program& program, const LocalConfig& start, Oracle& oracle, std::size_t max_steps);

struct NonInterferenceOptions {
  /// Every volatile field ranges over this domain, exhaustively.
  std::vector<Value> domain{0, 1};
  /// Cap on exhaustive combinations; beyond it, `samples` random ones.
  std::size_t max_combinations = 4096;
  std::size_t samples = 64;
  std::uint64_t seed = 1;
  Value star_domain = 3;
  std::size_t max_steps = 10000;
};

struct NonInterferenceVerdict {
  bool passed = true;
  std::size_t perturbations = 0;
  /// The perturbed volatile fields of the first counterexample.
  FieldMap counterexample;
  std::string detail;
};

/// Runs the handler from `start` (whose s must be the class handler),
/// records the nondeterministic choices, then re-runs from every
/// perturbation of the volatile fields with the choices replayed and checks
/// the terminal configurations are equivalent.
NonInterferenceVerdict check_non_interference(const Program& program, const std::string& cls,
                                              const LocalConfig& start, const NonInterferenceOptions& options = {});

/// A run of one machine of the shape
///   (start | local | reset)*  commit  (create | send | reset)*
/// from a configuration where `machine` is ready to start.
struct TheoremRun {
  GlobalConfig start;
  Value machine = 1;
  std::vector<GlobalRule> steps;
  /// Nondeterministic choices consumed by the run, in order.
  Choices tape;
};

struct TransparencyVerdict {
  bool holds = true;
  std::string detail;
  std::size_t resets = 0;
  GlobalConfig with_resets;
  GlobalConfig reset_free;
};

/// Builds the reset-free run from the same start, with r's volatile fields
/// replaced by `perturbed_volatiles` when given, replaying the choices of the
/// committing attempt, and compares: Pi must be identical and r's final
/// local states equivalent. When the run resets after the commit its final
/// L is empty, so L is compared only if no such reset happened.
TransparencyVerdict check_failure_transparency(const Program& program, const TheoremRun& run,
                                               const std::optional<FieldMap>& perturbed_volatiles = std::nullopt,
                                               std::size_t max_steps = 10000);

struct ExhaustiveOptions {
  int max_resets = 4;
  Value star_domain = 3;
  std::uint64_t seed = 1;
  std::size_t max_steps = 10000;
  /// Perturb r's volatile fields in the reset-free run.
  bool perturb = true;
};

struct ExhaustiveReport {
  std::size_t runs = 0;
  std::size_t violations = 0;
  std::size_t max_resets_seen = 0;
  std::vector<std::string> examples;  // first few violations
};

/// Enumerates every placement of up to `max_resets` resets in theorem-shaped
/// runs of machine r (before, between and after each step of every attempt,
/// and at every outbox position after the commit), checking each run.
ExhaustiveReport check_transparency_exhaustive(const Program& program, const GlobalConfig& start, Value r,
                                               const ExhaustiveOptions& options = {});

}  // namespace rsm::sem
