// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rsm/core/machine_class.hpp"
#include "rsm/runtime/host.hpp"
#include "rsm/testkit/monitor.hpp"
#include "rsm/testkit/scheduler.hpp"

namespace rsm::testkit {

/// What a scenario's setup may do before the run starts.
class TestEnv {
 public:
  TestEnv(runtime::MachineHost& host, std::mt19937_64& rng) : host_(host), rng_(rng) {}
  RsmId create(const std::string& class_name) { return host_.create_machine(class_name); }
  void send(const RsmId& dest, std::uint32_t type, Bytes payload) { host_.env_send(dest, type, std::move(payload)); }
  template <typename T>
  void send(const RsmId& dest, std::uint32_t type, const T& value) {
    send(dest, type, encode(value));
  }
  runtime::MachineHost& host() { return host_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  runtime::MachineHost& host_;
  std::mt19937_64& rng_;
};

struct Scenario {
  std::string name;
  Program program;
  std::function<void(TestEnv&)> setup;
  std::vector<MonitorFactory> monitors;
  /// Checked at quiescence; returns a failure message.
  std::function<std::optional<std::string>(runtime::MachineHost&)> final_check;
};

struct ExploreOptions {
  std::uint64_t iterations = 100;
  std::uint64_t seed = 1;
  /// Exploration depth; the default matches a depth of 10,000 steps.
  std::uint64_t max_steps = 10000;
  /// Liveness horizon as a multiple of max_steps. Past max_steps the run
  /// continues round-robin (fairly) until quiescent or the horizon.
  std::uint64_t fairness_factor = 10;
  Strategy strategy = Strategy::kPortfolio;
  std::size_t pct_depth = 3;
  /// Inject crashes at handler commit points.
  bool inject_crashes = false;
  double crash_probability = 0.2;
  /// Compare the re-executed transaction with the crashed one.
  bool check_non_interference = true;
  bool fail_on_dead_letter = true;
  bool stop_on_violation = true;
  std::size_t trace_tail = 64;
};

struct Violation {
  enum class Kind { kSafety, kLiveness, kNonInterference, kFinalCheck, kDeadLetter };
  Kind kind;
  std::string monitor;
  std::string message;
  std::uint64_t iteration = 0;
  /// Re-run with this seed and iterations = 1 to reproduce.
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::vector<std::string> trace;
};
const char* to_string(Violation::Kind kind);

struct IterationResult {
  std::uint64_t steps = 0;
  bool quiescent = false;
  bool reached_max_steps = false;
  std::uint64_t crashes = 0;
  std::uint64_t rechecks = 0;
  std::uint64_t handled = 0;
  std::optional<Violation> violation;
  /// Every committed handler execution, in order.
  std::vector<std::string> events;
  std::set<std::string> coverage;
};

struct Report {
  std::string scenario;
  ExploreOptions options;
  std::uint64_t iterations_run = 0;
  std::uint64_t total_steps = 0;
  std::uint64_t quiescent_runs = 0;
  std::uint64_t crashes_injected = 0;
  std::uint64_t rechecks = 0;
  std::uint64_t handled = 0;
  std::set<std::string> coverage;
  std::vector<Violation> violations;
  double seconds = 0;

  bool passed() const { return violations.empty(); }
  std::string to_json() const;
};

/// Seed of iteration `i` of a run seeded with `seed`.
std::uint64_t iteration_seed(std::uint64_t seed, std::uint64_t i);

/// Runs one schedule chosen by `scheduler`.
IterationResult run_iteration(const Scenario& scenario, const ExploreOptions& options, Scheduler& scheduler,
                              std::uint64_t iteration = 0, std::uint64_t seed = 0);

Report explore(const Scenario& scenario, const ExploreOptions& options);

/// Enumerates every schedule (and, with crash injection, every crash
/// placement) by depth-first search over the choices, up to
/// `max_schedules`. Small instances only.
struct ExhaustiveResult {
  std::uint64_t schedules = 0;
  bool complete = false;
  std::vector<Violation> violations;
};
ExhaustiveResult explore_exhaustive(const Scenario& scenario, const ExploreOptions& options,
                                    std::uint64_t max_schedules);

}  // namespace rsm::testkit
