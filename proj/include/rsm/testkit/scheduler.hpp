// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rsm/core/ids.hpp"

namespace rsm::testkit {

/// One runnable unit: a machine's event-loop step or its outbox step.
struct Task {
  enum Kind { kHandle, kDrain } kind;
  RsmId machine;
  bool operator==(const Task&) const = default;
  std::string to_string() const;
};

enum class Strategy { kRandom, kRoundRobin, kPct, kPortfolio };
Strategy parse_strategy(const std::string& name);
const char* to_string(Strategy s);

/// Picks the next task and decides where to inject crashes. Every decision
/// draws from the scheduler, so a run is a function of its choices.
class Scheduler {
 public:
  virtual ~Scheduler() = default;
  /// Index into `enabled` (never empty).
  virtual std::size_t pick(const std::vector<Task>& enabled, std::uint64_t step) = 0;
  /// Whether to crash at a handler commit point.
  virtual bool crash(double probability) = 0;
  /// A seeded source for the scenario's own randomness.
  virtual std::mt19937_64& rng() = 0;
};

class RandomScheduler : public Scheduler {
 public:
  explicit RandomScheduler(std::uint64_t seed) : rng_(seed) {}
  std::size_t pick(const std::vector<Task>& enabled, std::uint64_t step) override;
  bool crash(double probability) override;
  std::mt19937_64& rng() override { return rng_; }

 protected:
  std::mt19937_64 rng_;
};

/// Cycles through tasks in a fixed order; crashes are still random.
class RoundRobinScheduler : public RandomScheduler {
 public:
  using RandomScheduler::RandomScheduler;
  std::size_t pick(const std::vector<Task>& enabled, std::uint64_t step) override;

 private:
  std::optional<Task> last_;
};

/// Probabilistic priority scheduling: machines get random distinct
/// priorities, the highest-priority runnable machine goes next, and at
/// `depth - 1` random steps the running machine drops to the bottom.
class PctScheduler : public RandomScheduler {
 public:
  PctScheduler(std::uint64_t seed, std::uint64_t max_steps, std::size_t depth);
  std::size_t pick(const std::vector<Task>& enabled, std::uint64_t step) override;

 private:
  double priority(const RsmId& id);
  std::map<RsmId, double> priorities_;
  std::vector<std::uint64_t> change_points_;
  double lowest_ = 0;
};

/// Replays a fixed choice prefix, then always takes choice 0, recording
/// how many options each decision had. Drives the exhaustive explorer.
class ScriptedScheduler : public Scheduler {
 public:
  explicit ScriptedScheduler(std::vector<std::size_t> prefix) : prefix_(std::move(prefix)), rng_(0) {}
  std::size_t pick(const std::vector<Task>& enabled, std::uint64_t step) override;
  bool crash(double probability) override;
  std::mt19937_64& rng() override { return rng_; }

  /// (choice taken, options available) for every decision made.
  const std::vector<std::pair<std::size_t, std::size_t>>& decisions() const { return decisions_; }

 private:
  std::size_t next(std::size_t options);
  std::vector<std::size_t> prefix_;
  std::vector<std::pair<std::size_t, std::size_t>> decisions_;
  std::mt19937_64 rng_;
};

std::unique_ptr<Scheduler> make_scheduler(Strategy s, std::uint64_t seed, std::uint64_t max_steps,
                                          std::size_t pct_depth);

}  // namespace rsm::testkit
