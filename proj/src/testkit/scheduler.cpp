// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/testkit/scheduler.hpp"

#include <algorithm>
#include <tuple>

#include "rsm/core/errors.hpp"

namespace rsm::testkit {

std::string Task::to_string() const { return (kind == kHandle ? "handle " : "drain ") + machine.to_string(); }

Strategy parse_strategy(const std::string& name) {
  if (name == "random") return Strategy::kRandom;
  if (name == "round-robin") return Strategy::kRoundRobin;
  if (name == "pct") return Strategy::kPct;
  if (name == "portfolio") return Strategy::kPortfolio;
  throw UsageError("unknown strategy '" + name + "' (random, round-robin, pct, portfolio)");
}

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kRandom:
      return "random";
    case Strategy::kRoundRobin:
      return "round-robin";
    case Strategy::kPct:
      return "pct";
    case Strategy::kPortfolio:
      return "portfolio";
  }
  return "?";
}

std::size_t RandomScheduler::pick(const std::vector<Task>& enabled, std::uint64_t) {
  return std::uniform_int_distribution<std::size_t>(0, enabled.size() - 1)(rng_);
}

bool RandomScheduler::crash(double probability) {
  return std::uniform_real_distribution<double>(0, 1)(rng_) < probability;
}

namespace {

bool task_less(const Task& a, const Task& b) {
  return std::tie(a.machine, a.kind) < std::tie(b.machine, b.kind);
}

}  // namespace

std::size_t RoundRobinScheduler::pick(const std::vector<Task>& enabled, std::uint64_t) {
  std::size_t best = 0;
  if (last_) {
    // Smallest task strictly after the last one, wrapping around.
    std::optional<std::size_t> after;
    for (std::size_t i = 0; i < enabled.size(); ++i) {
      if (task_less(*last_, enabled[i]) && (!after || task_less(enabled[i], enabled[*after]))) after = i;
    }
    if (after) {
      best = *after;
      last_ = enabled[best];
      return best;
    }
  }
  for (std::size_t i = 1; i < enabled.size(); ++i) {
    if (task_less(enabled[i], enabled[best])) best = i;
  }
  last_ = enabled[best];
  return best;
}

PctScheduler::PctScheduler(std::uint64_t seed, std::uint64_t max_steps, std::size_t depth) : RandomScheduler(seed) {
  std::uniform_int_distribution<std::uint64_t> d(1, std::max<std::uint64_t>(1, max_steps));
  for (std::size_t i = 1; i < depth; ++i) change_points_.push_back(d(rng_));
}

double PctScheduler::priority(const RsmId& id) {
  auto it = priorities_.find(id);
  if (it == priorities_.end()) {
    it = priorities_.emplace(id, std::uniform_real_distribution<double>(1, 2)(rng_)).first;
  }
  return it->second;
}

std::size_t PctScheduler::pick(const std::vector<Task>& enabled, std::uint64_t step) {
  double top = -1e300;
  std::vector<std::size_t> best;
  for (std::size_t i = 0; i < enabled.size(); ++i) {
    double p = priority(enabled[i].machine);
    if (p > top) {
      top = p;
      best.clear();
    }
    if (p == top) best.push_back(i);
  }
  auto choice = best[std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng_)];
  if (std::find(change_points_.begin(), change_points_.end(), step) != change_points_.end()) {
    lowest_ -= 1;
    priorities_[enabled[choice].machine] = lowest_;
  }
  return choice;
}

std::size_t ScriptedScheduler::next(std::size_t options) {
  std::size_t i = decisions_.size();
  std::size_t choice = i < prefix_.size() ? std::min(prefix_[i], options - 1) : 0;
  decisions_.emplace_back(choice, options);
  return choice;
}

std::size_t ScriptedScheduler::pick(const std::vector<Task>& enabled, std::uint64_t) {
  return enabled.size() == 1 ? 0 : next(enabled.size());
}

bool ScriptedScheduler::crash(double probability) {
  if (probability <= 0) return false;
  return next(2) == 1;
}

std::unique_ptr<Scheduler> make_scheduler(Strategy s, std::uint64_t seed, std::uint64_t max_steps,
                                          std::size_t pct_depth) {
  // The portfolio picks from the seed so a single seed replays exactly.
  if (s == Strategy::kPortfolio) s = (seed >> 17) % 2 == 0 ? Strategy::kRandom : Strategy::kPct;
  switch (s) {
    case Strategy::kRoundRobin:
      return std::make_unique<RoundRobinScheduler>(seed);
    case Strategy::kPct:
      return std::make_unique<PctScheduler>(seed, max_steps, pct_depth);
    default:
      return std::make_unique<RandomScheduler>(seed);
  }
}

}  // namespace rsm::testkit
