// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "rsm/semantics/step.hpp"

namespace rsm::sem {

struct ScheduleStep {
  GlobalRule rule = GlobalRule::kStart;
  Value machine = 0;
  bool operator==(const ScheduleStep&) const = default;
};
using Schedule = std::vector<ScheduleStep>;

/// One "<rule> <machine>" pair per line; '#' starts a comment.
Schedule parse_schedule(const std::string& text);
Schedule load_schedule(const std::string& path);
std::string to_string(const Schedule& schedule);

struct RunResult {
  GlobalConfig final;
  /// Steps actually taken.
  Schedule taken;
  /// Steps whose premises failed, with the reason, when skipping is allowed.
  std::vector<std::string> skipped;
};

/// Applies the schedule in order. With `skip_invalid` a step that is stuck
/// is reported and skipped; otherwise StuckError propagates.
RunResult run_schedule(const Program& program, const GlobalConfig& init, const Schedule& schedule, Oracle& oracle,
                       bool skip_invalid = false);

/// Fair round-robin over machines in id order, each taking its first
/// applicable rule among commit, local, start, create, send, until nothing
/// applies or `max_steps` is reached.
RunResult run_to_quiescence(const Program& program, const GlobalConfig& init, Oracle& oracle,
                            std::size_t max_steps = 100000);

/// Ghost traces, oldest event first: "machine dest type payload" per line.
std::string dump_traces(const GlobalConfig& g);

}  // namespace rsm::sem
