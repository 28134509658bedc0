// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/semantics/run.hpp"

#include <fstream>
#include <sstream>

namespace rsm::sem {

Schedule parse_schedule(const std::string& text) {
  Schedule out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string rule;
    if (!(ls >> rule)) continue;
    Value machine;
    std::string extra;
    if (!(ls >> machine) || (ls >> extra)) {
      throw ParseError("schedule line " + std::to_string(lineno) + ": expected '<rule> <machine>'");
    }
    auto r = parse_global_rule(rule);
    if (!r) throw ParseError("schedule line " + std::to_string(lineno) + ": unknown rule '" + rule + "'");
    out.push_back({*r, machine});
  }
  return out;
}

Schedule load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read schedule file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schedule(ss.str());
}

std::string to_string(const Schedule& schedule) {
  std::string out;
  for (const auto& s : schedule) out += std::string(to_string(s.rule)) + " " + std::to_string(s.machine) + "\n";
  return out;
}

RunResult run_schedule(const Program& program, const GlobalConfig& init, const Schedule& schedule, Oracle& oracle,
                       bool skip_invalid) {
  RunResult out{init, {}, {}};
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& step = schedule[i];
    try {
      out.final = step_global(program, out.final, step.rule, step.machine, oracle);
      out.taken.push_back(step);
    } catch (const StuckError& e) {
      if (!skip_invalid) throw StuckError("schedule step " + std::to_string(i + 1) + ": " + e.what());
      out.skipped.push_back("step " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

RunResult run_to_quiescence(const Program& program, const GlobalConfig& init, Oracle& oracle, std::size_t max_steps) {
  RunResult out{init, {}, {}};
  static constexpr GlobalRule kOrder[] = {GlobalRule::kCommit, GlobalRule::kLocal, GlobalRule::kStart,
                                          GlobalRule::kCreate, GlobalRule::kSend};
  while (out.taken.size() < max_steps) {
    bool progressed = false;
    std::vector<Value> ids;
    for (const auto& [id, _] : out.final.Pi) ids.push_back(id);
    for (auto id : ids) {
      for (auto rule : kOrder) {
        if (!applicable(program, out.final, rule, id)) continue;
        out.final = step_global(program, out.final, rule, id, oracle);
        out.taken.push_back({rule, id});
        progressed = true;
        break;
      }
      if (out.taken.size() >= max_steps) break;
    }
    if (!progressed) break;
  }
  return out;
}

std::string dump_traces(const GlobalConfig& g) {
  std::string out;
  for (const auto& [id, rec] : g.Pi) {
    for (auto it = rec.T.rbegin(); it != rec.T.rend(); ++it) {
      out += std::to_string(id) + " " + std::to_string(it->r) + " " + std::to_string(it->type) + " " +
             std::to_string(it->payload) + "\n";
    }
  }
  return out;
}

}  // namespace rsm::sem
