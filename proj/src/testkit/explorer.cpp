// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/testkit/explorer.hpp"

#include <chrono>
#include <deque>
#include <sstream>

#include "json.hpp"
#include "rsm/storage/log.hpp"

namespace rsm::testkit {

using runtime::CommitDecision;
using runtime::CommitKind;
using runtime::CommitPoint;
using runtime::HandledEvent;
using runtime::MachineHost;

const char* to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kSafety:
      return "safety";
    case Violation::Kind::kLiveness:
      return "liveness";
    case Violation::Kind::kNonInterference:
      return "non-interference";
    case Violation::Kind::kFinalCheck:
      return "final-check";
    case Violation::Kind::kDeadLetter:
      return "dead-letter";
  }
  return "?";
}

std::uint64_t iteration_seed(std::uint64_t seed, std::uint64_t i) {
  // splitmix64 of (seed, i)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (i + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

struct Recording {
  std::vector<storage::WriteOp> writes;
  std::vector<Event> events;
  std::vector<RsmId> ids;
  std::vector<std::uint64_t> random;
};

std::string preview(const Bytes& b) {
  std::ostringstream out;
  out << b.size() << "B:";
  static const char* hex = "0123456789abcdef";
  for (std::size_t i = 0; i < b.size() && i < 16; ++i) out << hex[b[i] >> 4] << hex[b[i] & 15];
  if (b.size() > 16) out << "..";
  return out.str();
}

std::string describe_write(const storage::WriteOp& op, const RsmId& id) {
  if (op.collection == runtime::layout::kFields) {
    auto prefix = key_of(id);
    if (op.key.size() > prefix.size() && std::equal(prefix.begin(), prefix.end(), op.key.begin())) {
      std::string field;
      for (auto i = prefix.size(); i < op.key.size() && op.key[i] != 0; ++i) field.push_back(static_cast<char>(op.key[i]));
      if (field == runtime::layout::kStateField) return "state register";
      return "persistent field '" + field + "'";
    }
  }
  if (op.collection.rfind("outbox", 0) == 0) return "outbox entry";
  if (op.collection.rfind("inbox", 0) == 0) return "inbox";
  if (op.collection == runtime::layout::kHosted || op.collection == runtime::layout::kTombstones) return "halt";
  return op.collection;
}

std::string describe_event(const Event& e) {
  return "event type " + std::to_string(e.type()) + " from " + e.source().to_string();
}

std::optional<std::string> compare(const Recording& first, const std::vector<storage::WriteOp>& second,
                                   const RsmId& id) {
  const auto& a = first.writes;
  std::size_t n = std::min(a.size(), second.size());
  std::string where = first.events.empty() ? std::string("handler") : describe_event(first.events.front());
  const char* hint =
      " (handlers must take nondeterminism from ctx.random() and must not let volatile fields reach "
      "persistent state or outputs)";
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] == second[i]) continue;
    const auto& x = a[i];
    const auto& y = second[i];
    std::string what = describe_write(x, id);
    if (x.collection != y.collection || x.key != y.key || x.op != y.op) {
      what += " vs " + describe_write(y, id);
    }
    return "re-execution of " + where + " at " + id.to_string() + " diverged at " + what + ": first run wrote " +
           preview(x.value) + ", re-run wrote " + preview(y.value) + hint;
  }
  if (a.size() != second.size()) {
    const auto& extra = a.size() > second.size() ? a[n] : second[n];
    return "re-execution of " + where + " at " + id.to_string() + " made " + std::to_string(second.size()) +
           " writes instead of " + std::to_string(a.size()) + ", first difference at " + describe_write(extra, id) +
           hint;
  }
  return std::nullopt;
}

std::vector<Task> enabled_tasks(MachineHost& host) {
  std::vector<Task> out;
  for (const auto& id : host.machines()) {
    if (host.inbox_size(id) > 0 && !host.halted(id)) out.push_back({Task::kHandle, id});
  }
  for (const auto& id : host.senders()) {
    if (host.outbox_size(id) > 0) out.push_back({Task::kDrain, id});
  }
  return out;
}

}  // namespace

IterationResult run_iteration(const Scenario& scenario, const ExploreOptions& options, Scheduler& scheduler,
                              std::uint64_t iteration, std::uint64_t seed) {
  storage::StoreOptions so;
  so.fsync = storage::FsyncPolicy::kNever;
  runtime::HostConfig cfg;
  cfg.partition = "p0";
  cfg.local_delivery = true;
  cfg.batch_size = 1;
  cfg.fsync = storage::FsyncPolicy::kNever;
  cfg.seed = seed;
  cfg.id_block = 1024;
  MachineHost host(cfg, storage::Store::in_memory(so), scenario.program, nullptr, [] { return net::Millis(0); });

  IterationResult res;
  std::deque<std::string> tail;
  auto note = [&](std::string line) {
    tail.push_back(std::move(line));
    if (tail.size() > options.trace_tail) tail.pop_front();
  };
  std::vector<std::unique_ptr<Monitor>> monitors;
  for (const auto& f : scenario.monitors) monitors.push_back(f());

  auto make_violation = [&](Violation::Kind kind, std::string monitor, std::string message) {
    Violation v;
    v.kind = kind;
    v.monitor = std::move(monitor);
    v.message = std::move(message);
    v.iteration = iteration;
    v.seed = seed;
    v.step = res.steps;
    v.trace.assign(tail.begin(), tail.end());
    return v;
  };

  host.set_observer([&](const HandledEvent& e) {
    ++res.handled;
    res.coverage.insert(e.machine_class + "/" + e.state_before + "/" + std::to_string(e.event.type()));
    std::string line = e.machine.to_string() + " " + e.machine_class + " " + e.state_before + " --" +
                       std::to_string(e.event.type()) + "--> " + e.state_after + (e.halted ? " halt" : "");
    note(line);
    res.events.push_back(std::move(line));
    for (auto& m : monitors) m->observe(e);
  });

  std::map<RsmId, Recording> rechecks;
  std::optional<RsmId> replay_for;
  std::optional<Violation> interference;
  host.set_commit_hook([&](CommitPoint& p) {
    if (p.kind != CommitKind::kHandler) return CommitDecision::kCommit;
    auto it = rechecks.find(p.machine);
    if (it != rechecks.end()) {
      ++res.rechecks;
      if (options.check_non_interference && it->second.events == *p.events && !interference) {
        if (auto diff = compare(it->second, p.tx.write_set(), p.machine)) {
          interference = make_violation(Violation::Kind::kNonInterference, "", *diff);
        }
      }
      rechecks.erase(it);
      return CommitDecision::kCommit;
    }
    if (!options.inject_crashes) return CommitDecision::kCommit;
    auto cls = host.class_of(p.machine);
    if (cls && scenario.program.at(*cls).external()) return CommitDecision::kCommit;
    if (!scheduler.crash(options.crash_probability)) return CommitDecision::kCommit;
    rechecks[p.machine] = Recording{p.tx.write_set(), *p.events, *p.ids_drawn, *p.random_drawn};
    replay_for = p.machine;
    ++res.crashes;
    note("crash " + p.machine.to_string());
    return CommitDecision::kAbortAndReset;
  });

  TestEnv env(host, scheduler.rng());
  if (scenario.setup) scenario.setup(env);

  RoundRobinScheduler fair(seed);
  const std::uint64_t horizon = options.max_steps * std::max<std::uint64_t>(1, options.fairness_factor);
  std::optional<Violation> violation;
  while (!violation) {
    auto enabled = enabled_tasks(host);
    if (enabled.empty()) {
      res.quiescent = true;
      break;
    }
    if (res.steps >= horizon) break;
    if (res.steps >= options.max_steps) res.reached_max_steps = true;
    Scheduler& s = res.steps < options.max_steps ? scheduler : static_cast<Scheduler&>(fair);
    bool progressed = false;
    while (!enabled.empty() && !progressed) {
      auto i = s.pick(enabled, res.steps);
      auto task = enabled[i];
      progressed = task.kind == Task::kHandle ? host.handle_step(task.machine) : host.drain_step(task.machine);
      if (progressed) {
        if (task.kind == Task::kDrain) note(task.to_string());
      } else {
        enabled.erase(enabled.begin() + static_cast<std::ptrdiff_t>(i));
      }
    }
    if (!progressed) {
      // Only blocked transfers remain (messages to ids never created).
      res.quiescent = true;
      note("blocked");
      break;
    }
    ++res.steps;
    if (replay_for) {
      auto& r = rechecks.at(*replay_for);
      host.replay_next_attempt(*replay_for, r.ids, r.random);
      replay_for.reset();
    }
    if (interference) violation = interference;
    for (auto& m : monitors) {
      if (!violation && m->error()) violation = make_violation(Violation::Kind::kSafety, m->name(), *m->error());
    }
    if (!violation && options.fail_on_dead_letter && host.stats().dead_letters > 0) {
      auto dl = host.dead_letters();
      std::string msg = dl.empty() ? std::string("event dead-lettered")
                                   : dl.back().machine.to_string() + ": " + dl.back().reason;
      violation = make_violation(Violation::Kind::kDeadLetter, "", msg);
    }
  }
  if (!violation) {
    for (auto& m : monitors) {
      if (m->kind() == Monitor::Kind::kLiveness && m->hot()) {
        violation = make_violation(Violation::Kind::kLiveness, m->name(),
                                   m->describe() + (res.quiescent ? " at quiescence" : " past the fairness horizon"));
        break;
      }
    }
  }
  if (!violation && res.quiescent && scenario.final_check) {
    if (auto msg = scenario.final_check(host)) violation = make_violation(Violation::Kind::kFinalCheck, "", *msg);
  }
  res.violation = std::move(violation);
  return res;
}

Report explore(const Scenario& scenario, const ExploreOptions& options) {
  auto start = std::chrono::steady_clock::now();
  Report report;
  report.scenario = scenario.name;
  report.options = options;
  for (std::uint64_t i = 0; i < options.iterations; ++i) {
    auto seed = options.iterations == 1 ? options.seed : iteration_seed(options.seed, i);
    auto scheduler = make_scheduler(options.strategy, seed, options.max_steps, options.pct_depth);
    auto res = run_iteration(scenario, options, *scheduler, i, seed);
    ++report.iterations_run;
    report.total_steps += res.steps;
    report.quiescent_runs += res.quiescent ? 1 : 0;
    report.crashes_injected += res.crashes;
    report.rechecks += res.rechecks;
    report.handled += res.handled;
    report.coverage.insert(res.coverage.begin(), res.coverage.end());
    if (res.violation) {
      report.violations.push_back(std::move(*res.violation));
      if (options.stop_on_violation) break;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ExhaustiveResult explore_exhaustive(const Scenario& scenario, const ExploreOptions& options,
                                    std::uint64_t max_schedules) {
  ExhaustiveResult out;
  std::vector<std::size_t> prefix;
  while (out.schedules < max_schedules) {
    ScriptedScheduler s(prefix);
    auto res = run_iteration(scenario, options, s, out.schedules, 0);
    ++out.schedules;
    if (res.violation) out.violations.push_back(std::move(*res.violation));
    const auto& d = s.decisions();
    std::optional<std::size_t> j;
    for (std::size_t k = d.size(); k-- > 0;) {
      if (d[k].first + 1 < d[k].second) {
        j = k;
        break;
      }
    }
    if (!j) {
      out.complete = true;
      break;
    }
    prefix.clear();
    for (std::size_t k = 0; k < *j; ++k) prefix.push_back(d[k].first);
    prefix.push_back(d[*j].first + 1);
  }
  return out;
}

std::string Report::to_json() const {
  using nlohmann::json;
  json j;
  j["scenario"] = scenario;
  j["passed"] = passed();
  j["options"] = {{"iterations", options.iterations},
                  {"seed", options.seed},
                  {"max_steps", options.max_steps},
                  {"fairness_factor", options.fairness_factor},
                  {"strategy", testkit::to_string(options.strategy)},
                  {"inject_crashes", options.inject_crashes},
                  {"crash_probability", options.crash_probability}};
  j["iterations_run"] = iterations_run;
  j["total_steps"] = total_steps;
  j["quiescent_runs"] = quiescent_runs;
  j["crashes_injected"] = crashes_injected;
  j["rechecks"] = rechecks;
  j["handled"] = handled;
  j["coverage"] = coverage;
  j["seconds"] = seconds;
  j["violations"] = json::array();
  for (const auto& v : violations) {
    j["violations"].push_back({{"kind", to_string(v.kind)},
                               {"monitor", v.monitor},
                               {"message", v.message},
                               {"iteration", v.iteration},
                               {"seed", v.seed},
                               {"step", v.step},
                               {"trace", v.trace}});
  }
  return j.dump(2);
}

}  // namespace rsm::testkit
