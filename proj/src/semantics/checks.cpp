// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/semantics/checks.hpp"

#include <functional>
#include <random>

namespace rsm::sem {

bool check_local_equiv(const ClassDef& ca, const LocalConfig& a, const ClassDef& cb, const LocalConfig& b) {
  if (ca.name != cb.name) throw UsageError("cannot compare local states of " + ca.name + " and " + cb.name);
  return check_local_equiv(ca, a, b);
}

bool check_local_equiv(const ClassDef& c, const LocalConfig& a, const LocalConfig& b) {
  return a.E == b.E && persistent_part(c, a.F) == persistent_part(c, b.F) && a.L == b.L && equal(a.s, b.s) &&
         a.b == b.b;
}

LocalConfig run_handler(const Program& program, const LocalConfig& start, Oracle& oracle, std::size_t max_steps) {
  LocalConfig cfg = start;
  std::size_t steps = 0;
  while (cfg.s->kind != Stmt::Kind::kSkip) {
    if (++steps > max_steps) throw StuckError("handler did not finish within " + std::to_string(max_steps) + " steps");
    auto b = cfg.b;
    cfg = step_local(program, cfg, oracle).next;
    cfg.b = b;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Non-interference

NonInterferenceVerdict check_non_interference(const Program& program, const std::string& cls,
                                              const LocalConfig& start, const NonInterferenceOptions& options) {
  const auto& c = program.at(cls);
  if (!equal(start.s, c.handler)) throw UsageError("start configuration must be at the beginning of the handler");
  Value first_id = program.first_fresh_id() + 1000000;
  Oracle recorder(options.seed, options.star_domain, first_id);
  auto reference = run_handler(program, start, recorder, options.max_steps);
  auto tape = recorder.consumed();

  NonInterferenceVerdict verdict;
  auto try_one = [&](const FieldMap& perturbed) {
    ++verdict.perturbations;
    LocalConfig alt = start;
    for (const auto& [f, v] : perturbed) alt.F[f] = v;
    Oracle replay(tape, options.seed, options.star_domain, first_id);
    std::string why;
    try {
      auto result = run_handler(program, alt, replay, options.max_steps);
      if (replay.overran() || replay.stars_left() || replay.ids_left()) {
        why = "the perturbed run made different nondeterministic choices";
      } else if (!check_local_equiv(c, reference, result)) {
        why = "terminal states differ: " + to_string(reference) + " vs " + to_string(result);
      }
    } catch (const StuckError& e) {
      why = std::string("the perturbed run got stuck: ") + e.what();
    }
    if (!why.empty() && verdict.passed) {
      verdict.passed = false;
      verdict.counterexample = perturbed;
      verdict.detail = why;
    }
  };

  std::vector<std::string> fields;
  for (const auto& [f, _] : c.volatiles) fields.push_back(f);
  std::size_t combos = 1;
  bool exhaustive = !options.domain.empty();
  for (std::size_t i = 0; i < fields.size() && exhaustive; ++i) {
    combos *= options.domain.size();
    if (combos > options.max_combinations) exhaustive = false;
  }
  if (exhaustive) {
    for (std::size_t k = 0; k < combos && verdict.passed; ++k) {
      FieldMap perturbed;
      auto idx = k;
      for (const auto& f : fields) {
        perturbed[f] = options.domain[idx % options.domain.size()];
        idx /= options.domain.size();
      }
      try_one(perturbed);
    }
  } else {
    std::mt19937_64 rng(options.seed);
    for (std::size_t k = 0; k < options.samples && verdict.passed; ++k) {
      FieldMap perturbed;
      for (const auto& f : fields) {
        perturbed[f] = options.domain.empty() ? static_cast<Value>(rng())
                                              : options.domain[rng() % options.domain.size()];
      }
      try_one(perturbed);
    }
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Failure transparency

namespace {

Value next_free_id(const GlobalConfig& g) {
  Value next = 1;
  for (const auto& [id, _] : g.Pi) next = std::max(next, id + 1);
  return next;
}

std::string describe_pi_difference(const GlobalConfig& a, const GlobalConfig& b) {
  for (const auto& [id, rec] : a.Pi) {
    auto it = b.Pi.find(id);
    if (it == b.Pi.end()) return "machine " + std::to_string(id) + " exists only with resets";
    if (!(rec == it->second)) {
      return "Pi(" + std::to_string(id) + ") with resets: " + to_string(rec) + "\n  reset-free: " + to_string(it->second);
    }
  }
  for (const auto& [id, _] : b.Pi) {
    if (!a.Pi.count(id)) return "machine " + std::to_string(id) + " exists only without resets";
  }
  return "no difference";
}

}  // namespace

TransparencyVerdict check_failure_transparency(const Program& program, const TheoremRun& run,
                                               const std::optional<FieldMap>& perturbed_volatiles,
                                               std::size_t max_steps) {
  const Value r = run.machine;
  if (!applicable(program, run.start, GlobalRule::kStart, r)) {
    throw ShapeError("the start configuration is not ready for machine " + std::to_string(r));
  }
  int phase = 1;
  std::vector<GlobalRule> after_commit;
  bool reset_after_commit = false;
  for (std::size_t i = 0; i < run.steps.size(); ++i) {
    auto rule = run.steps[i];
    bool ok = phase == 1 ? (rule == GlobalRule::kStart || rule == GlobalRule::kLocal || rule == GlobalRule::kReset ||
                            rule == GlobalRule::kCommit)
                         : (rule == GlobalRule::kCreate || rule == GlobalRule::kSend || rule == GlobalRule::kReset);
    if (!ok) {
      throw ShapeError("step " + std::to_string(i + 1) + " (" + to_string(rule) + ") is not allowed " +
                       (phase == 1 ? "before the commit" : "after the commit"));
    }
    if (rule == GlobalRule::kCommit) phase = 3;
    if (phase == 3 && rule == GlobalRule::kReset) reset_after_commit = true;
    if (phase == 3 && rule != GlobalRule::kCommit && rule != GlobalRule::kReset) after_commit.push_back(rule);
  }
  if (phase != 3) throw ShapeError("the run has no commit step");

  TransparencyVerdict verdict;
  const Value first_id = next_free_id(run.start);

  // Replay the run with resets, remembering where the committing attempt's
  // choices begin.
  Oracle oracle(run.tape, 0, 1, first_id);
  GlobalConfig g = run.start;
  std::size_t star_begin = 0, id_begin = 0, star_end = 0, id_end = 0;
  for (std::size_t i = 0; i < run.steps.size(); ++i) {
    auto rule = run.steps[i];
    if (rule == GlobalRule::kStart) {
      star_begin = oracle.consumed().stars.size();
      id_begin = oracle.consumed().ids.size();
    }
    if (rule == GlobalRule::kReset) ++verdict.resets;
    try {
      g = step_global(program, g, rule, r, oracle);
    } catch (const StuckError& e) {
      throw ShapeError("step " + std::to_string(i + 1) + " does not apply: " + e.what());
    }
    if (rule == GlobalRule::kCommit) {
      star_end = oracle.consumed().stars.size();
      id_end = oracle.consumed().ids.size();
    }
  }
  if (oracle.overran()) throw ShapeError("the run consumed more choices than its tape holds");
  verdict.with_resets = g;

  Choices segment;
  const auto& used = oracle.consumed();
  segment.stars.assign(used.stars.begin() + static_cast<std::ptrdiff_t>(star_begin),
                       used.stars.begin() + static_cast<std::ptrdiff_t>(star_end));
  segment.ids.assign(used.ids.begin() + static_cast<std::ptrdiff_t>(id_begin),
                     used.ids.begin() + static_cast<std::ptrdiff_t>(id_end));

  // The reset-free run from M' ~= M.
  GlobalConfig h = run.start;
  const auto& cls = program.at(h.Pi.at(r).C);
  if (perturbed_volatiles) {
    for (const auto& [f, v] : *perturbed_volatiles) {
      if (!cls.is_volatile(f)) throw UsageError("'" + f + "' is not a volatile field of " + cls.name);
      h.M.at(r).F[f] = v;
    }
  }
  Oracle replay(segment, 0, 1, oracle.next_id());
  try {
    h = step_global(program, h, GlobalRule::kStart, r, replay);
    std::size_t steps = 0;
    while (h.M.at(r).s->kind != Stmt::Kind::kSkip) {
      if (++steps > max_steps) throw StuckError("handler did not finish");
      h = step_global(program, h, GlobalRule::kLocal, r, replay);
    }
    h = step_global(program, h, GlobalRule::kCommit, r, replay);
    for (auto rule : after_commit) h = step_global(program, h, rule, r, replay);
  } catch (const StuckError& e) {
    verdict.holds = false;
    verdict.detail = std::string("the reset-free run is stuck: ") + e.what();
    verdict.reset_free = h;
    return verdict;
  }
  verdict.reset_free = h;
  if (replay.overran() || replay.stars_left() || replay.ids_left()) {
    verdict.holds = false;
    verdict.detail = "the reset-free run made different nondeterministic choices than the committing attempt";
    return verdict;
  }
  if (!(g.Pi == h.Pi)) {
    verdict.holds = false;
    verdict.detail = "persistent state differs: " + describe_pi_difference(g, h);
    return verdict;
  }
  auto a = g.M.at(r);
  auto b = h.M.at(r);
  if (reset_after_commit) b.L = a.L;
  if (!check_local_equiv(cls, a, b)) {
    verdict.holds = false;
    verdict.detail = "final local states are not equivalent: " + to_string(a) + " vs " + to_string(b);
  }
  return verdict;
}

ExhaustiveReport check_transparency_exhaustive(const Program& program, const GlobalConfig& start, Value r,
                                               const ExhaustiveOptions& options) {
  if (!applicable(program, start, GlobalRule::kStart, r)) {
    throw ShapeError("the start configuration is not ready for machine " + std::to_string(r));
  }
  ExhaustiveReport report;
  const auto& cls = program.at(start.Pi.at(r).C);
  std::mt19937_64 perturb_rng(options.seed ^ 0x9e3779b97f4a7c15ull);

  struct Node {
    GlobalConfig g;
    Oracle oracle;
    std::vector<GlobalRule> steps;
    int resets;
    bool committed;
  };

  auto leaf = [&](const Node& n) {
    ++report.runs;
    report.max_resets_seen = std::max<std::size_t>(report.max_resets_seen, static_cast<std::size_t>(n.resets));
    std::optional<FieldMap> perturbed;
    if (options.perturb && !cls.volatiles.empty()) {
      FieldMap f;
      for (const auto& [name, _] : cls.volatiles) {
        f[name] = static_cast<Value>(perturb_rng() % static_cast<std::uint64_t>(std::max<Value>(options.star_domain, 1)));
      }
      perturbed = f;
    }
    auto v = check_failure_transparency(program, TheoremRun{start, r, n.steps, n.oracle.consumed()}, perturbed,
                                        options.max_steps);
    if (!v.holds) {
      ++report.violations;
      if (report.examples.size() < 5) {
        std::string steps;
        for (auto s : n.steps) steps += std::string(to_string(s)) + " ";
        report.examples.push_back("steps: " + steps + "\n  " + v.detail);
      }
    }
  };

  std::function<void(Node)> dfs = [&](Node n) {
    const auto& m = n.g.M.at(r);
    const auto& p = n.g.Pi.at(r);
    bool finished = n.committed && p.O.empty();
    if (n.resets < options.max_resets) {
      Node reset{step_global(program, n.g, GlobalRule::kReset, r, n.oracle), n.oracle, n.steps, n.resets + 1,
                 n.committed};
      reset.steps.push_back(GlobalRule::kReset);
      dfs(std::move(reset));
    }
    if (finished) {
      leaf(n);
      return;
    }
    GlobalRule next;
    if (n.committed) {
      next = program.is_class_code(p.O.back().type) ? GlobalRule::kCreate : GlobalRule::kSend;
    } else if (m.b == 0) {
      next = GlobalRule::kStart;
    } else if (m.s->kind != Stmt::Kind::kSkip) {
      next = GlobalRule::kLocal;
    } else {
      next = GlobalRule::kCommit;
    }
    if (n.steps.size() > options.max_steps) throw StuckError("run exceeded the step bound");
    n.g = step_global(program, n.g, next, r, n.oracle);
    n.steps.push_back(next);
    if (next == GlobalRule::kCommit) n.committed = true;
    dfs(std::move(n));
  };

  dfs(Node{start, Oracle(options.seed, options.star_domain, next_free_id(start)), {}, 0, false});
  return report;
}

}  // namespace rsm::sem
