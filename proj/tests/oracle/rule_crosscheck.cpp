// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rule_crosscheck.hpp"

#include <random>
#include <stdexcept>

#include "reference_semantics.hpp"
#include "rsm/semantics/step.hpp"

namespace rsm_crosscheck {

using namespace rsm::sem;

namespace {

const std::vector<std::string> kExprRules = {"E-num", "E-var", "E-volatile", "E-persistent", "E-binop", "E-star"};
const std::vector<std::string> kLocalRules = {"L-assign", "L-field-assign", "L-store", "L-if",
                                              "L-seq",    "L-seq-skip",     "L-create", "L-send"};
const std::vector<std::string> kGlobalRules = {"start", "local", "commit", "create", "send", "reset"};

bool member(const std::vector<std::string>& v, const std::string& x) {
  for (const auto& e : v)
    if (e == x) return true;
  return false;
}

// ---- canonical printing of interpreter configurations -----------------------

std::string print_events(const char* name, const EventList& list) {
  std::string out = std::string("(") + name;
  for (const auto& e : list)
    out += " (" + std::to_string(e.r) + " " + std::to_string(e.type) + " " + std::to_string(e.payload) + ")";
  return out + ")";
}

std::string print_map(const char* name, const std::map<std::string, Value>& m) {
  std::string out = std::string("(") + name;
  for (const auto& [k, v] : m) out += " (" + k + " " + std::to_string(v) + ")";
  return out + ")";
}

std::string print_local(const LocalConfig& m) {
  return "(local " + print_events("E", m.E) + " " + print_map("F", m.F) + " " + print_map("L", m.L) + " (s " +
         to_sexpr(m.s) + ") (b " + std::to_string(m.b) + "))";
}

std::string print_global(const GlobalConfig& g) {
  std::string out = "(global (M";
  for (const auto& [id, m] : g.M) out += " (" + std::to_string(id) + " " + print_local(m) + ")";
  out += ") (Pi";
  for (const auto& [id, p] : g.Pi) {
    out += " (" + std::to_string(id) + " " + p.C + " " + print_events("I", p.I) + " " + print_events("O", p.O) + " " +
           print_map("P", p.P) + " " + print_events("T", p.T) + ")";
  }
  return out + "))";
}

std::string print_tape(const Choices& c) {
  std::string out = "(tape (stars";
  for (auto v : c.stars) out += " " + std::to_string(v);
  out += ") (ids";
  for (auto v : c.ids) out += " " + std::to_string(v);
  return out + "))";
}

// ---- instance generation ------------------------------------------------------

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) { program_ = make_program(); }

  const Program& program() const { return program_; }

  int pick(int lo, int hi) { return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  bool chance(int percent) { return pick(0, 99) < percent; }

  Value small() {
    if (chance(8)) return -pick(1, static_cast<int>(program_.classes.size()));
    return pick(-2, 5);
  }

  const ClassDef& some_class() { return program_.classes[pick(0, static_cast<int>(program_.classes.size()) - 1)]; }

  static std::string one_of(const std::vector<std::pair<std::string, Value>>& decls, std::mt19937_64& rng) {
    return decls[rng() % decls.size()].first;
  }

  std::string local_name(const ClassDef& c) {
    if (chance(15)) return std::vector<std::string>{kSourceVar, kTypeVar, kPayloadVar}[pick(0, 2)];
    return one_of(c.locals, rng_);
  }

  Val val_of_kind(const ClassDef& c, int kind) {
    switch (kind) {
      case 0:
        return Val::number(small());
      case 1:
        return Val::var(chance(4) ? std::string("zz") : local_name(c));
      default:
        if (chance(4)) return Val::field("nofield");
        return Val::field(chance(70) ? one_of(c.volatiles, rng_) : one_of(c.persistent, rng_));
    }
  }

  Val val(const ClassDef& c) { return val_of_kind(c, pick(0, 2)); }

  Expr expr_of_rule(const ClassDef& c, const std::string& rule) {
    if (rule == "E-num") return Expr::value(val_of_kind(c, 0));
    if (rule == "E-var") return Expr::value(val_of_kind(c, 1));
    if (rule == "E-volatile") return Expr::value(val_of_kind(c, 2));
    if (rule == "E-persistent") return Expr::load(chance(4) ? std::string("nofield") : one_of(c.persistent, rng_));
    if (rule == "E-star") return Expr::star();
    static const BinOp ops[] = {BinOp::kAdd, BinOp::kSub, BinOp::kMul, BinOp::kEq, BinOp::kNe, BinOp::kLt, BinOp::kLe};
    return Expr::binop(ops[pick(0, 6)], val(c), val(c));
  }

  Expr expr(const ClassDef& c) { return expr_of_rule(c, kExprRules[pick(0, 5)]); }

  StmtPtr stmt_of_rule(const ClassDef& c, const std::string& rule, int depth) {
    if (rule == "L-assign") return assign(local_name(c), expr(c));
    if (rule == "L-field-assign") return field_assign(one_of(c.volatiles, rng_), expr(c));
    if (rule == "L-store") return store(one_of(c.persistent, rng_), expr(c));
    if (rule == "L-if") return if_(val(c), stmt(c, depth + 1), stmt(c, depth + 1));
    if (rule == "L-seq") {
      auto first = chance(90) ? stmt_of_rule(c, kLocalRules[pick(0, 7)], depth + 1) : skip();
      if (first->kind == Stmt::Kind::kSkip && chance(90)) first = send(val(c), val(c), val(c));
      return seq(first, stmt(c, depth + 1));
    }
    if (rule == "L-seq-skip") return seq(skip(), stmt(c, depth + 1));
    if (rule == "L-create") return create(local_name(c), some_class().name);
    Val type = chance(85) ? Val::number(pick(0, 4)) : val(c);
    return send(val(c), type, val(c));
  }

  StmtPtr stmt(const ClassDef& c, int depth) {
    if (depth > 3 || chance(10)) return skip();
    return stmt_of_rule(c, kLocalRules[pick(0, 7)], depth);
  }

  FieldMap fields(const ClassDef& c) {
    FieldMap F;
    for (const auto& [f, _] : c.persistent) F[f] = small();
    for (const auto& [f, _] : c.volatiles) F[f] = small();
    if (chance(10)) F.erase(F.begin());
    return F;
  }

  LocalEnv locals(const ClassDef& c) {
    LocalEnv L;
    for (const auto& [x, _] : c.locals) L[x] = small();
    for (const char* x : {kSourceVar, kTypeVar, kPayloadVar}) L[x] = small();
    if (chance(10)) L.erase(L.begin());
    return L;
  }

  Event event(const std::vector<Value>& ids) {
    return Event{ids[rng_() % ids.size()], static_cast<Value>(pick(0, 4)), static_cast<Value>(pick(0, 5))};
  }

  EventList events(const std::vector<Value>& ids, int lo, int hi) {
    EventList out;
    int n = pick(lo, hi);
    for (int i = 0; i < n; ++i) out.push_back(event(ids));
    return out;
  }

  LocalConfig local_config(const ClassDef& c, StmtPtr s) {
    LocalConfig m;
    m.E = events({0, 1, 2, 7}, 0, 2);
    m.F = fields(c);
    m.L = locals(c);
    m.s = std::move(s);
    m.b = pick(0, 1);
    return m;
  }

  Choices tape() {
    Choices t;
    for (int i = 0; i < 4; ++i) t.stars.push_back(pick(0, 2));
    for (int i = 0; i < 4; ++i) t.ids.push_back(chance(85) ? pick(10, 40) : pick(0, 3));
    return t;
  }

  /// A global configuration with machines 1..n, each in a random but
  /// plausible state, and machine `r` shaped for `rule`.
  GlobalConfig global(const std::string& rule, Value& r) {
    GlobalConfig g;
    int n = pick(1, 3);
    std::vector<Value> ids = {0};
    for (int id = 1; id <= n; ++id) ids.push_back(id);
    for (int id = 1; id <= n; ++id) {
      const auto& c = some_class();
      PersistentRecord p;
      p.C = c.name;
      p.I = events(ids, 0, 2);
      p.O = chance(60) ? EventList{} : events(ids, 1, 2);
      for (const auto& [f, _] : c.persistent) p.P[f] = small();
      p.T = events(ids, 0, 2);
      LocalConfig m;
      if (chance(50)) {
        m.F = reset_fields(c, p.P);
      } else {
        m = local_config(c, stmt(c, 0));
      }
      g.M[id] = m;
      g.Pi[id] = p;
    }
    r = pick(1, n);
    auto& m = g.M[r];
    auto& p = g.Pi[r];
    const auto& c = program_.at(p.C);
    auto at_rest = [&] {
      if (chance(92)) {
        m.s = skip();
        m.b = 0;
      }
    };
    if (rule == "start") {
      at_rest();
      m.F = reset_fields(c, p.P);
      if (chance(8)) m.F[one_of(c.persistent, rng_)] += 1;
      if (chance(4)) m.F["stray"] = 1;
      m.E = chance(92) ? EventList{} : events(ids, 1, 1);
      if (chance(92) && p.I.empty()) p.I = events(ids, 1, 2);
      if (chance(92)) p.O.clear();
    } else if (rule == "local") {
      m = local_config(c, chance(92) ? stmt_of_rule(c, kLocalRules[pick(0, 7)], 0) : skip());
      if (chance(92)) m.b = 1;
      if (chance(92)) p.O.clear();
    } else if (rule == "commit") {
      m = local_config(c, chance(92) ? skip() : stmt(c, 0));
      if (chance(92)) m.b = 1;
      if (chance(92) && p.I.empty()) p.I = events(ids, 1, 2);
      if (chance(92)) p.O.clear();
    } else if (rule == "create") {
      at_rest();
      Value target = chance(85) ? pick(10, 40) : pick(0, n);
      Value code = chance(92) ? program_.class_code(some_class().name) : pick(0, 3);
      p.O.push_back(Event{target, code, 0});
    } else if (rule == "send") {
      at_rest();
      Value dest = chance(90) ? ids[rng_() % ids.size()] : pick(10, 40);
      Value type = chance(92) ? pick(0, 4) : program_.class_code(some_class().name);
      p.O.push_back(Event{dest, type, small()});
    }
    if (chance(3)) r = n + 1;
    return g;
  }

 private:
  Program make_program() {
    Program p;
    int classes = pick(1, 3);
    for (int i = 0; i < classes; ++i) {
      ClassDef c;
      c.name = std::string(1, static_cast<char>('A' + i));
      int np = pick(1, 2), nv = pick(1, 2);
      for (int k = 0; k < np; ++k) c.persistent.emplace_back("p" + std::to_string(k), pick(0, 3));
      for (int k = 0; k < nv; ++k) c.volatiles.emplace_back("v" + std::to_string(k), pick(0, 3));
      c.locals = {{"a", pick(0, 2)}, {"b", 0}, {"y", pick(0, 2)}};
      p.classes.push_back(std::move(c));
    }
    for (auto& c : p.classes) {
      program_ = p;
      c.handler = seq({stmt(c, 1), stmt(c, 1), stmt(c, 1)});
    }
    p.machines.emplace_back(1, p.classes[0].name);
    return p;
  }

  std::mt19937_64 rng_;
  Program program_;
};

// ---- one instance ---------------------------------------------------------------

struct Outcome {
  std::string text;
  std::string rule;  // empty when stuck
};

Outcome run_expr(Gen& gen, const std::string& rule, std::string& instance) {
  const auto& c = gen.some_class();
  FieldMap F = gen.fields(c);
  LocalEnv L = gen.locals(c);
  Expr e = gen.expr_of_rule(c, rule);
  Choices tape = gen.tape();
  instance = "(instance " + to_sexpr(gen.program()) + " " + print_tape(tape) + " (expr (class " + c.name + ") " +
             print_map("F", F) + " " + print_map("L", L) + " (e " + to_sexpr(e) + ")))";
  Oracle oracle(tape, 0, 3, 100);
  try {
    auto r = eval_expr(F, L, e, oracle);
    return {"(value " + std::to_string(r.value) + " " + to_string(r.rule) + ")", to_string(r.rule)};
  } catch (const StuckError&) {
    return {"stuck", ""};
  }
}

Outcome run_local(Gen& gen, const std::string& rule, std::string& instance) {
  const auto& c = gen.some_class();
  auto m = gen.local_config(c, gen.stmt_of_rule(c, rule, 0));
  Choices tape = gen.tape();
  instance = "(instance " + to_sexpr(gen.program()) + " " + print_tape(tape) + " (local (class " + c.name + ") " +
             print_local(m) + "))";
  Oracle oracle(tape, 0, 3, 100);
  try {
    auto r = step_local(gen.program(), m, oracle);
    return {print_local(r.next) + " " + to_string(r.rule), to_string(r.rule)};
  } catch (const StuckError&) {
    return {"stuck", ""};
  }
}

Outcome run_global(Gen& gen, const std::string& rule, std::string& instance) {
  Value r = 0;
  GlobalConfig g = gen.global(rule, r);
  Choices tape = gen.tape();
  instance = "(instance " + to_sexpr(gen.program()) + " " + print_tape(tape) + " (global (rule " + rule +
             ") (machine " + std::to_string(r) + ") " + print_global(g) + "))";
  Oracle oracle(tape, 0, 3, 100);
  try {
    auto next = step_global(gen.program(), g, *parse_global_rule(rule), r, oracle);
    return {print_global(next), rule};
  } catch (const StuckError&) {
    return {"stuck", ""};
  }
}

}  // namespace

std::vector<std::string> rule_names() {
  std::vector<std::string> out = kExprRules;
  out.insert(out.end(), kLocalRules.begin(), kLocalRules.end());
  out.insert(out.end(), kGlobalRules.begin(), kGlobalRules.end());
  return out;
}

RuleTally crosscheck_rule(const std::string& rule, int instances, std::uint64_t seed) {
  RuleTally tally;
  tally.rule = rule;
  for (int i = 0; i < instances; ++i) {
    Gen gen(seed * 1000003u + static_cast<std::uint64_t>(i));
    std::string instance;
    Outcome impl;
    if (member(kExprRules, rule)) {
      impl = run_expr(gen, rule, instance);
    } else if (member(kLocalRules, rule)) {
      impl = run_local(gen, rule, instance);
    } else if (member(kGlobalRules, rule)) {
      impl = run_global(gen, rule, instance);
    } else {
      throw std::invalid_argument("unknown rule " + rule);
    }
    std::string ref = rsm_reference::step(instance);
    ++tally.instances;
    if (ref == impl.text) {
      ++tally.agreed;
      if (impl.rule == rule) ++tally.fired;
    } else if (tally.mismatches.size() < 3) {
      tally.mismatches.push_back(instance + "\n  interpreter: " + impl.text + "\n  reference:   " + ref);
    }
  }
  return tally;
}

}  // namespace rsm_crosscheck
