// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/semantics/step.hpp"

namespace rsm::sem {

const char* to_string(ExprRule r) {
  switch (r) {
    case ExprRule::kNum:
      return "E-num";
    case ExprRule::kVar:
      return "E-var";
    case ExprRule::kVolatile:
      return "E-volatile";
    case ExprRule::kPersistent:
      return "E-persistent";
    case ExprRule::kBinop:
      return "E-binop";
    case ExprRule::kStar:
      return "E-star";
  }
  return "?";
}

const char* to_string(LocalRule r) {
  switch (r) {
    case LocalRule::kAssign:
      return "L-assign";
    case LocalRule::kFieldAssign:
      return "L-field-assign";
    case LocalRule::kStore:
      return "L-store";
    case LocalRule::kIf:
      return "L-if";
    case LocalRule::kSeq:
      return "L-seq";
    case LocalRule::kSeqSkip:
      return "L-seq-skip";
    case LocalRule::kCreate:
      return "L-create";
    case LocalRule::kSend:
      return "L-send";
  }
  return "?";
}

const char* to_string(GlobalRule r) {
  switch (r) {
    case GlobalRule::kStart:
      return "start";
    case GlobalRule::kLocal:
      return "local";
    case GlobalRule::kCommit:
      return "commit";
    case GlobalRule::kCreate:
      return "create";
    case GlobalRule::kSend:
      return "send";
    case GlobalRule::kReset:
      return "reset";
  }
  return "?";
}

std::optional<GlobalRule> parse_global_rule(const std::string& name) {
  for (auto r : {GlobalRule::kStart, GlobalRule::kLocal, GlobalRule::kCommit, GlobalRule::kCreate, GlobalRule::kSend,
                 GlobalRule::kReset}) {
    if (name == to_string(r)) return r;
  }
  return std::nullopt;
}

Value eval_val(const FieldMap& F, const LocalEnv& L, const Val& v) {
  switch (v.kind) {
    case Val::Kind::kNum:
      return v.num;
    case Val::Kind::kVar: {
      auto it = L.find(v.name);
      if (it == L.end()) throw StuckError("unbound variable '" + v.name + "'");
      return it->second;
    }
    case Val::Kind::kField: {
      auto it = F.find(v.name);
      if (it == F.end()) throw StuckError("unbound field '" + v.name + "'");
      return it->second;
    }
  }
  return 0;
}

ExprResult eval_expr(const FieldMap& F, const LocalEnv& L, const Expr& e, Oracle& oracle) {
  switch (e.kind) {
    case Expr::Kind::kVal: {
      auto rule = e.a.kind == Val::Kind::kNum   ? ExprRule::kNum
                  : e.a.kind == Val::Kind::kVar ? ExprRule::kVar
                                                : ExprRule::kVolatile;
      return {eval_val(F, L, e.a), rule};
    }
    case Expr::Kind::kLoad: {
      auto it = F.find(e.field);
      if (it == F.end()) throw StuckError("unbound field '" + e.field + "'");
      return {it->second, ExprRule::kPersistent};
    }
    case Expr::Kind::kBinop:
      return {apply_binop(e.op, eval_val(F, L, e.a), eval_val(F, L, e.b)), ExprRule::kBinop};
    case Expr::Kind::kStar:
      return {oracle.star(), ExprRule::kStar};
  }
  return {};
}

namespace {

void prepend(EventList& list, Event e) { list.insert(list.begin(), e); }

}  // namespace

LocalStep step_local(const Program& program, const LocalConfig& cfg, Oracle& oracle) {
  const auto& s = *cfg.s;
  LocalStep out{cfg, LocalRule::kSeq};
  auto& next = out.next;
  switch (s.kind) {
    case Stmt::Kind::kSkip:
      throw StuckError("skip has no step");
    case Stmt::Kind::kAssign:
      next.L[s.name] = eval_expr(cfg.F, cfg.L, s.expr, oracle).value;
      next.s = skip();
      out.rule = LocalRule::kAssign;
      break;
    case Stmt::Kind::kFieldAssign:
      next.F[s.name] = eval_expr(cfg.F, cfg.L, s.expr, oracle).value;
      next.s = skip();
      out.rule = LocalRule::kFieldAssign;
      break;
    case Stmt::Kind::kStore:
      next.F[s.name] = eval_expr(cfg.F, cfg.L, s.expr, oracle).value;
      next.s = skip();
      out.rule = LocalRule::kStore;
      break;
    case Stmt::Kind::kIf:
      next.s = eval_val(cfg.F, cfg.L, s.v1) != 0 ? s.s1 : s.s2;
      out.rule = LocalRule::kIf;
      break;
    case Stmt::Kind::kSeq:
      if (s.s1->kind == Stmt::Kind::kSkip) {
        next.s = s.s2;
        out.rule = LocalRule::kSeqSkip;
      } else {
        LocalConfig inner = cfg;
        inner.s = s.s1;
        auto sub = step_local(program, inner, oracle);
        next = std::move(sub.next);
        next.s = seq(next.s, s.s2);
        out.rule = LocalRule::kSeq;
      }
      break;
    case Stmt::Kind::kCreate: {
      auto code = program.class_code(s.name);
      auto id = oracle.fresh();
      prepend(next.E, Event{id, code, 0});
      next.L[s.target] = id;
      next.s = skip();
      out.rule = LocalRule::kCreate;
      break;
    }
    case Stmt::Kind::kSend: {
      Event e{eval_val(cfg.F, cfg.L, s.v1), eval_val(cfg.F, cfg.L, s.v2), eval_val(cfg.F, cfg.L, s.v3)};
      if (program.is_class_code(e.type)) {
        throw StuckError("send with reserved event type " + std::to_string(e.type));
      }
      prepend(next.E, e);
      next.s = skip();
      out.rule = LocalRule::kSend;
      break;
    }
  }
  return out;
}

namespace {

bool at_rest(const LocalConfig& m) { return m.s->kind == Stmt::Kind::kSkip && m.b == 0; }

/// Empty when the premises of `rule` hold for r, else the failed premise.
std::string premise_failure(const Program& program, const GlobalConfig& g, GlobalRule rule, Value r) {
  auto mi = g.M.find(r);
  auto pi = g.Pi.find(r);
  if (mi == g.M.end() || pi == g.Pi.end()) return "no machine " + std::to_string(r);
  const auto& m = mi->second;
  const auto& p = pi->second;
  const auto& c = program.at(p.C);
  switch (rule) {
    case GlobalRule::kStart: {
      if (!m.E.empty() || !at_rest(m)) return "machine is not at rest with an empty event list";
      if (p.I.empty()) return "inbox is empty";
      if (!p.O.empty()) return "outbox is not empty";
      for (const auto& [f, _] : m.F) {
        if (!c.is_persistent(f) && !c.is_volatile(f)) return "field map has undeclared field '" + f + "'";
      }
      if (persistent_part(c, m.F) != p.P) return "persistent fields differ from the committed ones";
      return {};
    }
    case GlobalRule::kLocal:
      if (m.b != 1) return "machine is not processing an event";
      if (!p.O.empty()) return "outbox is not empty";
      if (m.s->kind == Stmt::Kind::kSkip) return "handler has finished";
      return {};
    case GlobalRule::kCommit:
      if (m.s->kind != Stmt::Kind::kSkip || m.b != 1) return "handler has not finished";
      if (p.I.empty()) return "inbox is empty";
      if (!p.O.empty()) return "outbox is not empty";
      return {};
    case GlobalRule::kCreate: {
      if (!at_rest(m)) return "machine is not at rest";
      if (p.O.empty()) return "outbox is empty";
      const auto& e = p.O.back();
      if (!program.is_class_code(e.type)) return "oldest outbox entry is not a creation";
      if (g.Pi.count(e.r) || e.r == kEnvId) return "machine " + std::to_string(e.r) + " already exists";
      return {};
    }
    case GlobalRule::kSend: {
      if (!at_rest(m)) return "machine is not at rest";
      if (p.O.empty()) return "outbox is empty";
      const auto& e = p.O.back();
      if (program.is_class_code(e.type)) return "oldest outbox entry is a creation";
      if (e.r != kEnvId && !g.Pi.count(e.r)) return "destination " + std::to_string(e.r) + " does not exist";
      return {};
    }
    case GlobalRule::kReset:
      return {};
  }
  return "unknown rule";
}

}  // namespace

bool applicable(const Program& program, const GlobalConfig& g, GlobalRule rule, Value r) {
  return premise_failure(program, g, rule, r).empty();
}

GlobalConfig step_global(const Program& program, const GlobalConfig& g, GlobalRule rule, Value r, Oracle& oracle) {
  if (auto why = premise_failure(program, g, rule, r); !why.empty()) {
    throw StuckError(std::string("G-") + to_string(rule) + " on " + std::to_string(r) + ": " + why);
  }
  GlobalConfig out = g;
  auto& m = out.M.at(r);
  auto& p = out.Pi.at(r);
  const auto& c = program.at(p.C);
  switch (rule) {
    case GlobalRule::kStart: {
      const auto& head = p.I.back();
      m.L = init_locals(c, head.r, head.type, head.payload);
      m.s = c.handler;
      m.b = 1;
      break;
    }
    case GlobalRule::kLocal: {
      auto step = step_local(program, m, oracle);
      m = std::move(step.next);
      m.b = 1;
      break;
    }
    case GlobalRule::kCommit:
      p.I.pop_back();
      p.O = m.E;
      p.P = persistent_part(c, m.F);
      m.E.clear();
      m.b = 0;
      break;
    case GlobalRule::kCreate: {
      auto e = p.O.back();
      p.O.pop_back();
      prepend(p.T, Event{e.r, e.type, 0});
      const auto* cls = program.class_of_code(e.type);
      PersistentRecord rec;
      rec.C = cls->name;
      for (const auto& [f, n] : cls->persistent) rec.P[f] = n;
      LocalConfig fresh;
      fresh.F = reset_fields(*cls, rec.P);
      out.M[e.r] = std::move(fresh);
      out.Pi[e.r] = std::move(rec);
      break;
    }
    case GlobalRule::kSend: {
      auto e = p.O.back();
      p.O.pop_back();
      prepend(p.T, e);
      if (e.r != kEnvId) prepend(out.Pi.at(e.r).I, Event{r, e.type, e.payload});
      break;
    }
    case GlobalRule::kReset:
      m.E.clear();
      m.F = reset_fields(c, p.P);
      m.L.clear();
      m.s = skip();
      m.b = 0;
      break;
  }
  return out;
}

}  // namespace rsm::sem
