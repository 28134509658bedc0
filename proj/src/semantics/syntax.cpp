// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/semantics/syntax.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "rsm/semantics/sexpr.hpp"

namespace rsm::sem {

const char* to_string(BinOp op) {
  switch (op) {
    case BinOp::kAdd:
      return "+";
    case BinOp::kSub:
      return "-";
    case BinOp::kMul:
      return "*";
    case BinOp::kEq:
      return "==";
    case BinOp::kNe:
      return "!=";
    case BinOp::kLt:
      return "<";
    case BinOp::kLe:
      return "<=";
  }
  return "?";
}

std::optional<BinOp> parse_binop(const std::string& text) {
  for (auto op : {BinOp::kAdd, BinOp::kSub, BinOp::kMul, BinOp::kEq, BinOp::kNe, BinOp::kLt, BinOp::kLe}) {
    if (text == to_string(op)) return op;
  }
  return std::nullopt;
}

Value apply_binop(BinOp op, Value a, Value b) {
  auto ua = static_cast<std::uint64_t>(a);
  auto ub = static_cast<std::uint64_t>(b);
  switch (op) {
    case BinOp::kAdd:
      return static_cast<Value>(ua + ub);
    case BinOp::kSub:
      return static_cast<Value>(ua - ub);
    case BinOp::kMul:
      return static_cast<Value>(ua * ub);
    case BinOp::kEq:
      return a == b;
    case BinOp::kNe:
      return a != b;
    case BinOp::kLt:
      return a < b;
    case BinOp::kLe:
      return a <= b;
  }
  return 0;
}

namespace {

StmtPtr make(Stmt s) { return std::make_shared<const Stmt>(std::move(s)); }

}  // namespace

StmtPtr skip() {
  static const StmtPtr instance = make(Stmt{});
  return instance;
}

StmtPtr assign(std::string x, Expr e) {
  Stmt s;
  s.kind = Stmt::Kind::kAssign;
  s.name = std::move(x);
  s.expr = std::move(e);
  return make(std::move(s));
}

StmtPtr field_assign(std::string f, Expr e) {
  Stmt s;
  s.kind = Stmt::Kind::kFieldAssign;
  s.name = std::move(f);
  s.expr = std::move(e);
  return make(std::move(s));
}

StmtPtr store(std::string f, Expr e) {
  Stmt s;
  s.kind = Stmt::Kind::kStore;
  s.name = std::move(f);
  s.expr = std::move(e);
  return make(std::move(s));
}

StmtPtr if_(Val v, StmtPtr s1, StmtPtr s2) {
  Stmt s;
  s.kind = Stmt::Kind::kIf;
  s.v1 = std::move(v);
  s.s1 = std::move(s1);
  s.s2 = std::move(s2);
  return make(std::move(s));
}

StmtPtr seq(StmtPtr s1, StmtPtr s2) {
  Stmt s;
  s.kind = Stmt::Kind::kSeq;
  s.s1 = std::move(s1);
  s.s2 = std::move(s2);
  return make(std::move(s));
}

StmtPtr seq(const std::vector<StmtPtr>& parts) {
  if (parts.empty()) return skip();
  StmtPtr out = parts.back();
  for (auto it = parts.rbegin() + 1; it != parts.rend(); ++it) out = seq(*it, out);
  return out;
}

StmtPtr create(std::string x, std::string cls) {
  Stmt s;
  s.kind = Stmt::Kind::kCreate;
  s.target = std::move(x);
  s.name = std::move(cls);
  return make(std::move(s));
}

StmtPtr send(Val dest, Val type, Val payload) {
  Stmt s;
  s.kind = Stmt::Kind::kSend;
  s.v1 = std::move(dest);
  s.v2 = std::move(type);
  s.v3 = std::move(payload);
  return make(std::move(s));
}

bool equal(const StmtPtr& a, const StmtPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Stmt::Kind::kSkip:
      return true;
    case Stmt::Kind::kAssign:
    case Stmt::Kind::kFieldAssign:
    case Stmt::Kind::kStore:
      return a->name == b->name && a->expr == b->expr;
    case Stmt::Kind::kIf:
      return a->v1 == b->v1 && equal(a->s1, b->s1) && equal(a->s2, b->s2);
    case Stmt::Kind::kSeq:
      return equal(a->s1, b->s1) && equal(a->s2, b->s2);
    case Stmt::Kind::kCreate:
      return a->name == b->name && a->target == b->target;
    case Stmt::Kind::kSend:
      return a->v1 == b->v1 && a->v2 == b->v2 && a->v3 == b->v3;
  }
  return false;
}

std::size_t statement_count(const StmtPtr& s) {
  switch (s->kind) {
    case Stmt::Kind::kSeq:
      return statement_count(s->s1) + statement_count(s->s2);
    case Stmt::Kind::kIf:
      return 1 + statement_count(s->s1) + statement_count(s->s2);
    case Stmt::Kind::kSkip:
      return 0;
    default:
      return 1;
  }
}

std::string to_sexpr(const Val& v) {
  return v.kind == Val::Kind::kNum ? std::to_string(v.num) : v.name;
}

std::string to_sexpr(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::kVal:
      return to_sexpr(e.a);
    case Expr::Kind::kLoad:
      return "(load " + e.field + ")";
    case Expr::Kind::kBinop:
      return std::string("(") + to_string(e.op) + " " + to_sexpr(e.a) + " " + to_sexpr(e.b) + ")";
    case Expr::Kind::kStar:
      return "(star)";
  }
  return "?";
}

std::string to_sexpr(const StmtPtr& s) {
  switch (s->kind) {
    case Stmt::Kind::kSkip:
      return "(skip)";
    case Stmt::Kind::kAssign:
      return "(assign " + s->name + " " + to_sexpr(s->expr) + ")";
    case Stmt::Kind::kFieldAssign:
      return "(fassign " + s->name + " " + to_sexpr(s->expr) + ")";
    case Stmt::Kind::kStore:
      return "(store " + s->name + " " + to_sexpr(s->expr) + ")";
    case Stmt::Kind::kIf:
      return "(if " + to_sexpr(s->v1) + " " + to_sexpr(s->s1) + " " + to_sexpr(s->s2) + ")";
    case Stmt::Kind::kSeq:
      return "(seq " + to_sexpr(s->s1) + " " + to_sexpr(s->s2) + ")";
    case Stmt::Kind::kCreate:
      return "(create " + s->target + " " + s->name + ")";
    case Stmt::Kind::kSend:
      return "(send " + to_sexpr(s->v1) + " " + to_sexpr(s->v2) + " " + to_sexpr(s->v3) + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Program

namespace {

bool declared(const std::vector<std::pair<std::string, Value>>& decls, const std::string& name) {
  return std::any_of(decls.begin(), decls.end(), [&](const auto& d) { return d.first == name; });
}

bool is_special(const std::string& x) { return x == kSourceVar || x == kTypeVar || x == kPayloadVar; }

}  // namespace

bool ClassDef::is_persistent(const std::string& f) const { return declared(persistent, f); }
bool ClassDef::is_volatile(const std::string& f) const { return declared(volatiles, f); }

const ClassDef* Program::find(const std::string& name) const {
  for (const auto& c : classes)
    if (c.name == name) return &c;
  return nullptr;
}

const ClassDef& Program::at(const std::string& name) const {
  if (auto* c = find(name)) return *c;
  throw UnknownClassError(name);
}

Value Program::class_code(const std::string& name) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i].name == name) return -static_cast<Value>(i + 1);
  throw UnknownClassError(name);
}

const ClassDef* Program::class_of_code(Value code) const {
  if (code >= 0) return nullptr;
  auto idx = static_cast<std::uint64_t>(-(code + 1));
  return idx < classes.size() ? &classes[idx] : nullptr;
}

bool Program::is_class_code(Value type) const { return class_of_code(type) != nullptr; }

Value Program::first_fresh_id() const {
  Value next = 1;
  for (const auto& [id, _] : machines) next = std::max(next, id + 1);
  return next;
}

namespace {

class ProgramParser {
 public:
  Program parse(const std::vector<Sexpr>& forms) {
    if (forms.size() != 1 || !forms[0].is("program")) throw ParseError("expected a single (program ...) form");
    const auto& items = forms[0].items;
    // Classes first so that symbols in handlers can be resolved against
    // any class's declarations regardless of order.
    for (std::size_t i = 1; i < items.size(); ++i) {
      if (items[i].is("class")) program_.classes.push_back(parse_class_header(items[i]));
    }
    std::size_t ci = 0;
    for (std::size_t i = 1; i < items.size(); ++i) {
      const auto& it = items[i];
      if (it.is("class")) {
        parse_class_body(it, program_.classes[ci++]);
      } else if (it.is("machine")) {
        if (it.items.size() != 3) fail(it, "expected (machine <id> <Class>)");
        program_.machines.emplace_back(number(it.items[1]), symbol(it.items[2]));
      } else if (it.is("inbox")) {
        if (it.items.size() < 2) fail(it, "expected (inbox <id> (src type payload)...)");
        auto id = number(it.items[1]);
        auto& q = program_.inboxes[id];
        for (std::size_t k = 2; k < it.items.size(); ++k) {
          const auto& ev = it.items[k];
          if (!ev.is_list || ev.items.size() != 3) fail(ev, "expected (src type payload)");
          q.push_back(InitialEvent{number(ev.items[0]), number(ev.items[1]), number(ev.items[2])});
        }
      } else {
        fail(it, "unknown top-level form");
      }
    }
    validate(program_);
    return std::move(program_);
  }

 private:
  [[noreturn]] static void fail(const Sexpr& at, const std::string& what) {
    throw ParseError("line " + std::to_string(at.line) + ": " + what + ": " + at.to_string());
  }

  static Value number(const Sexpr& s) {
    auto v = s.integer();
    if (!v) fail(s, "expected an integer");
    return *v;
  }

  static std::string symbol(const Sexpr& s) {
    if (!s.is_atom() || s.integer()) fail(s, "expected a name");
    return s.atom;
  }

  static std::vector<std::pair<std::string, Value>> decls(const Sexpr& s) {
    std::vector<std::pair<std::string, Value>> out;
    for (std::size_t i = 1; i < s.items.size(); ++i) {
      const auto& d = s.items[i];
      if (!d.is_list || d.items.size() != 2) fail(d, "expected (name initial-value)");
      out.emplace_back(symbol(d.items[0]), number(d.items[1]));
    }
    return out;
  }

  ClassDef parse_class_header(const Sexpr& s) {
    if (s.items.size() < 2) fail(s, "class needs a name");
    ClassDef c;
    c.name = symbol(s.items[1]);
    for (std::size_t i = 2; i < s.items.size(); ++i) {
      const auto& part = s.items[i];
      if (part.is("persistent")) {
        c.persistent = decls(part);
      } else if (part.is("volatile")) {
        c.volatiles = decls(part);
      } else if (part.is("locals")) {
        c.locals = decls(part);
      } else if (!part.is("handler")) {
        fail(part, "unknown class section");
      }
    }
    return c;
  }

  void parse_class_body(const Sexpr& s, ClassDef& c) {
    current_ = &c;
    for (std::size_t i = 2; i < s.items.size(); ++i) {
      const auto& part = s.items[i];
      if (!part.is("handler")) continue;
      if (part.items.size() != 2) fail(part, "expected (handler <stmt>)");
      c.handler = stmt(part.items[1]);
    }
  }

  Val value(const Sexpr& s) const {
    if (auto n = s.integer()) return Val::number(*n);
    auto name = symbol(s);
    if (current_->is_persistent(name) || current_->is_volatile(name)) return Val::field(name);
    return Val::var(name);
  }

  Expr expr(const Sexpr& s) const {
    if (s.is_atom()) return Expr::value(value(s));
    if (s.is("load")) {
      if (s.items.size() != 2) fail(s, "expected (load f)");
      return Expr::load(symbol(s.items[1]));
    }
    if (s.is("star")) {
      if (s.items.size() != 1) fail(s, "expected (star)");
      return Expr::star();
    }
    if (s.is_list && s.items.size() == 3 && s.items[0].is_atom()) {
      if (auto op = parse_binop(s.items[0].atom)) {
        if (!s.items[1].is_atom() || !s.items[2].is_atom()) fail(s, "binary operands must be values");
        return Expr::binop(*op, value(s.items[1]), value(s.items[2]));
      }
    }
    fail(s, "unknown expression");
  }

  StmtPtr stmt(const Sexpr& s) const {
    if (!s.is_list || s.items.empty() || !s.items[0].is_atom()) fail(s, "expected a statement");
    const auto& head = s.items[0].atom;
    auto arity = [&](std::size_t n) {
      if (s.items.size() != n + 1) fail(s, head + " takes " + std::to_string(n) + " operands");
    };
    auto val_operand = [&](std::size_t i) {
      if (!s.items[i].is_atom()) fail(s, "operand " + std::to_string(i) + " must be a value");
      return value(s.items[i]);
    };
    if (head == "skip") {
      arity(0);
      return skip();
    }
    if (head == "assign") {
      arity(2);
      return assign(symbol(s.items[1]), expr(s.items[2]));
    }
    if (head == "fassign") {
      arity(2);
      return field_assign(symbol(s.items[1]), expr(s.items[2]));
    }
    if (head == "store") {
      arity(2);
      return store(symbol(s.items[1]), expr(s.items[2]));
    }
    if (head == "if") {
      arity(3);
      return if_(val_operand(1), stmt(s.items[2]), stmt(s.items[3]));
    }
    if (head == "seq") {
      std::vector<StmtPtr> parts;
      for (std::size_t i = 1; i < s.items.size(); ++i) parts.push_back(stmt(s.items[i]));
      return seq(parts);
    }
    if (head == "create") {
      arity(2);
      return create(symbol(s.items[1]), symbol(s.items[2]));
    }
    if (head == "send") {
      arity(3);
      return send(val_operand(1), val_operand(2), val_operand(3));
    }
    fail(s, "unknown statement");
  }

  Program program_;
  const ClassDef* current_ = nullptr;
};

void validate_val(const ClassDef& c, const Val& v, const std::string& where) {
  if (v.kind == Val::Kind::kField && !c.is_volatile(v.name)) {
    throw ParseError(c.name + ": " + where + ": persistent field '" + v.name + "' must be read with load");
  }
  if (v.kind == Val::Kind::kVar && !is_special(v.name) && !declared(c.locals, v.name)) {
    throw ParseError(c.name + ": " + where + ": undeclared variable '" + v.name + "'");
  }
}

void validate_expr(const ClassDef& c, const Expr& e, const std::string& where) {
  switch (e.kind) {
    case Expr::Kind::kVal:
      validate_val(c, e.a, where);
      break;
    case Expr::Kind::kLoad:
      if (!c.is_persistent(e.field)) {
        throw ParseError(c.name + ": " + where + ": load of non-persistent '" + e.field + "'");
      }
      break;
    case Expr::Kind::kBinop:
      validate_val(c, e.a, where);
      validate_val(c, e.b, where);
      break;
    case Expr::Kind::kStar:
      break;
  }
}

void validate_stmt(const Program& p, const ClassDef& c, const StmtPtr& s) {
  auto where = to_sexpr(s);
  auto local = [&](const std::string& x) {
    if (!is_special(x) && !declared(c.locals, x)) {
      throw ParseError(c.name + ": " + where + ": undeclared variable '" + x + "'");
    }
  };
  switch (s->kind) {
    case Stmt::Kind::kSkip:
      break;
    case Stmt::Kind::kAssign:
      local(s->name);
      validate_expr(c, s->expr, where);
      break;
    case Stmt::Kind::kFieldAssign:
      if (!c.is_volatile(s->name)) throw ParseError(c.name + ": " + where + ": target must be a volatile field");
      validate_expr(c, s->expr, where);
      break;
    case Stmt::Kind::kStore:
      if (!c.is_persistent(s->name)) throw ParseError(c.name + ": " + where + ": target must be a persistent field");
      validate_expr(c, s->expr, where);
      break;
    case Stmt::Kind::kIf:
      validate_val(c, s->v1, where);
      validate_stmt(p, c, s->s1);
      validate_stmt(p, c, s->s2);
      break;
    case Stmt::Kind::kSeq:
      validate_stmt(p, c, s->s1);
      validate_stmt(p, c, s->s2);
      break;
    case Stmt::Kind::kCreate:
      local(s->target);
      if (!p.find(s->name)) throw ParseError(c.name + ": " + where + ": unknown class '" + s->name + "'");
      break;
    case Stmt::Kind::kSend:
      validate_val(c, s->v1, where);
      validate_val(c, s->v2, where);
      validate_val(c, s->v3, where);
      break;
  }
}

}  // namespace

void validate(const Program& p) {
  std::set<std::string> names;
  for (const auto& c : p.classes) {
    if (!names.insert(c.name).second) throw ParseError("duplicate class '" + c.name + "'");
    std::set<std::string> seen;
    for (const auto* group : {&c.persistent, &c.volatiles, &c.locals}) {
      for (const auto& [n, _] : *group) {
        if (is_special(n)) throw ParseError(c.name + ": '" + n + "' is reserved");
        if (!seen.insert(n).second) throw ParseError(c.name + ": name '" + n + "' declared twice");
      }
    }
    validate_stmt(p, c, c.handler);
  }
  std::set<Value> ids;
  for (const auto& [id, cls] : p.machines) {
    if (id <= kEnvId) throw ParseError("machine ids must be positive: " + std::to_string(id));
    if (!ids.insert(id).second) throw ParseError("duplicate machine id " + std::to_string(id));
    if (!p.find(cls)) throw ParseError("machine " + std::to_string(id) + ": unknown class '" + cls + "'");
  }
  for (const auto& [id, _] : p.inboxes) {
    if (!ids.count(id)) throw ParseError("inbox for unknown machine " + std::to_string(id));
  }
}

Program parse_program(const std::string& text) { return ProgramParser().parse(parse_sexprs(text)); }

Program load_program(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read program file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_program(ss.str());
}

std::string to_sexpr(const Program& p) {
  std::ostringstream out;
  auto decls = [&](const char* head, const std::vector<std::pair<std::string, Value>>& ds) {
    out << "\n    (" << head;
    for (const auto& [n, v] : ds) out << " (" << n << " " << v << ")";
    out << ")";
  };
  out << "(program";
  for (const auto& c : p.classes) {
    out << "\n  (class " << c.name;
    decls("persistent", c.persistent);
    decls("volatile", c.volatiles);
    decls("locals", c.locals);
    out << "\n    (handler " << to_sexpr(c.handler) << "))";
  }
  for (const auto& [id, cls] : p.machines) out << "\n  (machine " << id << " " << cls << ")";
  for (const auto& [id, evs] : p.inboxes) {
    out << "\n  (inbox " << id;
    for (const auto& e : evs) out << " (" << e.source << " " << e.type << " " << e.payload << ")";
    out << ")";
  }
  out << ")\n";
  return out.str();
}

}  // namespace rsm::sem
