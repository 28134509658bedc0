// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsm/core/errors.hpp"

namespace rsm::sem {

using Value = std::int64_t;

class ParseError : public Error {
 public:
  using Error::Error;
};

/// n | x | f
struct Val {
  enum class Kind { kNum, kVar, kField };
  Kind kind = Kind::kNum;
  Value num = 0;
  std::string name;

  static Val number(Value n) { return {Kind::kNum, n, {}}; }
  static Val var(std::string x) { return {Kind::kVar, 0, std::move(x)}; }
  static Val field(std::string f) { return {Kind::kField, 0, std::move(f)}; }
  bool operator==(const Val&) const = default;
};

enum class BinOp { kAdd, kSub, kMul, kEq, kNe, kLt, kLe };

const char* to_string(BinOp op);
std::optional<BinOp> parse_binop(const std::string& text);
/// Wrapping 64-bit arithmetic; comparisons yield 1 or 0.
Value apply_binop(BinOp op, Value a, Value b);

/// v | load f | v1 (+) v2 | star
struct Expr {
  enum class Kind { kVal, kLoad, kBinop, kStar };
  Kind kind = Kind::kVal;
  Val a;
  Val b;
  BinOp op = BinOp::kAdd;
  std::string field;

  static Expr value(Val v) { return {Kind::kVal, std::move(v), {}, BinOp::kAdd, {}}; }
  static Expr load(std::string f) { return {Kind::kLoad, {}, {}, BinOp::kAdd, std::move(f)}; }
  static Expr binop(BinOp op, Val a, Val b) { return {Kind::kBinop, std::move(a), std::move(b), op, {}}; }
  static Expr star() { return {Kind::kStar, {}, {}, BinOp::kAdd, {}}; }
  bool operator==(const Expr&) const = default;
};

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

/// x := e | f := e | store f e | if v s1 s2 | s1; s2 | create x C
/// | send v1 v2 v3 | skip
struct Stmt {
  enum class Kind { kSkip, kAssign, kFieldAssign, kStore, kIf, kSeq, kCreate, kSend };
  Kind kind = Kind::kSkip;
  std::string name;  // x, f, or the created class
  std::string target;  // create: the variable bound to the new id
  Expr expr;
  Val v1, v2, v3;
  StmtPtr s1, s2;
};

StmtPtr skip();
StmtPtr assign(std::string x, Expr e);
StmtPtr field_assign(std::string f, Expr e);
StmtPtr store(std::string f, Expr e);
StmtPtr if_(Val v, StmtPtr s1, StmtPtr s2);
StmtPtr seq(StmtPtr s1, StmtPtr s2);
/// Right-nested sequence; a single element is returned as is, none is skip.
StmtPtr seq(const std::vector<StmtPtr>& parts);
StmtPtr create(std::string x, std::string cls);
StmtPtr send(Val dest, Val type, Val payload);

bool equal(const StmtPtr& a, const StmtPtr& b);
/// Number of statements other than seq and skip.
std::size_t statement_count(const StmtPtr& s);

std::string to_sexpr(const Val& v);
std::string to_sexpr(const Expr& e);
std::string to_sexpr(const StmtPtr& s);

/// Names of the locals bound from the event being handled.
inline constexpr const char* kSourceVar = "x_s";
inline constexpr const char* kTypeVar = "x_e";
inline constexpr const char* kPayloadVar = "x_p";

/// The environment's machine id.
inline constexpr Value kEnvId = 0;

struct ClassDef {
  std::string name;
  std::vector<std::pair<std::string, Value>> persistent;
  std::vector<std::pair<std::string, Value>> volatiles;
  std::vector<std::pair<std::string, Value>> locals;
  StmtPtr handler = skip();

  bool is_persistent(const std::string& f) const;
  bool is_volatile(const std::string& f) const;
};

/// An input event as written in a program's initial inbox.
struct InitialEvent {
  Value source = kEnvId;
  Value type = 0;
  Value payload = 0;
};

struct Program {
  std::vector<ClassDef> classes;
  /// Machines present at the start, with their classes.
  std::vector<std::pair<Value, std::string>> machines;
  /// Per machine, events in arrival order (oldest first).
  std::map<Value, std::vector<InitialEvent>> inboxes;

  const ClassDef& at(const std::string& name) const;
  const ClassDef* find(const std::string& name) const;
  /// Class codes are negative event types: the i-th class has code -(i+1).
  Value class_code(const std::string& name) const;
  const ClassDef* class_of_code(Value code) const;
  bool is_class_code(Value type) const;
  /// One past the largest initial machine id.
  Value first_fresh_id() const;
};

/// Parses the s-expression program format and checks it is well formed:
/// A-normal form, declared names, volatile fields used only as values and
/// assignment targets, persistent fields only through load/store.
Program parse_program(const std::string& text);
Program load_program(const std::string& path);
std::string to_sexpr(const Program& program);

/// Throws ParseError naming the first ill-formed construct.
void validate(const Program& program);

}  // namespace rsm::sem
