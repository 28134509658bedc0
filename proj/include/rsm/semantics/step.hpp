// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "rsm/semantics/config.hpp"

namespace rsm::sem {

/// A premise failed: the configuration has no step under the chosen rule.
class StuckError : public Error {
 public:
  using Error::Error;
};

enum class ExprRule { kNum, kVar, kVolatile, kPersistent, kBinop, kStar };
enum class LocalRule { kAssign, kFieldAssign, kStore, kIf, kSeq, kSeqSkip, kCreate, kSend };
enum class GlobalRule { kStart, kLocal, kCommit, kCreate, kSend, kReset };

const char* to_string(ExprRule r);
const char* to_string(LocalRule r);
const char* to_string(GlobalRule r);
std::optional<GlobalRule> parse_global_rule(const std::string& name);

struct ExprResult {
  Value value = 0;
  ExprRule rule = ExprRule::kNum;
};

/// F; L |- e => n. Unbound names are stuck.
ExprResult eval_expr(const FieldMap& F, const LocalEnv& L, const Expr& e, Oracle& oracle);
Value eval_val(const FieldMap& F, const LocalEnv& L, const Val& v);

struct LocalStep {
  LocalConfig next;  // b is carried over unchanged
  LocalRule rule = LocalRule::kSeq;
};

/// E; F; L; s -> E1; F1; L1; s1. skip has no step.
LocalStep step_local(const Program& program, const LocalConfig& cfg, Oracle& oracle);

/// Applies `rule` for machine `r`, or throws StuckError naming the failed
/// premise. Never partially updates `g`.
GlobalConfig step_global(const Program& program, const GlobalConfig& g, GlobalRule rule, Value r, Oracle& oracle);

/// Premise check only; G-local is reported applicable when s is not skip
/// and the rest of its premises hold (the local step itself may still be
/// stuck).
bool applicable(const Program& program, const GlobalConfig& g, GlobalRule rule, Value r);

}  // namespace rsm::sem
