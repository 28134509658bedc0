// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/semantics/generator.hpp"

#include <random>

namespace rsm::sem {

namespace {

class Generator {
 public:
  Generator(std::uint64_t seed, const GeneratorOptions& options) : rng_(seed), opt_(options) {}

  Program run() {
    Program p;
    int classes = pick(1, opt_.max_classes);
    for (int i = 0; i < classes; ++i) p.classes.push_back(make_class(std::string(1, static_cast<char>('A' + i))));
    int machines = pick(1, opt_.max_machines);
    for (int id = 1; id <= machines; ++id) {
      p.machines.emplace_back(id, id == 1 ? p.classes[0].name : p.classes[pick(0, classes - 1)].name);
    }
    for (auto& c : p.classes) {
      budget_ = pick(2, opt_.max_statements);
      c.handler = block(c, p, machines, 0);
    }
    int events = pick(1, opt_.max_inbox);
    for (int i = 0; i < events; ++i) {
      p.inboxes[1].push_back(InitialEvent{pick(0, machines), pick(0, 3), pick(0, 5)});
    }
    validate(p);
    return p;
  }

 private:
  int pick(int lo, int hi) { return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1)); }

  ClassDef make_class(std::string name) {
    ClassDef c;
    c.name = std::move(name);
    int np = pick(1, 2), nv = pick(0, 2);
    for (int i = 0; i < np; ++i) c.persistent.emplace_back("p" + std::to_string(i), pick(0, 2));
    for (int i = 0; i < nv; ++i) c.volatiles.emplace_back("v" + std::to_string(i), pick(0, 2));
    c.locals = {{"a", 0}, {"b", 0}, {"y", 0}};
    return c;
  }

  // Values that may carry any data: locals, event fields, literals.
  Val data_val() {
    switch (pick(0, 4)) {
      case 0:
        return Val::var("a");
      case 1:
        return Val::var("b");
      case 2:
        return Val::var(kPayloadVar);
      case 3:
        return Val::var(kTypeVar);
      default:
        return Val::number(pick(0, 3));
    }
  }

  std::string local() { return pick(0, 1) ? "a" : "b"; }

  StmtPtr block(const ClassDef& c, const Program& p, int machines, int depth) {
    std::vector<StmtPtr> parts;
    while (budget_ > 0) {
      parts.push_back(statement(c, p, machines, depth));
      if (depth > 0) break;
    }
    return seq(parts);
  }

  StmtPtr statement(const ClassDef& c, const Program& p, int machines, int depth) {
    --budget_;
    int kind = pick(0, 7);
    if (kind == 0 && c.volatiles.empty()) kind = 1;
    if (kind == 5 && (depth > 0 || budget_ < 2)) kind = 6;
    switch (kind) {
      case 0: {
        // f := e over volatile fields, locals and literals.
        auto f = c.volatiles[static_cast<std::size_t>(pick(0, static_cast<int>(c.volatiles.size()) - 1))].first;
        auto other = c.volatiles[static_cast<std::size_t>(pick(0, static_cast<int>(c.volatiles.size()) - 1))].first;
        Val rhs = pick(0, 1) ? Val::field(other) : data_val();
        return field_assign(f, Expr::binop(BinOp::kAdd, Val::field(f), rhs));
      }
      case 1: {
        auto f = c.persistent[static_cast<std::size_t>(pick(0, static_cast<int>(c.persistent.size()) - 1))].first;
        return assign(local(), Expr::load(f));
      }
      case 2:
        return assign(local(), Expr::star());
      case 3: {
        static constexpr BinOp ops[] = {BinOp::kAdd, BinOp::kSub, BinOp::kMul, BinOp::kEq, BinOp::kLt, BinOp::kLe};
        return assign(local(), Expr::binop(ops[pick(0, 5)], data_val(), data_val()));
      }
      case 4: {
        auto f = c.persistent[static_cast<std::size_t>(pick(0, static_cast<int>(c.persistent.size()) - 1))].first;
        return store(f, pick(0, 3) == 0 ? Expr::star() : Expr::value(data_val()));
      }
      case 5: {
        auto s1 = block(c, p, machines, depth + 1);
        auto s2 = budget_ > 0 && pick(0, 1) ? block(c, p, machines, depth + 1) : skip();
        return if_(Val::var(local()), s1, s2);
      }
      case 6:
        return create("y", p.classes[static_cast<std::size_t>(pick(0, static_cast<int>(p.classes.size()) - 1))].name);
      default: {
        Val dest;
        switch (pick(0, 3)) {
          case 0:
            dest = Val::number(pick(0, machines));
            break;
          case 1:
            dest = Val::var(kSourceVar);
            break;
          case 2:
            dest = Val::var("y");
            break;
          default:
            dest = Val::number(kEnvId);
        }
        Val type = pick(0, 1) ? Val::var(kTypeVar) : Val::number(pick(0, 3));
        return send(dest, type, data_val());
      }
    }
  }

  std::mt19937_64 rng_;
  GeneratorOptions opt_;
  int budget_ = 0;
};

}  // namespace

Program generate_program(std::uint64_t seed, const GeneratorOptions& options) {
  return Generator(seed, options).run();
}

}  // namespace rsm::sem
