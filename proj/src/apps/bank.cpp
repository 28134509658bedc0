// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/apps/bank.hpp"

#include <random>

#include "rsm/core/handler_context.hpp"

namespace rsm::apps::bank {

Bytes transfer_payload(const RsmId& to, std::int64_t amount) {
  Bytes out;
  Writer w(out);
  Codec<RsmId>::encode_to(w, to);
  w.i64(amount);
  return out;
}

Program program() {
  auto account = MachineClass::Builder("Account")
                     .persistent<std::int64_t>("balance", 0)
                     .persistent<std::uint64_t>("rejected", 0)
                     .state("Active")
                     .start("Active")
                     .on("Active", kOpen,
                         [](HandlerContext& ctx) { ctx.store_as("balance", ctx.payload<std::int64_t>()); })
                     .on("Active", kTransfer,
                         [](HandlerContext& ctx) {
                           Reader r(ctx.event().payload());
                           auto to = Codec<RsmId>::decode_from(r);
                           auto amount = r.i64();
                           auto balance = ctx.load_as<std::int64_t>("balance");
                           if (amount <= 0 || amount > balance) {
                             ctx.store_as("rejected", ctx.load_as<std::uint64_t>("rejected") + 1);
                             return;
                           }
                           ctx.store_as("balance", balance - amount);
                           ctx.send(to, kDeposit, amount);
                         })
                     .on("Active", kDeposit,
                         [](HandlerContext& ctx) {
                           ctx.store_as("balance", ctx.load_as<std::int64_t>("balance") + ctx.payload<std::int64_t>());
                         })
                     .on("Active", kBalance,
                         [](HandlerContext& ctx) {
                           ctx.send(RsmId::environment(), kBalance, ctx.load_as<std::int64_t>("balance"));
                         })
                     .build();
  Program p;
  p.add(account);
  return p;
}

std::int64_t total(runtime::MachineHost& host) {
  std::int64_t sum = 0;
  for (const auto& id : host.machines()) {
    if (host.class_of(id) == "Account") sum += decode<std::int64_t>(host.field(id, "balance"));
  }
  return sum;
}

testkit::Scenario scenario(std::size_t accounts, std::int64_t initial, std::size_t transfers) {
  testkit::Scenario s;
  s.name = "bank";
  s.program = program();
  s.setup = [=](testkit::TestEnv& env) {
    std::vector<RsmId> ids;
    for (std::size_t i = 0; i < accounts; ++i) {
      ids.push_back(env.create("Account"));
      env.send(ids.back(), kOpen, initial);
    }
    std::uniform_int_distribution<std::size_t> pick(0, accounts - 1);
    std::uniform_int_distribution<std::int64_t> amount(1, initial);
    for (std::size_t t = 0; t < transfers; ++t) {
      auto from = pick(env.rng());
      env.send(ids[from], kTransfer, transfer_payload(ids[pick(env.rng())], amount(env.rng())));
    }
  };
  const auto expected = static_cast<std::int64_t>(accounts) * initial;
  s.final_check = [expected](runtime::MachineHost& host) -> std::optional<std::string> {
    auto sum = total(host);
    if (sum != expected) return "money not conserved: " + std::to_string(sum) + " != " + std::to_string(expected);
    return std::nullopt;
  };
  return s;
}

}  // namespace rsm::apps::bank
