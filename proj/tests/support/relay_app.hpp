// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// A small program for runtime tests.
//
// Relay machines count pings, remember each tag they saw, and report tags
// to the environment. Forward(dest, tag) makes a relay ping another one.

#include <stdexcept>
#include <string>
#include <utility>

#include "rsm/core/handler_context.hpp"
#include "rsm/core/machine_class.hpp"

namespace relay {

enum : std::uint32_t { kPing = 1, kForward = 2, kHalt = 3, kBoom = 4, kSpawn = 5, kReport = 6, kTouch = 7 };

inline rsm::Bytes forward_payload(const rsm::RsmId& dest, std::uint64_t tag) {
  rsm::Bytes out;
  rsm::Writer w(out);
  rsm::Codec<rsm::RsmId>::encode_to(w, dest);
  w.u64(tag);
  return out;
}

inline std::pair<rsm::RsmId, std::uint64_t> parse_forward(const rsm::Bytes& payload) {
  rsm::Reader r(payload);
  auto dest = rsm::Codec<rsm::RsmId>::decode_from(r);
  return {dest, r.u64()};
}

inline rsm::Program program() {
  using rsm::HandlerContext;
  auto relay = rsm::MachineClass::Builder("Relay")
                   .persistent<std::uint64_t>("count", 0)
                   .persistent_map("seen")
                   .persistent<std::string>("child", "")
                   .volatile_field<std::uint64_t>("since_crash", 0)
                   .state("Run")
                   .state("Stopped")
                   .start("Run")
                   .on("Run", kPing,
                       [](HandlerContext& ctx) {
                         auto tag = ctx.payload<std::uint64_t>();
                         auto n = ctx.load_as<std::uint64_t>("count") + 1;
                         ctx.store_as("count", n);
                         ctx.put_as("seen", tag, n);
                         ctx.set_volatile("since_crash", ctx.volatile_as<std::uint64_t>("since_crash") + 1);
                         ctx.send(rsm::RsmId::environment(), kReport, tag);
                       })
                   .on("Run", kForward,
                       [](HandlerContext& ctx) {
                         auto [dest, tag] = parse_forward(ctx.event().payload());
                         ctx.send(dest, kPing, tag);
                       })
                   .on("Run", kHalt, [](HandlerContext& ctx) { ctx.halt(); })
                   .on("Run", kBoom, [](HandlerContext&) { throw std::runtime_error("boom"); })
                   .on("Run", kSpawn,
                       [](HandlerContext& ctx) {
                         auto child = ctx.create("Relay");
                         ctx.store_as("child", child.to_string());
                         ctx.send(child, kPing, ctx.payload<std::uint64_t>());
                       })
                   .on("Run", kTouch, [](HandlerContext& ctx) { ctx.jump("Stopped"); })
                   .on("Stopped", kTouch, [](HandlerContext& ctx) { ctx.jump("Run"); })
                   .build();
  rsm::Program p;
  p.add(relay);
  return p;
}

}  // namespace relay
