// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/apps/poolserver.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "rsm/core/handler_context.hpp"

namespace rsm::apps::poolserver {

namespace {

constexpr std::uint64_t kRmCreating = 0;
constexpr std::uint64_t kRmCreated = 1;
constexpr std::uint64_t kRmDeleting = 2;

Bytes id_payload(const RsmId& a, const RsmId& b) {
  Bytes out;
  Writer w(out);
  Codec<RsmId>::encode_to(w, a);
  Codec<RsmId>::encode_to(w, b);
  return out;
}

Bytes u64s(std::initializer_list<std::uint64_t> values) {
  Bytes out;
  Writer w(out);
  for (auto v : values) w.u64(v);
  return out;
}

std::vector<std::uint64_t> read_u64s(const Bytes& b) {
  std::vector<std::uint64_t> out;
  Reader r(b);
  while (!r.done()) out.push_back(r.u64());
  return out;
}

bool chance(HandlerContext& ctx, double p) {
  constexpr std::uint64_t kScale = 1000000;
  return ctx.random(kScale) < static_cast<std::uint64_t>(p * kScale);
}

// Pool manager helpers. Counters live in persistent registers except in the
// mutants.
class Pm {
 public:
  Pm(HandlerContext& ctx, const Options& o) : ctx_(ctx), o_(o) {}

  std::uint64_t creating() { return ctx_.load_as<std::uint64_t>("CreatingCount"); }
  std::uint64_t created() {
    return o_.volatile_created_count ? ctx_.volatile_as<std::uint64_t>("CreatedCount")
                                     : ctx_.load_as<std::uint64_t>("CreatedCount");
  }
  std::uint64_t deleting() { return ctx_.load_as<std::uint64_t>("DeletingCount"); }
  std::uint64_t goal() { return ctx_.load_as<std::uint64_t>("GoalCount"); }
  bool deleting_pool() { return ctx_.load_as<bool>("GoalDelete"); }

  void add_creating(std::int64_t d) {
    if (o_.drop_creating_count) return;
    ctx_.store_as<std::uint64_t>("CreatingCount", creating() + d);
  }
  void add_created(std::int64_t d) {
    if (o_.volatile_created_count) {
      ctx_.set_volatile<std::uint64_t>("CreatedCount", created() + d);
    } else {
      ctx_.store_as<std::uint64_t>("CreatedCount", created() + d);
    }
  }
  void add_deleting(std::int64_t d) { ctx_.store_as<std::uint64_t>("DeletingCount", deleting() + d); }

  void set_goal(std::uint64_t n, bool del) {
    ctx_.store_as("GoalCount", n);
    ctx_.store_as("GoalDelete", del);
    ctx_.announce("goal", u64s({n, del ? 1u : 0u}));
  }

  void scale_up(std::uint64_t to_create) {
    auto provider = ctx_.load_as<RsmId>("Provider");
    for (std::uint64_t i = 0; i < to_create; ++i) {
      // Start off an RM to allocate a fresh resource.
      auto id = ctx_.create("ResourceManager");
      ctx_.send(id, kCreateResource, id_payload(ctx_.self(), provider));
      ctx_.put_as("ResourceTable", id, kRmCreating);
      add_creating(1);
      ctx_.announce("spawned", encode(id));
    }
    announce_scaled();
  }

  void scale_down(std::uint64_t to_delete) {
    std::vector<std::pair<RsmId, std::uint64_t>> picks;
    auto table = ctx_.entries("ResourceTable");
    for (std::uint64_t want : {kRmCreating, kRmCreated}) {
      for (const auto& [k, v] : table) {
        if (picks.size() == to_delete) break;
        if (decode<std::uint64_t>(v) == want) picks.emplace_back(decode<RsmId>(k), want);
      }
    }
    for (const auto& [id, was] : picks) {
      ctx_.send(id, kDeleteResource, Bytes{});
      ctx_.put_as("ResourceTable", id, kRmDeleting);
      if (was == kRmCreating) {
        add_creating(-1);
      } else {
        add_created(-1);
      }
      add_deleting(1);
    }
    announce_scaled();
  }

  void announce_scaled() {
    ctx_.announce("scaled", u64s({creating(), created(), deleting_pool() ? 0 : goal()}));
  }

  void reconcile() {
    if (deleting_pool()) return;
    auto have = creating() + created();
    if (goal() > have) {
      scale_up(goal() - have);
    } else if (goal() < have) {
      scale_down(have - goal());
    }
  }

  PoolStatus status() {
    return PoolStatus{ctx_.state(), goal(), creating(), created(), deleting(), deleting_pool()};
  }

  void report() {
    auto s = status();
    ctx_.send(RsmId::environment(), kPoolStatus, encode_status(s));
  }

  void check_done() {
    if (deleting_pool()) {
      if (ctx_.entries("ResourceTable").empty()) {
        ctx_.jump("Deleted");
        auto s = status();
        s.state = "Deleted";
        ctx_.send(RsmId::environment(), kPoolStatus, encode_status(s));
        ctx_.halt();
      } else {
        ctx_.jump("Deleting");
      }
      return;
    }
    if (created() == goal() && creating() == 0 && deleting() == 0) {
      if (ctx_.state() != "Created") {
        ctx_.jump("Created");
        auto s = status();
        s.state = "Created";
        ctx_.send(RsmId::environment(), kPoolStatus, encode_status(s));
      }
    } else {
      ctx_.jump("Resizing");
    }
  }

 private:
  HandlerContext& ctx_;
  const Options& o_;
};

}  // namespace

Bytes create_pool_payload(std::uint64_t size, const RsmId& provider) {
  Bytes out;
  Writer w(out);
  w.u64(size);
  Codec<RsmId>::encode_to(w, provider);
  return out;
}

Bytes encode_status(const PoolStatus& s) {
  Bytes out;
  Writer w(out);
  w.str(s.state);
  w.u64(s.goal);
  w.u64(s.creating);
  w.u64(s.created);
  w.u64(s.deleting);
  w.u8(s.deleting_pool ? 1 : 0);
  return out;
}

PoolStatus decode_status(const Bytes& b) {
  Reader r(b);
  PoolStatus s;
  s.state = r.str();
  s.goal = r.u64();
  s.creating = r.u64();
  s.created = r.u64();
  s.deleting = r.u64();
  s.deleting_pool = r.u8() != 0;
  return s;
}

Program program(const Options& options) {
  const auto o = std::make_shared<Options>(options);

  auto pm = MachineClass::Builder("PoolManager");
  pm.persistent<std::uint64_t>("CreatingCount", 0)
      .persistent<std::uint64_t>("DeletingCount", 0)
      .persistent<std::uint64_t>("GoalCount", 0)
      .persistent<bool>("GoalDelete", false)
      .persistent("Provider", RsmId{})
      .persistent_map("ResourceTable");
  if (options.volatile_created_count) {
    pm.volatile_field<std::uint64_t>("CreatedCount", 0);
  } else {
    pm.persistent<std::uint64_t>("CreatedCount", 0);
  }
  for (const char* s : {"Creating", "Resizing", "Created", "Deleting", "Deleted"}) pm.state(s);
  pm.start("Creating");
  pm.on("Creating", kCreatePool, [o](HandlerContext& ctx) {
    Pm p(ctx, *o);
    Reader r(ctx.event().payload());
    auto size = r.u64();
    ctx.store_as("Provider", Codec<RsmId>::decode_from(r));
    p.set_goal(size, false);
    p.reconcile();
    p.check_done();
  });
  for (const char* s : {"Resizing", "Created"}) {
    pm.on(s, kResizePool, [o](HandlerContext& ctx) {
      Pm p(ctx, *o);
      p.set_goal(ctx.payload<std::uint64_t>(), false);
      p.reconcile();
      p.check_done();
    });
  }
  for (const char* s : {"Resizing", "Created"}) {
    pm.on(s, kDeletePool, [o](HandlerContext& ctx) {
      Pm p(ctx, *o);
      p.set_goal(0, true);
      p.scale_down(p.creating() + p.created());
      p.check_done();
    });
  }
  pm.on("Creating", kDeletePool, [o](HandlerContext& ctx) {
    Pm p(ctx, *o);
    p.set_goal(0, true);
    p.check_done();
  });
  // Deletion wins over later resizes.
  pm.on("Deleting", kResizePool, [](HandlerContext&) {});
  pm.on("Deleting", kDeletePool, [](HandlerContext&) {});
  for (const char* s : {"Creating", "Resizing", "Created", "Deleting"}) {
    pm.on(s, kGetPool, [o](HandlerContext& ctx) { Pm(ctx, *o).report(); });
  }
  for (const char* s : {"Resizing", "Created", "Deleting"}) {
    pm.on(s, kResourceCreated, [o](HandlerContext& ctx) {
      Pm p(ctx, *o);
      auto rm = ctx.event().source();
      auto st = ctx.lookup_as<std::uint64_t>("ResourceTable", rm);
      if (st && *st == kRmCreating) {
        p.add_creating(-1);
        p.add_created(1);
        ctx.put_as("ResourceTable", rm, kRmCreated);
      }
      p.check_done();
    });
    pm.on(s, kResourceDeleted, [o](HandlerContext& ctx) {
      Pm p(ctx, *o);
      auto rm = ctx.event().source();
      auto st = ctx.lookup_as<std::uint64_t>("ResourceTable", rm);
      if (st) {
        ctx.remove_as("ResourceTable", rm);
        if (*st == kRmDeleting) {
          p.add_deleting(-1);
        } else if (*st == kRmCreated) {
          // The resource went unhealthy; replace it.
          p.add_created(-1);
        } else {
          p.add_creating(-1);
        }
      }
      p.reconcile();
      p.check_done();
    });
  }

  auto rm = MachineClass::Builder("ResourceManager");
  rm.persistent("PoolManagerMachineId", RsmId{})
      .persistent("Provider", RsmId{})
      .persistent<bool>("GoalDelete", false)
      .persistent<std::uint64_t>("ResourceId", 0)
      .persistent<std::uint64_t>("Probes", 0);
  for (const char* s : {"Creating", "Created", "Deleting", "Deleted"}) rm.state(s);
  rm.start("Creating");
  auto finish = [](HandlerContext& ctx) {
    ctx.jump("Deleted");
    ctx.send(ctx.load_as<RsmId>("PoolManagerMachineId"), kResourceDeleted, Bytes{});
    ctx.halt();
  };
  auto release = [](HandlerContext& ctx) {
    ctx.jump("Deleting");
    ctx.send(ctx.load_as<RsmId>("Provider"), kDeallocate, encode(ctx.load_as<std::uint64_t>("ResourceId")));
  };
  rm.on("Creating", kCreateResource, [](HandlerContext& ctx) {
    Reader r(ctx.event().payload());
    ctx.store_as("PoolManagerMachineId", Codec<RsmId>::decode_from(r));
    auto provider = Codec<RsmId>::decode_from(r);
    ctx.store_as("Provider", provider);
    ctx.send(provider, kAllocate, Bytes{});
  });
  rm.on("Creating", kAllocated, [o, release](HandlerContext& ctx) {
    ctx.store_as("ResourceId", ctx.payload<std::uint64_t>());
    if (ctx.load_as<bool>("GoalDelete")) {
      release(ctx);
      return;
    }
    ctx.jump("Created");
    ctx.announce("up");
    ctx.send(ctx.load_as<RsmId>("PoolManagerMachineId"), kResourceCreated, Bytes{});
    if (o->health_probes > 0) {
      ctx.store_as<std::uint64_t>("Probes", 1);
      ctx.send(ctx.load_as<RsmId>("Provider"), kCheckHealth, ctx.event().payload());
    }
  });
  rm.on("Creating", kAllocateFailed, [finish](HandlerContext& ctx) {
    if (ctx.load_as<bool>("GoalDelete")) {
      finish(ctx);
    } else {
      ctx.send(ctx.load_as<RsmId>("Provider"), kAllocate, Bytes{});
    }
  });
  rm.on("Creating", kDeleteResource, [](HandlerContext& ctx) { ctx.store_as("GoalDelete", true); });
  rm.on("Created", kHealth, [o, release](HandlerContext& ctx) {
    Reader r(ctx.event().payload());
    auto res = r.u64();
    bool healthy = r.u8() != 0;
    if (res != ctx.load_as<std::uint64_t>("ResourceId")) return;
    if (!healthy) {
      ctx.announce("down");
      release(ctx);
      return;
    }
    auto probes = ctx.load_as<std::uint64_t>("Probes");
    if (probes < o->health_probes) {
      ctx.store_as("Probes", probes + 1);
      ctx.send(ctx.load_as<RsmId>("Provider"), kCheckHealth, encode(res));
    }
  });
  rm.on("Created", kDeleteResource, [release](HandlerContext& ctx) {
    ctx.store_as("GoalDelete", true);
    ctx.announce("down");
    release(ctx);
  });
  rm.on("Deleting", kDeallocated, [finish](HandlerContext& ctx) {
    ctx.store_as<std::uint64_t>("ResourceId", 0);
    finish(ctx);
  });
  rm.on("Deleting", kDeallocateFailed, [](HandlerContext& ctx) {
    ctx.send(ctx.load_as<RsmId>("Provider"), kDeallocate, ctx.event().payload());
  });
  rm.on("Deleting", kHealth, [](HandlerContext&) {});
  rm.on("Deleting", kDeleteResource, [](HandlerContext& ctx) { ctx.store_as("GoalDelete", true); });

  auto provider = MachineClass::Builder("ResourceProvider")
                      .persistent_map("allocated")
                      .persistent<std::uint64_t>("NextId", 1)
                      .state("Serving")
                      .start("Serving")
                      .external()
                      .on("Serving", kAllocate,
                          [o](HandlerContext& ctx) {
                            auto who = ctx.event().source();
                            if (chance(ctx, o->fail_probability)) {
                              ctx.send(who, kAllocateFailed, Bytes{});
                              return;
                            }
                            auto id = ctx.load_as<std::uint64_t>("NextId");
                            ctx.store_as("NextId", id + 1);
                            ctx.put_as("allocated", id, who);
                            ctx.send(who, kAllocated, id);
                          })
                      .on("Serving", kDeallocate,
                          [o](HandlerContext& ctx) {
                            auto who = ctx.event().source();
                            if (chance(ctx, o->fail_probability)) {
                              ctx.send(who, kDeallocateFailed, ctx.event().payload());
                              return;
                            }
                            ctx.remove_as("allocated", ctx.payload<std::uint64_t>());
                            ctx.send(who, kDeallocated, ctx.event().payload());
                          })
                      .on("Serving", kCheckHealth,
                          [o](HandlerContext& ctx) {
                            Bytes out = ctx.event().payload();
                            Writer w(out);
                            w.u8(chance(ctx, o->unhealthy_probability) ? 0 : 1);
                            ctx.send(ctx.event().source(), kHealth, std::move(out));
                          })
                      .build();

  Program p;
  p.add(pm.build());
  p.add(rm.build());
  p.add(provider);
  return p;
}

namespace {

class Property1 : public testkit::Monitor {
 public:
  Property1() : Monitor("property1", Kind::kSafety) {}
  void observe(const runtime::HandledEvent& e) override {
    for (const auto& a : e.announcements) {
      if (a.topic != "scaled") continue;
      auto v = read_u64s(a.payload);
      if (v[0] + v[1] != v[2]) {
        fail("after ScaleUp/ScaleDown at " + e.machine.to_string() + ": creating " + std::to_string(v[0]) +
             " + created " + std::to_string(v[1]) + " != desired " + std::to_string(v[2]));
      }
    }
  }
};

class Property2 : public testkit::Monitor {
 public:
  Property2() : Monitor("property2", Kind::kLiveness) {}
  void observe(const runtime::HandledEvent& e) override {
    for (const auto& a : e.announcements) {
      if (a.topic == "goal") {
        auto v = read_u64s(a.payload);
        goal_ = v[0];
        deleting_ = v[1] != 0;
      } else if (a.topic == "up") {
        ++up_;
      } else if (a.topic == "down") {
        --up_;
      }
    }
    if (e.machine_class == "PoolManager") pm_state_ = e.state_after;
  }
  bool hot() const override {
    if (deleting_) return false;
    return !goal_ || pm_state_ != "Created" || up_ != static_cast<std::int64_t>(*goal_);
  }
  std::string describe() const override {
    return "pool manager in " + pm_state_ + " with " + std::to_string(up_) + " healthy resources, goal " +
           (goal_ ? std::to_string(*goal_) : std::string("unset"));
  }

 private:
  std::optional<std::uint64_t> goal_;
  bool deleting_ = false;
  std::int64_t up_ = 0;
  std::string pm_state_;
};

class Property3 : public testkit::Monitor {
 public:
  Property3() : Monitor("property3", Kind::kLiveness) {}
  void observe(const runtime::HandledEvent& e) override {
    for (const auto& a : e.announcements) {
      if (a.topic == "goal" && read_u64s(a.payload)[1] != 0) delete_requested_ = true;
      if (a.topic == "spawned") live_.insert(decode<RsmId>(a.payload));
    }
    if (e.halted) {
      if (e.machine_class == "PoolManager") pm_halted_ = true;
      live_.erase(e.machine);
    }
  }
  bool hot() const override { return delete_requested_ && (!pm_halted_ || !live_.empty()); }
  std::string describe() const override {
    return std::to_string(live_.size()) + " resource managers still alive after DeletePool" +
           (pm_halted_ ? "" : ", pool manager not deleted");
  }

 private:
  bool delete_requested_ = false;
  bool pm_halted_ = false;
  std::set<RsmId> live_;
};

}  // namespace

testkit::MonitorFactory property1() {
  return [] { return std::make_unique<Property1>(); };
}
testkit::MonitorFactory property2() {
  return [] { return std::make_unique<Property2>(); };
}
testkit::MonitorFactory property3() {
  return [] { return std::make_unique<Property3>(); };
}

std::optional<std::string> garbage_check(runtime::MachineHost& host) {
  std::map<std::uint64_t, RsmId> owners;
  for (const auto& id : host.machines()) {
    if (host.class_of(id) != "ResourceProvider") continue;
    for (const auto& [k, v] : host.map_entries(id, "allocated")) owners[decode<std::uint64_t>(k)] = decode<RsmId>(v);
  }
  for (const auto& [res, rm] : owners) {
    if (!host.hosts(rm)) return "resource " + std::to_string(res) + " is held by halted " + rm.to_string();
    auto held = decode<std::uint64_t>(host.field(rm, "ResourceId"));
    if (held != res) {
      return "resource " + std::to_string(res) + " is allocated to " + rm.to_string() + " which holds " +
             std::to_string(held);
    }
  }
  for (const auto& id : host.machines()) {
    if (host.class_of(id) != "ResourceManager" || !host.hosts(id)) continue;
    auto held = decode<std::uint64_t>(host.field(id, "ResourceId"));
    if (held != 0 && !owners.count(held)) {
      return id.to_string() + " holds resource " + std::to_string(held) + " unknown to the provider";
    }
  }
  return std::nullopt;
}

testkit::Scenario scenario(const std::vector<ClientOp>& ops, const Options& options,
                           std::vector<testkit::MonitorFactory> monitors) {
  testkit::Scenario s;
  s.name = "poolserver";
  s.program = program(options);
  s.setup = [ops](testkit::TestEnv& env) {
    auto provider = env.create("ResourceProvider");
    auto pm = env.create("PoolManager");
    for (const auto& op : ops) {
      switch (op.kind) {
        case ClientOp::kCreate:
          env.send(pm, kCreatePool, create_pool_payload(op.size, provider));
          break;
        case ClientOp::kResize:
          env.send(pm, kResizePool, op.size);
          break;
        case ClientOp::kDelete:
          env.send(pm, kDeletePool, Bytes{});
          break;
      }
    }
  };
  if (monitors.empty()) {
    monitors.push_back(property1());
    bool deletes = std::any_of(ops.begin(), ops.end(), [](const ClientOp& op) { return op.kind == ClientOp::kDelete; });
    monitors.push_back(deletes ? property3() : property2());
  }
  s.monitors = std::move(monitors);
  s.final_check = garbage_check;
  return s;
}

}  // namespace rsm::apps::poolserver
