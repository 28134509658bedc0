// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <map>
#include <random>
#include <thread>
#include <set>

#include "doctest.h"
#include "relay_app.hpp"
#include "rsm/runtime/config.hpp"
#include "rsm/runtime/host.hpp"
#include "rsm/runtime/sim_cluster.hpp"
#include "rsm/runtime/threaded_runner.hpp"

using namespace rsm;
using namespace rsm::runtime;
namespace fs = std::filesystem;

namespace {

struct Recorder : net::Transport {
  struct Sent {
    std::string from, to;
    Bytes data;
  };
  std::vector<Sent> sent;
  std::map<std::string, net::PacketHandler> handlers;
  void attach(const std::string& e, net::PacketHandler h) override { handlers[e] = std::move(h); }
  void detach(const std::string& e) override { handlers.erase(e); }
  void send(const std::string& from, const std::string& to, Bytes p) override { sent.push_back({from, to, std::move(p)}); }
  std::vector<net::Frame> frames_to(const std::string& to) const {
    std::vector<net::Frame> out;
    for (const auto& s : sent) {
      if (s.to != to) continue;
      for (auto& f : net::decode_packet(s.data)) out.push_back(f);
    }
    return out;
  }
};

HostConfig local_config() {
  HostConfig c;
  c.partition = "p0";
  c.local_delivery = true;
  c.fsync = storage::FsyncPolicy::kNever;
  return c;
}

// Runs a single host with local delivery until nothing moves.
void settle(MachineHost& h, int limit = 100000) {
  for (int i = 0; i < limit; ++i) {
    bool moved = false;
    for (const auto& id : h.machines()) moved |= h.handle_step(id);
    for (const auto& s : h.senders()) moved |= h.drain_step(s);
    if (!moved) return;
  }
  FAIL("host did not settle");
}

std::uint64_t u64(const Bytes& b) { return decode<std::uint64_t>(b); }

// Creates a Relay on `h` and delivers the creation.
RsmId make_relay(MachineHost& h) {
  auto id = h.create_machine("Relay");
  settle(h);
  REQUIRE(h.hosts(id));
  return id;
}

Bytes message_packet(const RsmId& sender, std::uint64_t seq, const RsmId& dest, std::uint32_t type, Bytes payload) {
  return net::encode_frame(net::Frame{net::FrameKind::kMessage, sender, seq, dest, type, std::move(payload)});
}

struct Crash {};

}  // namespace

TEST_CASE("config parses, prints and validates") {
  auto c = HostConfig::parse(
      "# host\npartition = p1\nstore = /tmp/x.log\npartitions = p0, p1\nbatch_size = 4\n"
      "shared_queues = false\npersistent_inbox = false\nfsync = batched\nseed = 9\naddress.p0 = 127.0.0.1:7000\n");
  CHECK(c.partition == "p1");
  CHECK(c.store_path == "/tmp/x.log");
  CHECK(c.partitions == std::vector<std::string>{"p0", "p1"});
  CHECK(c.batch_size == 4);
  CHECK_FALSE(c.shared_queues);
  CHECK_FALSE(c.persistent_inbox);
  CHECK(c.fsync == storage::FsyncPolicy::kBatched);
  CHECK(c.seed == 9);
  CHECK(c.addresses.at("p0") == "127.0.0.1:7000");
  auto again = HostConfig::parse(c.to_string());
  CHECK(again.to_string() == c.to_string());
  CHECK_THROWS_AS(HostConfig::parse("batch_size = 0\n").validate(), UsageError);
  CHECK_THROWS_AS(HostConfig::parse("batch_size = 2000\n").validate(), UsageError);
  CHECK_THROWS(HostConfig::parse("bogus = 1\n"));
  CHECK(HostConfig{}.placement_targets() == std::vector<std::string>{"p0"});
}

TEST_CASE("fresh store gives an empty host") {
  MachineHost h(local_config(), storage::Store::in_memory(), relay::program(), nullptr);
  CHECK(h.machines().empty());
  CHECK(h.idle());
}

TEST_CASE("handler effects commit together") {
  auto prog = relay::program();
  MachineHost h(local_config(), storage::Store::in_memory(), prog, nullptr);
  auto id = make_relay(h);
  h.env_send(id, relay::kPing, encode<std::uint64_t>(5));
  // Move the env message into the inbox without running the handler.
  while (h.drain_step(h.env_client())) {
  }
  REQUIRE(h.inbox_size(id) == 1);
  CHECK(h.handle_step(id));
  CHECK(h.inbox_size(id) == 0);
  REQUIRE(h.outbox_size(id) == 1);
  CHECK(h.outbox(id)[0].dest == RsmId::environment());
  CHECK(u64(h.field(id, "count")) == 1);
  CHECK(h.map_entry(id, "seen", encode<std::uint64_t>(5)).has_value());
}

TEST_CASE("crash before commit leaves inbox, outbox and fields untouched") {
  auto prog = relay::program();
  auto store = storage::Store::in_memory();
  auto h = std::make_unique<MachineHost>(local_config(), store, prog, nullptr);
  auto id = make_relay(*h);
  h->env_send(id, relay::kPing, encode<std::uint64_t>(1));
  while (h->drain_step(h->env_client())) {
  }
  h->set_commit_hook([](CommitPoint& p) -> CommitDecision {
    if (p.kind == CommitKind::kHandler) throw Crash{};
    return CommitDecision::kCommit;
  });
  CHECK_THROWS_AS(h->handle_step(id), Crash);
  h.reset();
  MachineHost again(local_config(), store, prog, nullptr);
  CHECK(again.inbox_size(id) == 1);
  CHECK(again.outbox_size(id) == 0);
  CHECK(u64(again.field(id, "count")) == 0);
  // The event is still at the head and is processed once.
  settle(again);
  CHECK(u64(again.field(id, "count")) == 1);
}

TEST_CASE("a batch commits as one transaction in order") {
  auto prog = relay::program();
  auto cfg = local_config();
  cfg.batch_size = 3;
  MachineHost h(cfg, storage::Store::in_memory(), prog, nullptr);
  auto id = make_relay(h);
  for (std::uint64_t t : {10, 11, 12}) h.env_send(id, relay::kPing, encode(t));
  while (h.drain_step(h.env_client())) {
  }
  REQUIRE(h.inbox_size(id) == 3);
  int commits = 0;
  h.set_commit_hook([&](CommitPoint& p) {
    if (p.kind == CommitKind::kHandler) {
      ++commits;
      CHECK(p.events->size() == 3);
    }
    return CommitDecision::kCommit;
  });
  CHECK(h.handle_step(id));
  CHECK(commits == 1);
  auto out = h.outbox(id);
  REQUIRE(out.size() == 3);
  for (std::uint64_t i = 0; i < 3; ++i) CHECK(decode<std::uint64_t>(out[i].payload) == 10 + i);
  CHECK(u64(*h.map_entry(id, "seen", encode<std::uint64_t>(12))) == 3);
}

TEST_CASE("state register survives restarts and drives dispatch") {
  auto prog = relay::program();
  auto store = storage::Store::in_memory();
  RsmId id;
  {
    MachineHost h(local_config(), store, prog, nullptr);
    id = make_relay(h);
    h.env_send(id, relay::kTouch, {});
    settle(h);
    CHECK(h.current_state(id) == "Stopped");
  }
  MachineHost h(local_config(), store, prog, nullptr);
  CHECK(h.current_state(id) == "Stopped");
  // Ping has no handler in Stopped: dead-lettered.
  h.env_send(id, relay::kPing, encode<std::uint64_t>(1));
  settle(h);
  CHECK(h.dead_letters().size() == 1);
  CHECK(u64(h.field(id, "count")) == 0);
}

TEST_CASE("recovery rehydrates the same machines and states") {
  auto prog = relay::program();
  auto path = fs::temp_directory_path() / "rsm_runtime_recover.log";
  fs::remove(path);
  std::map<RsmId, std::pair<std::string, std::uint64_t>> before;
  {
    auto cfg = local_config();
    MachineHost h(cfg, storage::Store::open(path), prog, nullptr);
    for (int i = 0; i < 3; ++i) {
      auto id = make_relay(h);
      for (int k = 0; k <= i; ++k) h.env_send(id, relay::kPing, encode<std::uint64_t>(k));
      if (i == 1) h.env_send(id, relay::kTouch, {});
    }
    settle(h);
    for (const auto& id : h.machines()) before[id] = {h.current_state(id), u64(h.field(id, "count"))};
  }
  MachineHost h(local_config(), storage::Store::open(path), prog, nullptr);
  std::map<RsmId, std::pair<std::string, std::uint64_t>> after;
  for (const auto& id : h.machines()) after[id] = {h.current_state(id), u64(h.field(id, "count"))};
  CHECK(before.size() == 3);
  CHECK(after == before);
  // New ids never collide with recovered ones.
  auto fresh = h.create_machine("Relay");
  CHECK_FALSE(before.count(fresh));
}

TEST_CASE("creation records are idempotent and acked") {
  Recorder net;
  auto prog = relay::program();
  auto cfg = local_config();
  cfg.local_delivery = false;
  MachineHost h(cfg, storage::Store::in_memory(), prog, &net);
  RsmId target{"p0", 77};
  RsmId creator{"p1", 5};
  auto create = message_packet(creator, 0, target, kCreateEventType, to_bytes("Relay"));
  h.on_packet("p1", create);
  h.on_packet("p1", create);
  CHECK(h.machines().size() == 1);
  CHECK(h.hosts(target));
  CHECK(h.stats().created == 1);
  auto acks = net.frames_to("p1");
  REQUIRE(acks.size() == 2);
  CHECK(acks[0].kind == net::FrameKind::kAck);
  CHECK(u64(h.field(target, "count")) == 0);
  // Unknown class: dead-lettered, acked, no machine.
  h.on_packet("p1", message_packet(creator, 0, RsmId{"p0", 78}, kCreateEventType, to_bytes("Nope")));
  CHECK_FALSE(h.hosts(RsmId{"p0", 78}));
  CHECK(h.dead_letters().size() == 1);
}

TEST_CASE("ingest accepts the next sequence number only") {
  Recorder net;
  auto prog = relay::program();
  auto cfg = local_config();
  cfg.local_delivery = false;
  MachineHost h(cfg, storage::Store::in_memory(), prog, &net);
  RsmId target{"p0", 1}, peer{"p1", 9};
  h.on_packet("p1", message_packet(peer, 0, target, kCreateEventType, to_bytes("Relay")));
  net.sent.clear();

  auto m0 = message_packet(peer, 0, target, relay::kPing, encode<std::uint64_t>(100));
  auto m1 = message_packet(peer, 1, target, relay::kPing, encode<std::uint64_t>(101));
  h.on_packet("p1", m1);  // ahead of sequence: dropped, not acked
  CHECK(h.inbox_size(target) == 0);
  CHECK(net.sent.empty());
  h.on_packet("p1", m0);
  h.on_packet("p1", m0);  // duplicate: dropped, acked
  CHECK(h.inbox_size(target) == 1);
  CHECK(h.receive_counter(target, peer) == 1);
  CHECK(net.frames_to("p1").size() == 2);
  h.on_packet("p1", m1);
  CHECK(h.inbox_size(target) == 2);
  CHECK(h.stats().duplicates == 1);
  CHECK(h.stats().out_of_order == 1);
  auto inbox = h.inbox(target);
  CHECK(decode<std::uint64_t>(inbox[0].payload()) == 100);
  CHECK(decode<std::uint64_t>(inbox[1].payload()) == 101);
  // Garbage never reaches the machine.
  h.on_packet("p1", to_bytes("garbage"));
  CHECK(h.stats().malformed == 1);
}

TEST_CASE("a packet of frames for one machine is ingested in one commit") {
  Recorder net;
  auto prog = relay::program();
  auto cfg = local_config();
  cfg.local_delivery = false;
  auto store = storage::Store::in_memory();
  MachineHost h(cfg, store, prog, &net);
  RsmId target{"p0", 1}, peer{"p1", 9};
  h.on_packet("p1", message_packet(peer, 0, target, kCreateEventType, to_bytes("Relay")));
  h.on_packet("p1", message_packet(peer, 0, target, relay::kPing, encode<std::uint64_t>(100)));
  net.sent.clear();

  // Sequence numbers 0..4 where 0 is already in: 1 and 2 are taken, the
  // second 2 is a duplicate and 4 is ahead once 3 is missing.
  Bytes packet;
  for (std::uint64_t seq : {0, 1, 2, 2, 4}) {
    net::append_frame(packet,
                      net::Frame{net::FrameKind::kMessage, peer, seq, target, relay::kPing, encode<std::uint64_t>(100 + seq)});
  }
  auto before = store->stats().commits;
  h.on_packet("p1", packet);
  CHECK(store->stats().commits == before + 1);
  CHECK(h.receive_counter(target, peer) == 3);
  auto inbox = h.inbox(target);
  REQUIRE(inbox.size() == 3);
  CHECK(decode<std::uint64_t>(inbox[1].payload()) == 101);
  CHECK(decode<std::uint64_t>(inbox[2].payload()) == 102);
  // Acks for 0, 1, 2, 2 travel in one packet; 4 gets none.
  REQUIRE(net.sent.size() == 1);
  std::vector<std::uint64_t> acked;
  for (const auto& f : net.frames_to("p1")) {
    CHECK(f.kind == net::FrameKind::kAck);
    acked.push_back(f.seq);
  }
  CHECK(acked == std::vector<std::uint64_t>{0, 1, 2, 2});
  CHECK(h.stats().out_of_order == 1);
}

TEST_CASE("drain retransmits until acked and commits after the ack") {
  Recorder net;
  net::Millis now{0};
  auto prog = relay::program();
  auto cfg = local_config();
  cfg.local_delivery = false;
  cfg.partitions = {"p0", "p1"};
  MachineHost h(cfg, storage::Store::in_memory(), prog, &net, [&] { return now; });
  RsmId dest{"p1", 3};
  h.env_send(dest, relay::kPing, encode<std::uint64_t>(1));
  CHECK(h.drain_step(h.env_client()));
  CHECK(h.drain_pending(h.env_client()));
  CHECK(net.sent.size() == 1);
  CHECK_FALSE(h.drain_step(h.env_client()));
  now += net::Millis(60);
  h.tick();
  CHECK(net.sent.size() == 2);
  now += net::Millis(60);
  h.tick();
  CHECK(net.sent.size() == 2);  // backoff doubled to 100ms
  now += net::Millis(60);
  h.tick();
  CHECK(net.sent.size() == 3);
  auto frames = net.frames_to("p1");
  CHECK(frames[0] == frames[2]);
  CHECK(frames[0].seq == 0);
  // Outbox holds the record until the drain commits.
  CHECK(h.outbox_size(h.env_client()) == 1);
  h.on_packet("p1", net::encode_frame(frames[0].ack()));
  CHECK(h.drain_step(h.env_client()));
  CHECK(h.outbox_size(h.env_client()) == 0);
  CHECK(h.send_counter(h.env_client(), dest) == 1);
}

TEST_CASE("crash after ack but before drain commit resends the same sequence") {
  Recorder net;
  auto prog = relay::program();
  auto store = storage::Store::in_memory();
  auto cfg = local_config();
  cfg.local_delivery = false;
  cfg.partitions = {"p0", "p1"};
  RsmId dest{"p1", 3};
  net::Frame first;
  {
    MachineHost h(cfg, store, prog, &net);
    h.env_send(dest, relay::kPing, encode<std::uint64_t>(1));
    h.drain_step(h.env_client());
    first = net.frames_to("p1").at(0);
    h.on_packet("p1", net::encode_frame(first.ack()));
    h.set_commit_hook([](CommitPoint& p) -> CommitDecision {
      if (p.kind == CommitKind::kDrain) throw Crash{};
      return CommitDecision::kCommit;
    });
    CHECK_THROWS_AS(h.drain_step(h.env_client()), Crash);
  }
  net.sent.clear();
  MachineHost h(cfg, store, prog, &net);
  h.drain_step(h.env_client());
  auto again = net.frames_to("p1");
  REQUIRE(again.size() == 1);
  CHECK(again[0] == first);
}

TEST_CASE("halted machines drop later events and cannot be recreated") {
  auto prog = relay::program();
  MachineHost h(local_config(), storage::Store::in_memory(), prog, nullptr);
  auto id = make_relay(h);
  h.env_send(id, relay::kPing, encode<std::uint64_t>(1));
  h.env_send(id, relay::kHalt, {});
  h.env_send(id, relay::kPing, encode<std::uint64_t>(2));
  settle(h);
  CHECK(h.tombstoned(id));
  CHECK_FALSE(h.hosts(id));
  CHECK(h.machines().empty());
  // The report from the first ping still left the outbox.
  CHECK(h.stats().env_delivered == 1);
  CHECK(h.map_entries(id, "seen").empty());
  h.env_send(id, relay::kPing, encode<std::uint64_t>(3));
  settle(h);
  CHECK(h.outbox_size(h.env_client()) == 0);
  CHECK(h.idle());
}

TEST_CASE("halt then crash before commit keeps the machine alive") {
  auto prog = relay::program();
  auto store = storage::Store::in_memory();
  RsmId id;
  {
    MachineHost h(local_config(), store, prog, nullptr);
    id = make_relay(h);
    h.env_send(id, relay::kHalt, {});
    while (h.drain_step(h.env_client())) {
    }
    h.set_commit_hook([](CommitPoint& p) -> CommitDecision {
      if (p.kind == CommitKind::kHandler) throw Crash{};
      return CommitDecision::kCommit;
    });
    CHECK_THROWS_AS(h.handle_step(id), Crash);
  }
  MachineHost h(local_config(), store, prog, nullptr);
  CHECK(h.hosts(id));
  CHECK(h.machines().size() == 1);
}

TEST_CASE("creation from a handler instantiates a child exactly once") {
  auto prog = relay::program();
  MachineHost h(local_config(), storage::Store::in_memory(), prog, nullptr);
  auto id = make_relay(h);
  h.env_send(id, relay::kSpawn, encode<std::uint64_t>(4));
  settle(h);
  REQUIRE(h.machines().size() == 2);
  auto child_name = decode<std::string>(h.field(id, "child"));
  RsmId child;
  for (const auto& m : h.machines()) {
    if (m != id) child = m;
  }
  CHECK(child.to_string() == child_name);
  CHECK(u64(h.field(child, "count")) == 1);
}

TEST_CASE("failing handlers are retried then dead-lettered") {
  auto prog = relay::program();
  auto cfg = local_config();
  cfg.max_redeliveries = 3;
  MachineHost h(cfg, storage::Store::in_memory(), prog, nullptr);
  auto id = make_relay(h);
  h.env_send(id, relay::kPing, encode<std::uint64_t>(1));
  h.env_send(id, relay::kBoom, {});
  h.env_send(id, relay::kPing, encode<std::uint64_t>(2));
  settle(h);
  // First delivery plus three redeliveries.
  CHECK(h.stats().handler_aborts == 4);
  auto dl = h.dead_letters();
  REQUIRE(dl.size() == 1);
  CHECK(dl[0].event.type() == relay::kBoom);
  CHECK(dl[0].reason.find("boom") != std::string::npos);
  // Neighbours of the poison event were processed once each.
  CHECK(u64(h.field(id, "count")) == 2);
}

TEST_CASE("shared queue indices are rebuilt from the store") {
  auto prog = relay::program();
  auto store = storage::Store::in_memory();
  std::map<RsmId, QueueBounds> live;
  {
    MachineHost h(local_config(), store, prog, nullptr);
    std::vector<RsmId> ids;
    for (int i = 0; i < 4; ++i) ids.push_back(make_relay(h));
    for (int i = 0; i < 30; ++i) h.env_send(ids[i % 4], relay::kPing, encode<std::uint64_t>(i));
    for (int i = 0; i < 6; ++i) h.drain_step(h.env_client());
    h.handle_step(ids[0]);
    h.handle_step(ids[2]);
    for (const auto& [id, b] : h.inboxes().bounds()) {
      if (b.head != b.tail) live[id] = b;
    }
    CHECK(h.inboxes().scan_bounds() == live);
    CHECK_FALSE(live.empty());
  }
  MachineHost h(local_config(), store, prog, nullptr);
  CHECK(h.inboxes().scan_bounds() == live);
  std::map<RsmId, QueueBounds> recovered;
  for (const auto& [id, b] : h.inboxes().bounds()) {
    if (b.head != b.tail) recovered[id] = b;
  }
  CHECK(recovered == live);
}

TEST_CASE("per-machine queues behave like shared ones") {
  auto prog = relay::program();
  for (bool shared : {true, false}) {
    auto cfg = local_config();
    cfg.shared_queues = shared;
    MachineHost h(cfg, storage::Store::in_memory(), prog, nullptr);
    auto a = make_relay(h);
    auto b = make_relay(h);
    for (std::uint64_t i = 0; i < 10; ++i) h.env_send(a, relay::kForward, relay::forward_payload(b, i));
    settle(h);
    CHECK(u64(h.field(b, "count")) == 10);
    CHECK(h.stats().env_delivered == 10);
    CHECK(h.inboxes().shared() == shared);
  }
}

namespace {

struct Ledger {
  // (sender, dest) -> tags in commit order at dest
  std::map<std::pair<RsmId, RsmId>, std::vector<std::uint64_t>> received;
  std::map<std::uint64_t, int> reports;
};

SimOptions lossy(std::uint64_t seed) {
  SimOptions o;
  o.partitions = {"p0", "p1"};
  o.host.fsync = storage::FsyncPolicy::kNever;
  o.faults.drop_prob = 0.5;
  o.faults.duplicate_prob = 0.2;
  o.faults.reorder_prob = 0.5;
  o.faults.reorder_window = 8;
  o.seed = seed;
  return o;
}

void check_exactly_once(SimCluster& sim, const Ledger& ledger, std::uint64_t messages) {
  std::map<std::uint64_t, int> reports;
  for (const auto& [from, rec] : sim.env_outputs()) ++reports[decode<std::uint64_t>(rec.payload)];
  CHECK(reports.size() == messages);
  CHECK(std::all_of(reports.begin(), reports.end(), [](const auto& kv) { return kv.second == 1; }));
  for (const auto& [pair, tags] : ledger.received) {
    CHECK(std::is_sorted(tags.begin(), tags.end()));
    CHECK(std::adjacent_find(tags.begin(), tags.end()) == tags.end());
  }
  // Counter coherence at quiescence.
  std::map<std::pair<RsmId, RsmId>, std::uint64_t> sent, recv;
  for (const auto& p : sim.partitions()) {
    for (const auto& [k, v] : sim.host(p).send_counters()) sent[k] = v;
    for (const auto& [k, v] : sim.host(p).receive_counters()) recv[{k.second, k.first}] = v;
  }
  CHECK(sent == recv);
}

}  // namespace

TEST_CASE("exactly-once delivery across partitions under a lossy network and crashes") {
  auto prog = relay::program();
  for (std::uint64_t seed : {1, 2}) {
    auto opts = lossy(seed);
    opts.crash_every = 13;
    SimCluster sim(prog, opts);
    Ledger ledger;
    sim.set_observer([&](const HandledEvent& e) {
      if (e.event.type() == relay::kPing) {
        ledger.received[{e.event.source(), e.machine}].push_back(decode<std::uint64_t>(e.event.payload()));
      }
    });
    std::vector<RsmId> ids;
    for (int i = 0; i < 4; ++i) ids.push_back(sim.create("Relay"));
    CHECK(ids[0].partition != ids[1].partition);
    const std::uint64_t n = 400;
    for (std::uint64_t t = 0; t < n; ++t) {
      sim.send(ids[t % 4], relay::kForward, relay::forward_payload(ids[(t * 7 + 1) % 4], t));
    }
    REQUIRE(sim.run(2'000'000));
    CHECK(sim.stats().crashes > 5);
    check_exactly_once(sim, ledger, n);
    std::uint64_t total = 0;
    for (const auto& id : ids) total += u64(sim.host(id.partition).field(id, "count"));
    CHECK(total == n);
  }
}

TEST_CASE("simulation is reproducible from its seed") {
  auto prog = relay::program();
  auto trace = [&](std::uint64_t seed) {
    auto opts = lossy(seed);
    opts.crash_every = 7;
    SimCluster sim(prog, opts);
    std::vector<std::string> events;
    sim.set_observer([&](const HandledEvent& e) {
      events.push_back(e.machine.to_string() + "<-" + std::to_string(e.event.type()));
    });
    auto a = sim.create("Relay");
    auto b = sim.create("Relay");
    for (std::uint64_t t = 0; t < 40; ++t) sim.send(t % 2 ? a : b, relay::kForward, relay::forward_payload(t % 2 ? b : a, t));
    sim.run(500000);
    return std::make_pair(events, sim.stats().steps);
  };
  CHECK(trace(3) == trace(3));
  CHECK(trace(3) != trace(4));
}

TEST_CASE("log-backed cluster recovers through real log replay") {
  auto prog = relay::program();
  auto dir = fs::temp_directory_path() / "rsm_sim_logs";
  fs::remove_all(dir);
  auto opts = lossy(9);
  opts.store_dir = dir;
  opts.crash_every = 11;
  SimCluster sim(prog, opts);
  Ledger ledger;
  sim.set_observer([&](const HandledEvent& e) {
    if (e.event.type() == relay::kPing) {
      ledger.received[{e.event.source(), e.machine}].push_back(decode<std::uint64_t>(e.event.payload()));
    }
  });
  auto a = sim.create("Relay");
  auto b = sim.create("Relay");
  for (std::uint64_t t = 0; t < 60; ++t) sim.send(t % 2 ? a : b, relay::kForward, relay::forward_payload(t % 2 ? b : a, t));
  REQUIRE(sim.run(1'000'000));
  check_exactly_once(sim, ledger, 60);
}

TEST_CASE("non-persistent inbox: no loss under crashes and one durable write per message") {
  auto prog = relay::program();
  std::map<bool, std::uint64_t> receiver_commits;
  for (bool persistent : {true, false}) {
    auto opts = lossy(21);
    opts.faults = {};
    opts.host.persistent_inbox = persistent;
    opts.host.batch_size = 1;
    SimCluster sim(prog, opts);
    auto a = sim.create("Relay", std::string("p0"));
    auto b = sim.create("Relay", std::string("p1"));
    REQUIRE(sim.run(100000));
    std::uint64_t commits = 0;
    sim.set_commit_hook([&](CommitPoint& p) {
      if (p.machine == b && (p.kind == CommitKind::kIngest || p.kind == CommitKind::kHandler)) ++commits;
      return CommitDecision::kCommit;
    });
    for (std::uint64_t t = 0; t < 50; ++t) sim.send(a, relay::kForward, relay::forward_payload(b, t));
    REQUIRE(sim.run(1'000'000));
    CHECK(u64(sim.host("p1").field(b, "count")) == 50);
    receiver_commits[persistent] = commits;
  }
  CHECK(receiver_commits[true] == 100);
  CHECK(receiver_commits[false] == 50);

  auto opts = lossy(22);
  opts.host.persistent_inbox = false;
  opts.crash_every = 9;
  SimCluster sim(prog, opts);
  Ledger ledger;
  sim.set_observer([&](const HandledEvent& e) {
    if (e.event.type() == relay::kPing) {
      ledger.received[{e.event.source(), e.machine}].push_back(decode<std::uint64_t>(e.event.payload()));
    }
  });
  auto a = sim.create("Relay", std::string("p0"));
  auto b = sim.create("Relay", std::string("p1"));
  for (std::uint64_t t = 0; t < 120; ++t) sim.send(t % 2 ? a : b, relay::kForward, relay::forward_payload(t % 2 ? b : a, t));
  REQUIRE(sim.run(2'000'000));
  check_exactly_once(sim, ledger, 120);
}

TEST_CASE("threaded runner processes concurrently submitted work") {
  auto prog = relay::program();
  auto cfg = local_config();
  MachineHost h(cfg, storage::Store::in_memory(), prog, nullptr);
  std::mutex mu;
  std::map<std::uint64_t, int> reports;
  h.set_env_sink([&](const RsmId&, const OutputRecord& r) {
    std::lock_guard lock(mu);
    ++reports[decode<std::uint64_t>(r.payload)];
  });
  ThreadedRunner runner(h, 3);
  std::vector<RsmId> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(h.create_machine("Relay"));
  REQUIRE(runner.wait_idle(std::chrono::seconds(20)));
  for (std::uint64_t t = 0; t < 200; ++t) h.env_send(ids[t % 4], relay::kForward, relay::forward_payload(ids[(t + 1) % 4], t));
  REQUIRE(runner.wait_idle(std::chrono::seconds(30)));
  runner.stop();
  std::lock_guard lock(mu);
  CHECK(reports.size() == 200);
  CHECK(std::all_of(reports.begin(), reports.end(), [](const auto& kv) { return kv.second == 1; }));
}

TEST_CASE("two hosts over sockets deliver exactly once") {
  auto prog = relay::program();
  int base = 20000 + static_cast<int>(std::random_device{}() % 20000);
  std::map<std::string, std::string> addresses{{"p0", "127.0.0.1:" + std::to_string(base)},
                                               {"p1", "127.0.0.1:" + std::to_string(base + 1)}};
  std::mutex mu;
  std::map<std::uint64_t, int> reports;
  std::vector<std::unique_ptr<net::SocketTransport>> transports;
  std::vector<std::unique_ptr<MachineHost>> hosts;
  for (const char* p : {"p0", "p1"}) {
    HostConfig cfg;
    cfg.partition = p;
    cfg.partitions = {"p0", "p1"};
    cfg.fsync = storage::FsyncPolicy::kNever;
    cfg.addresses = addresses;
    transports.push_back(std::make_unique<net::SocketTransport>(addresses));
    hosts.push_back(std::make_unique<MachineHost>(cfg, storage::Store::in_memory(), prog, transports.back().get()));
    hosts.back()->set_env_sink([&](const RsmId&, const OutputRecord& r) {
      std::lock_guard lock(mu);
      ++reports[decode<std::uint64_t>(r.payload)];
    });
  }
  {
    ThreadedRunner r0(*hosts[0], 1), r1(*hosts[1], 1);
    auto a = hosts[0]->create_machine("Relay", std::string("p0"));
    auto b = hosts[0]->create_machine("Relay", std::string("p1"));
    for (std::uint64_t t = 0; t < 100; ++t) {
      hosts[0]->env_send(t % 2 ? a : b, relay::kForward, relay::forward_payload(t % 2 ? b : a, t));
    }
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
    while (std::chrono::steady_clock::now() < deadline) {
      {
        std::lock_guard lock(mu);
        if (reports.size() == 100 && hosts[0]->idle() && hosts[1]->idle()) break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    CHECK(u64(hosts[0]->field(a, "count")) + u64(hosts[1]->field(b, "count")) == 100);
  }
  std::lock_guard lock(mu);
  CHECK(reports.size() == 100);
  CHECK(std::all_of(reports.begin(), reports.end(), [](const auto& kv) { return kv.second == 1; }));
}
