// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures. Thresholds and budgets are pinned below.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>

#include <fmt/format.h>

#include "relay_app.hpp"
#include "rsm/apps/bench.hpp"
#include "rsm/apps/poolserver.hpp"
#include "rsm/apps/wordcount.hpp"
#include "rsm/runtime/sim_cluster.hpp"
#include "rsm/semantics/checks.hpp"
#include "rsm/semantics/generator.hpp"
#include "rule_crosscheck.hpp"

using namespace rsm;
namespace fs = std::filesystem;

namespace {

// ---- pinned thresholds ----
constexpr int kTransparencyPrograms = 20;
constexpr int kTransparencyResets = 4;
constexpr double kTransparencyBudget = 300;

constexpr std::uint64_t kMessages = 10000;
constexpr double kDrop = 0.3, kDuplicate = 0.2;
constexpr std::size_t kReorderWindow = 8;
constexpr std::uint64_t kCrashEvery = 50;
constexpr double kDeliveryBudget = 120;

constexpr int kStorageTransactions = 500;
constexpr double kStorageBudget = 180;

constexpr std::uint64_t kWords = 10000, kShards = 4, kWordCrashEvery = 20;
constexpr int kWordSeeds = 10;

constexpr std::uint64_t kPoolIterations = 100, kPoolDepth = 10000, kLivenessIterations = 10;

constexpr std::uint64_t kCreationN = 1000;
constexpr double kCreationSpeedup = 2.0;
constexpr double kBatchSpeedup = 1.5;
constexpr std::size_t kBatchPayload = 100;
constexpr int kBenchRepeats = 3;

constexpr int kRuleInstances = 1000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// 1. Failure transparency over generated programs.
Outcome transparency() {
  auto t0 = Clock::now();
  std::size_t runs = 0, violations = 0, programs = 0;
  for (std::uint64_t seed = 0; programs < kTransparencyPrograms; ++seed) {
    auto p = sem::generate_program(seed);
    sem::ExhaustiveOptions o;
    o.max_resets = kTransparencyResets;
    o.seed = seed;
    auto rep = sem::check_transparency_exhaustive(p, sem::initial_config(p), 1, o);
    runs += rep.runs;
    violations += rep.violations;
    ++programs;
  }
  double secs = since(t0);
  return {violations == 0 && runs > 0 && secs < kTransparencyBudget,
          fmt::format("{} programs, {} reset placements, {} trace mismatches, {:.1f}s (budget {}s)", programs, runs,
                      violations, secs, kTransparencyBudget)};
}

// 2. Exactly-once delivery, FIFO and counter coherence on a lossy network.
Outcome delivery() {
  auto t0 = Clock::now();
  auto program = relay::program();
  runtime::SimOptions o;
  o.partitions = {"p0", "p1"};
  o.host.fsync = storage::FsyncPolicy::kNever;
  o.faults.drop_prob = kDrop;
  o.faults.duplicate_prob = kDuplicate;
  o.faults.reorder_prob = 0.5;
  o.faults.reorder_window = kReorderWindow;
  o.crash_every = kCrashEvery;
  o.seed = 2026;
  runtime::SimCluster sim(program, o);
  std::map<std::pair<RsmId, RsmId>, std::vector<std::uint64_t>> received;
  sim.set_observer([&](const runtime::HandledEvent& e) {
    if (e.event.type() == relay::kPing) {
      received[{e.event.source(), e.machine}].push_back(decode<std::uint64_t>(e.event.payload()));
    }
  });
  std::vector<RsmId> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(sim.create("Relay", o.partitions[i % 2]));
  // Sender log: what each machine was told to send, in order.
  std::map<std::pair<RsmId, RsmId>, std::vector<std::uint64_t>> sent;
  for (std::uint64_t t = 0; t < kMessages; ++t) {
    auto from = ids[t % 4], to = ids[(t * 7 + 1 + t / 4) % 4];
    sent[{from, to}].push_back(t);
    sim.send(from, relay::kForward, relay::forward_payload(to, t));
  }
  bool quiet = sim.run(200'000'000);
  std::uint64_t delivered = 0;
  for (const auto& [_, tags] : received) delivered += tags.size();
  bool fifo = received == sent;
  std::map<std::pair<RsmId, RsmId>, std::uint64_t> sc, rc;
  for (const auto& p : sim.partitions()) {
    for (const auto& [k, v] : sim.host(p).send_counters()) sc[k] = v;
    for (const auto& [k, v] : sim.host(p).receive_counters()) rc[{k.second, k.first}] = v;
  }
  std::uint64_t total = 0;
  for (const auto& id : ids) total += decode<std::uint64_t>(sim.host(id.partition).field(id, "count"));
  double secs = since(t0);
  auto net = sim.network_stats();
  return {quiet && fifo && sc == rc && total == kMessages && secs < kDeliveryBudget,
          fmt::format("{} of {} delivered, per-pair sequences {}, counters {}, {} crashes, {} dropped, {} duplicated, "
                      "{:.1f}s (budget {}s)",
                      delivered, kMessages, fifo ? "match sender log" : "DIFFER", sc == rc ? "coherent" : "INCOHERENT",
                      sim.stats().crashes, net.dropped, net.duplicated, secs, kDeliveryBudget)};
}

// 3. Truncating the log at every byte offset recovers a committed prefix.
Outcome truncation() {
  auto t0 = Clock::now();
  auto dir = fs::temp_directory_path() / "rsm-acceptance";
  fs::create_directories(dir);
  auto path = dir / "torn.log", cut = dir / "cut.log";
  fs::remove(path);
  storage::StoreOptions so;
  so.fsync = storage::FsyncPolicy::kNever;
  so.compaction_threshold = UINT64_MAX;

  // Shadow model, applied by hand after each commit.
  std::map<Bytes, Bytes> shadow_map;
  std::deque<Bytes> shadow_queue;
  auto image = [&] {
    storage::StoreImage img;
    img["m"].is_queue = false;
    img["m"].entries = shadow_map;
    img["q"].is_queue = true;
    img["q"].items = shadow_queue;
    return img;
  };
  std::vector<std::pair<std::uint64_t, storage::StoreImage>> prefixes;
  {
    auto store = storage::Store::open(path, so);
    store->ensure_map("m");
    store->ensure_queue("q");
    prefixes.emplace_back(store->log_size(), image());
    std::mt19937_64 rng(500);
    for (int i = 0; i < kStorageTransactions; ++i) {
      auto tx = store->begin();
      auto k = to_bytes("k" + std::to_string(rng() % 17));
      auto v = to_bytes(std::string(rng() % 24, static_cast<char>('a' + i % 26)));
      tx.set("m", k, v);
      shadow_map[k] = v;
      if (rng() % 5 == 0) {
        auto gone = to_bytes("k" + std::to_string(rng() % 17));
        tx.erase("m", gone);
        shadow_map.erase(gone);
      }
      tx.enqueue("q", to_bytes(std::to_string(i)));
      shadow_queue.push_back(to_bytes(std::to_string(i)));
      if (i % 3 == 2) {
        tx.try_dequeue("q");
        shadow_queue.pop_front();
      }
      tx.commit();
      prefixes.emplace_back(store->log_size(), image());
    }
    store->close();
  }
  std::ifstream in(path, std::ios::binary);
  Bytes full((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t bad = 0, idx = 0;
  for (std::size_t len = prefixes.front().first; len <= full.size(); ++len) {
    while (idx + 1 < prefixes.size() && prefixes[idx + 1].first <= len) ++idx;
    {
      std::ofstream out(cut, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(full.data()), static_cast<std::streamsize>(len));
    }
    auto store = storage::Store::open(cut, so);
    if (store->image() != prefixes[idx].second) ++bad;
  }
  double secs = since(t0);
  fs::remove_all(dir);
  return {bad == 0 && secs < kStorageBudget,
          fmt::format("{} transactions, {} truncation offsets, {} bad recoveries, {:.1f}s (budget {}s)",
                      kStorageTransactions, full.size() - prefixes.front().first + 1, bad, secs, kStorageBudget)};
}

// 4. Word count under crash injection against a direct frequency count.
Outcome wordcount() {
  int good = 0;
  std::uint64_t crashes = 0;
  for (int seed = 1; seed <= kWordSeeds; ++seed) {
    auto words = apps::wordcount::corpus(kWords, seed);
    std::map<std::string, std::uint64_t> counts;
    std::pair<std::string, std::uint64_t> expected{"", 0};
    for (const auto& w : words) {
      if (++counts[w] > expected.second) expected = {w, counts[w]};
    }
    auto program = apps::wordcount::program({.shards = kShards});
    runtime::SimOptions o;
    o.partitions = {"p0", "p1"};
    o.host.fsync = storage::FsyncPolicy::kNever;
    o.crash_every = kWordCrashEvery;
    o.seed = static_cast<std::uint64_t>(seed);
    runtime::SimCluster sim(program, o);
    auto main = sim.create("MainMachine");
    sim.send(main, apps::wordcount::kInit, encode(kShards));
    for (const auto& w : words) sim.send(main, apps::wordcount::kWord, apps::wordcount::word_payload(w));
    bool quiet = sim.run(100'000'000);
    std::pair<std::string, std::uint64_t> last{"", 0};
    for (const auto& [_, r] : sim.env_outputs()) {
      if (r.event_type == apps::wordcount::kWordFreq) last = apps::wordcount::parse_freq(r.payload);
    }
    good += quiet && last == expected;
    crashes += sim.stats().crashes;
  }
  return {good == kWordSeeds, fmt::format("{}/{} seeds match the direct count ({} words, {} shards, {} crashes)", good,
                                          kWordSeeds, kWords, kShards, crashes)};
}

// 5. PoolServer properties and mutants.
Outcome poolserver() {
  namespace ps = apps::poolserver;
  using Op = ps::ClientOp;
  std::vector<Op> grow{{Op::kCreate, 100}, {Op::kResize, 5}};
  std::vector<Op> gone{{Op::kCreate, 50}, {Op::kDelete, 0}};
  testkit::ExploreOptions o;
  o.iterations = kPoolIterations;
  o.max_steps = kPoolDepth;
  o.inject_crashes = true;
  auto p1 = testkit::explore(ps::scenario(grow, {}, {ps::property1()}), o);
  o.iterations = kLivenessIterations;
  auto p2 = testkit::explore(ps::scenario(grow, {}, {ps::property2()}), o);
  auto p3 = testkit::explore(ps::scenario(gone, {}, {ps::property3()}), o);

  // Mutants: the monitors must catch them. The re-execution check is off
  // for the volatile mutant so the liveness monitor is what fires.
  o.iterations = kPoolIterations;
  o.inject_crashes = false;
  auto m1 = testkit::explore(ps::scenario(grow, {.drop_creating_count = true}, {ps::property1()}), o);
  o.inject_crashes = true;
  o.check_non_interference = false;
  auto m2 = testkit::explore(ps::scenario(grow, {.volatile_created_count = true}, {ps::property2()}), o);
  auto caught = [](const testkit::Report& r, const std::string& monitor) {
    return !r.passed() && r.violations[0].monitor == monitor;
  };
  bool ok = p1.passed() && p2.passed() && p3.passed() && caught(m1, "property1") && caught(m2, "property2");
  auto verdict = [](const testkit::Report& r) {
    return r.passed() ? fmt::format("ok/{}", r.iterations_run)
                      : fmt::format("violated@{} ({})", r.violations[0].iteration + 1, r.violations[0].monitor);
  };
  return {ok, fmt::format("P1 {} at depth {}; P2 {}; P3 {}; drop-creating-count {}; volatile-created-count {}",
                          verdict(p1), kPoolDepth, verdict(p2), verdict(p3), verdict(m1), verdict(m2))};
}

double metric(const std::vector<apps::bench::Row>& rows, const std::string& name) {
  for (const auto& r : rows) {
    if (r.metric == name) return r.value;
  }
  return 0;
}

double median_of(std::function<double()> f) {
  std::vector<double> v;
  for (int i = 0; i < kBenchRepeats; ++i) v.push_back(f());
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// 6. Relative performance.
Outcome performance() {
  namespace b = apps::bench;
  b::Options o;
  o.dir = fs::temp_directory_path() / "rsm-acceptance-bench";
  double shared = median_of([&] { return metric(b::creation(kCreationN, true, o), "total"); });
  double own = median_of([&] { return metric(b::creation(kCreationN, false, o), "total"); });
  double tp1 = median_of([&] { return metric(b::throughput(5000, kBatchPayload, 1, o), "throughput"); });
  double tp16 = median_of([&] { return metric(b::throughput(5000, kBatchPayload, 16, o), "throughput"); });
  double w_on = metric(b::durable_writes(1000, true, o), "receiver_commits_per_message");
  double w_off = metric(b::durable_writes(1000, false, o), "receiver_commits_per_message");
  bool a = own / shared >= kCreationSpeedup;
  bool bb = tp16 / tp1 >= kBatchSpeedup;
  bool c = w_on >= 2.0 && w_off == 1.0;
  return {a && bb && c,
          fmt::format("(a) creation n={} shared {:.0f}ms vs per-machine {:.0f}ms = {:.2f}x (need {}x) {}; "
                      "(b) batch16 {:.2f} vs batch1 {:.2f} MB/s = {:.2f}x (need {}x) {}; "
                      "(c) receiver commits/msg {:.2f} -> {:.2f} {}",
                      kCreationN, shared, own, own / shared, kCreationSpeedup, a ? "ok" : "MISS", tp16, tp1,
                      tp16 / tp1, kBatchSpeedup, bb ? "ok" : "MISS", w_on, w_off, c ? "ok" : "MISS")};
}

// 7. Rule-by-rule agreement with the reference stepper.
Outcome rules() {
  int rules = 0, agreed = 0, instances = 0;
  std::string first_bad;
  for (const auto& rule : rsm_crosscheck::rule_names()) {
    auto t = rsm_crosscheck::crosscheck_rule(rule, kRuleInstances, 2026);
    ++rules;
    instances += t.instances;
    agreed += t.agreed;
    if (t.agreed != t.instances && first_bad.empty()) first_bad = rule;
  }
  return {agreed == instances && instances == rules * kRuleInstances,
          fmt::format("{} rules x {} instances, {}/{} agree{}", rules, kRuleInstances, agreed, instances,
                      first_bad.empty() ? "" : ", first mismatch in " + first_bad)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"1 failure transparency", transparency}, {"2 exactly-once delivery", delivery},
      {"3 log truncation recovery", truncation}, {"4 word count under crashes", wordcount},
      {"5 poolserver properties", poolserver},   {"6 relative performance", performance},
      {"7 rule crosscheck", rules},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %-28s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), since(t0));
    std::fflush(stdout);
  }
  return failures;
}
