// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <random>

#include "doctest.h"
#include "rsm/apps/bank.hpp"
#include "rsm/apps/poolserver.hpp"
#include "rsm/apps/wordcount.hpp"
#include "rsm/runtime/sim_cluster.hpp"

using namespace rsm;
using namespace rsm::apps;
using rsm::testkit::ExploreOptions;
using rsm::testkit::Violation;

namespace {

// Independent max-frequency oracle: count with a map, break ties by the
// first word to reach the top count.
std::pair<std::string, std::uint64_t> oracle_max(const std::vector<std::string>& words) {
  std::map<std::string, std::uint64_t> counts;
  std::pair<std::string, std::uint64_t> best{"", 0};
  for (const auto& w : words) {
    if (++counts[w] > best.second) best = {w, counts[w]};
  }
  return best;
}

// Runs word count to quiescence on a simulated cluster and returns the last
// maximum the MaxMachine reported.
std::pair<std::string, std::uint64_t> run_wordcount(const std::vector<std::string>& words, std::uint64_t crash_every,
                                                    std::uint64_t seed, std::uint64_t* crashes = nullptr) {
  auto program = wordcount::program();
  runtime::SimOptions o;
  o.partitions = {"p0", "p1"};
  o.crash_every = crash_every;
  o.seed = seed;
  runtime::SimCluster sim(program, o);
  auto main = sim.create("MainMachine");
  sim.send(main, wordcount::kInit, encode<std::uint64_t>(4));
  for (const auto& w : words) sim.send(main, wordcount::kWord, wordcount::word_payload(w));
  REQUIRE(sim.run(5'000'000));
  if (crashes) *crashes = sim.stats().crashes;
  std::pair<std::string, std::uint64_t> last{"", 0};
  for (const auto& [src, out] : sim.env_outputs()) {
    if (out.event_type == wordcount::kWordFreq) last = wordcount::parse_freq(out.payload);
  }
  return last;
}

poolserver::PoolStatus query_pool(runtime::SimCluster& sim, const RsmId& pm) {
  auto before = sim.env_outputs().size();
  sim.send(pm, poolserver::kGetPool, Bytes{});
  REQUIRE(sim.run(1'000'000));
  for (auto i = sim.env_outputs().size(); i > before; --i) {
    const auto& out = sim.env_outputs()[i - 1].second;
    if (out.event_type == poolserver::kPoolStatus) return poolserver::decode_status(out.payload);
  }
  FAIL("no status reply");
  return {};
}

}  // namespace

TEST_CASE("word hash is 64-bit FNV-1a") {
  CHECK(wordcount::word_hash("") == 0xcbf29ce484222325ull);
  CHECK(wordcount::word_hash("a") == 0xaf63dc4c8601ec8cull);
  CHECK(wordcount::word_hash("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("word count small examples") {
  std::vector<std::string> abc{"a", "b", "a"};
  CHECK(oracle_max(abc) == std::pair<std::string, std::uint64_t>{"a", 2});
  CHECK(wordcount::sequential_max(abc) == oracle_max(abc));
  CHECK(run_wordcount(abc, 0, 1) == std::pair<std::string, std::uint64_t>{"a", 2});
  CHECK(run_wordcount({"solo"}, 0, 1) == std::pair<std::string, std::uint64_t>{"solo", 1});
  CHECK(run_wordcount({"solo"}, 3, 2) == std::pair<std::string, std::uint64_t>{"solo", 1});
}

TEST_CASE("corpus has a unique most frequent word") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto words = wordcount::corpus(2000, seed);
    CHECK(words.size() == 2000);
    std::map<std::string, std::uint64_t> counts;
    for (const auto& w : words) ++counts[w];
    auto top = oracle_max(words);
    int at_top = 0;
    for (const auto& [w, c] : counts) at_top += c == top.second;
    CHECK(at_top == 1);
    CHECK(wordcount::sequential_max(words) == top);
    CHECK(wordcount::corpus(2000, seed) == words);
  }
}

TEST_CASE("word count under crashes matches the oracle") {
  for (std::uint64_t seed : {11, 12, 13}) {
    auto words = wordcount::corpus(1500, seed);
    std::uint64_t crashes = 0;
    CHECK(run_wordcount(words, 20, seed, &crashes) == oracle_max(words));
    CHECK(crashes > 10);
  }
}

TEST_CASE("pool status encoding round-trips") {
  poolserver::PoolStatus s{"Resizing", 7, 2, 4, 1, false};
  auto d = poolserver::decode_status(poolserver::encode_status(s));
  CHECK(d.state == "Resizing");
  CHECK(d.goal == 7);
  CHECK(d.creating == 2);
  CHECK(d.created == 4);
  CHECK(d.deleting == 1);
  CHECK_FALSE(d.deleting_pool);
}

TEST_CASE("pool scale-up resumes after crashes") {
  auto program = poolserver::program({.fail_probability = 0.0, .unhealthy_probability = 0.0});
  runtime::SimOptions o;
  o.crash_every = 7;
  o.seed = 5;
  runtime::SimCluster sim(program, o);
  auto provider = sim.create("ResourceProvider");
  auto pm = sim.create("PoolManager");
  sim.send(pm, poolserver::kCreatePool, poolserver::create_pool_payload(10, provider));
  REQUIRE(sim.run(1'000'000));
  CHECK(sim.stats().crashes > 5);
  auto s = query_pool(sim, pm);
  CHECK(s.state == "Created");
  CHECK(s.goal == 10);
  CHECK(s.created == 10);
  CHECK(s.creating == 0);
  CHECK(s.deleting == 0);
  CHECK_FALSE(poolserver::garbage_check(sim.host("p0")));

  // Shrinking from 10 to 4 deletes six resources.
  sim.send(pm, poolserver::kResizePool, encode<std::uint64_t>(4));
  REQUIRE(sim.run(1'000'000));
  s = query_pool(sim, pm);
  CHECK(s.state == "Created");
  CHECK(s.created == 4);
  CHECK(s.deleting == 0);
  CHECK_FALSE(poolserver::garbage_check(sim.host("p0")));
}

TEST_CASE("pool properties hold under systematic testing") {
  using Op = poolserver::ClientOp;
  ExploreOptions o;
  o.iterations = 30;
  o.inject_crashes = true;
  auto grow = poolserver::scenario({{Op::kCreate, 4}, {Op::kResize, 2}});
  auto r = testkit::explore(grow, o);
  CHECK(r.passed());
  if (!r.passed()) MESSAGE(r.violations[0].message);

  auto del = poolserver::scenario({{Op::kCreate, 5}, {Op::kDelete, 0}});
  r = testkit::explore(del, o);
  CHECK(r.passed());
  if (!r.passed()) MESSAGE(r.violations[0].message);
}

TEST_CASE("pool mutants are caught") {
  using Op = poolserver::ClientOp;
  ExploreOptions o;
  o.iterations = 100;
  auto drop = poolserver::scenario({{Op::kCreate, 10}, {Op::kResize, 3}}, {.drop_creating_count = true},
                                   {poolserver::property1()});
  auto r = testkit::explore(drop, o);
  REQUIRE_FALSE(r.passed());
  CHECK(r.violations[0].monitor == "property1");
  CHECK(r.violations[0].kind == Violation::Kind::kSafety);

  o.inject_crashes = true;
  o.check_non_interference = false;
  auto vol = poolserver::scenario({{Op::kCreate, 10}, {Op::kResize, 3}}, {.volatile_created_count = true},
                                  {poolserver::property2()});
  r = testkit::explore(vol, o);
  REQUIRE_FALSE(r.passed());
  CHECK(r.violations[0].monitor == "property2");
  CHECK(r.violations[0].kind == Violation::Kind::kLiveness);
}

TEST_CASE("bank conserves money on a crashing cluster") {
  auto program = bank::program();
  runtime::SimOptions o;
  o.partitions = {"p0", "p1", "p2"};
  o.crash_every = 9;
  o.faults.drop_prob = 0.2;
  o.faults.duplicate_prob = 0.1;
  runtime::SimCluster sim(program, o);
  std::vector<RsmId> accounts;
  for (int i = 0; i < 6; ++i) {
    accounts.push_back(sim.create("Account", o.partitions[i % 3]));
    sim.send(accounts.back(), bank::kDeposit, encode<std::int64_t>(100));
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    auto from = accounts[rng() % 6], to = accounts[rng() % 6];
    sim.send(from, bank::kTransfer, bank::transfer_payload(to, static_cast<std::int64_t>(rng() % 60)));
  }
  REQUIRE(sim.run(5'000'000));
  std::int64_t sum = 0;
  for (const auto& p : o.partitions) sum += bank::total(sim.host(p));
  CHECK(sum == 600);
  CHECK(sim.stats().crashes > 10);
}
