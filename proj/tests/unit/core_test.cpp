// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <random>

#include "doctest.h"
#include "rsm/core/codec.hpp"
#include "rsm/core/event.hpp"
#include "rsm/core/handler_context.hpp"
#include "rsm/core/ids.hpp"
#include "rsm/core/machine_class.hpp"

using namespace rsm;

namespace {

// Minimal transactional field store: writes buffer until commit().
class FakeView : public PersistentView {
 public:
  std::optional<Bytes> read(const std::string& field, ByteView key) override {
    auto k = make_key(field, key);
    if (auto it = pending_.find(k); it != pending_.end()) return it->second;
    if (auto it = committed_.find(k); it != committed_.end()) return it->second;
    return std::nullopt;
  }
  void write(const std::string& field, ByteView key, Bytes value) override {
    pending_[make_key(field, key)] = std::move(value);
  }
  void erase(const std::string& field, ByteView key) override { pending_[make_key(field, key)] = std::nullopt; }
  std::vector<std::pair<Bytes, Bytes>> scan(const std::string& field) override {
    std::vector<std::pair<Bytes, Bytes>> out;
    for (const auto& [k, v] : committed_)
      if (k.first == field) out.emplace_back(k.second, v);
    return out;
  }
  void commit() {
    for (auto& [k, v] : pending_) {
      if (v) {
        committed_[k] = *v;
      } else {
        committed_.erase(k);
      }
    }
    pending_.clear();
  }
  void abort() { pending_.clear(); }

 private:
  using Key = std::pair<std::string, Bytes>;
  static Key make_key(const std::string& f, ByteView k) { return {f, Bytes(k.begin(), k.end())}; }
  std::map<Key, std::optional<Bytes>> pending_;
  std::map<Key, Bytes> committed_;
};

class CountingIds : public IdSource {
 public:
  RsmId allocate(const std::optional<std::string>& placement) override {
    return RsmId{placement.value_or("p0"), next_++};
  }

 private:
  std::uint64_t next_ = 1;
};

class FixedNondet : public Nondet {
 public:
  std::uint64_t next(std::uint64_t bound) override { return 7 % bound; }
};

std::shared_ptr<const MachineClass> word_count_class() {
  return MachineClass::Builder("WordCountMachine")
      .persistent<std::int64_t>("HighFreq", 0)
      .persistent("TargetMachine", encode(RsmId::environment()))
      .persistent_map("WordFreq")
      .volatile_field<std::int64_t>("WordsSeenSinceLastCrash", 0)
      .start("Init")
      .state("DoCount")
      .on("Init", 1, [](HandlerContext&) {})
      .build();
}

struct Fixture {
  Program program;
  std::shared_ptr<const MachineClass> cls = word_count_class();
  FakeView view;
  std::map<std::string, Bytes> volatiles{{"WordsSeenSinceLastCrash", encode<std::int64_t>(0)}};
  CountingIds ids;
  FixedNondet nondet;

  Fixture() {
    program.add(cls);
    program.add(MachineClass::Builder("MaxMachine").start("DoCount").build());
  }

  std::unique_ptr<HandlerContext> context() {
    return std::make_unique<HandlerContext>(*cls, RsmId{"p0", 99}, Event(RsmId::environment(), 1, {}), "Init", view,
                                            volatiles, ids, nondet, program);
  }
};

}  // namespace

TEST_CASE("RsmId ordering, printing and keys") {
  RsmId a{"alpha", 2}, b{"alpha", 10}, c{"beta", 0};
  CHECK(a < b);
  CHECK(b < c);
  CHECK(RsmId::parse("alpha#10") == b);
  CHECK(b.to_string() == "alpha#10");
  CHECK_THROWS_AS(RsmId::parse("nohash"), UsageError);
  CHECK(RsmId::environment().is_environment());
  // Key encoding preserves the id order.
  CHECK(key_of(a) < key_of(b));
  CHECK(key_of(b) < key_of(c));
  auto k = key_of(b);
  Reader r(k);
  CHECK(id_from_key(r) == b);
}

TEST_CASE("codec is canonical little-endian with length-prefixed text") {
  CHECK(encode<std::int64_t>(1) == Bytes{1, 0, 0, 0, 0, 0, 0, 0});
  CHECK(encode<std::string>("ab") == Bytes{2, 0, 0, 0, 'a', 'b'});
  CHECK_THROWS_AS(decode<std::int64_t>(Bytes{1, 2}), DecodeError);
  CHECK_THROWS_AS(decode<bool>(Bytes{1, 2}), DecodeError);

  // Property: decode(encode(x)) == x for random events.
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    Bytes payload(rng() % 40);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    Event e(RsmId{"p" + std::to_string(rng() % 5), rng()}, static_cast<std::uint32_t>(rng()), payload);
    CHECK(decode<Event>(encode(e)) == e);
  }
}

TEST_CASE("machine class invariants") {
  CHECK_THROWS_AS(MachineClass::Builder("NoStart").state("A").build(), UsageError);
  CHECK_THROWS_AS(MachineClass::Builder("Dup")
                      .persistent<std::int64_t>("f", 0)
                      .volatile_field<std::int64_t>("f", 0)
                      .start("A")
                      .build(),
                  UsageError);
  auto cls = word_count_class();
  CHECK(cls->has_state("DoCount"));
  CHECK(cls->handler("Init", 1) != nullptr);
  CHECK(cls->handler("Init", 2) == nullptr);
  Program p;
  CHECK_THROWS_AS(p.at("Missing"), UnknownClassError);
}

TEST_CASE("send appends to the output buffer in call order") {
  Fixture f;
  auto ctx = f.context();
  RsmId r2{"p0", 2};
  ctx->send(r2, 7, to_bytes("w"));
  REQUIRE(ctx->outputs().size() == 1);
  CHECK(ctx->outputs()[0] == OutputRecord{r2, 7, to_bytes("w")});
  ctx->send(r2, 8, to_bytes("b1"));
  ctx->send(r2, 9, to_bytes("b2"));
  REQUIRE(ctx->outputs().size() == 3);
  CHECK(ctx->outputs()[1].event_type == 8);
  CHECK(ctx->outputs()[2].event_type == 9);
  CHECK_THROWS_AS(ctx->send(r2, kCreateEventType, {}), UsageError);
}

TEST_CASE("create returns fresh ids and records creation requests") {
  Fixture f;
  auto ctx = f.context();
  auto id1 = ctx->create("MaxMachine");
  auto id2 = ctx->create("MaxMachine");
  CHECK(id1 != id2);
  REQUIRE(ctx->outputs().size() == 2);
  CHECK(ctx->outputs()[0] == OutputRecord{id1, kCreateEventType, to_bytes("MaxMachine")});
  CHECK(ctx->outputs()[1].dest == id2);
  CHECK(ctx->outputs()[1].is_creation());
  CHECK_THROWS_AS(ctx->create("Nope"), UnknownClassError);
}

TEST_CASE("load sees the transaction's own stores; abort discards them") {
  Fixture f;
  {
    auto ctx = f.context();
    ctx->store_as<std::int64_t>("HighFreq", 3);
    f.view.commit();
  }
  {
    auto ctx = f.context();
    ctx->store_as<std::int64_t>("HighFreq", 5);
    CHECK(ctx->load_as<std::int64_t>("HighFreq") == 5);
    f.view.abort();
  }
  auto ctx = f.context();
  CHECK(ctx->load_as<std::int64_t>("HighFreq") == 3);
}

TEST_CASE("unset registers read their class initial value; dictionaries start empty") {
  Fixture f;
  auto ctx = f.context();
  CHECK(ctx->load_as<std::int64_t>("HighFreq") == 0);
  CHECK_FALSE(ctx->lookup_as<std::int64_t>("WordFreq", std::string("a")).has_value());
  ctx->put_as("WordFreq", std::string("a"), std::int64_t{2});
  CHECK(ctx->lookup_as<std::int64_t>("WordFreq", std::string("a")) == 2);
}

TEST_CASE("field access errors") {
  Fixture f;
  auto ctx = f.context();
  CHECK_THROWS_AS(ctx->load("Nope"), UnknownFieldError);
  CHECK_THROWS_AS(ctx->load("WordsSeenSinceLastCrash"), FieldAccessError);
  CHECK_THROWS_AS(ctx->store("WordFreq", {}), FieldAccessError);
  CHECK_THROWS_AS(ctx->read_volatile("HighFreq"), FieldAccessError);
  CHECK_THROWS_AS(ctx->lookup("HighFreq", Bytes{}), FieldAccessError);
  ctx->set_volatile<std::int64_t>("WordsSeenSinceLastCrash", 4);
  CHECK(ctx->volatile_as<std::int64_t>("WordsSeenSinceLastCrash") == 4);
}

TEST_CASE("jump is deferred and validated; closed contexts reject calls") {
  Fixture f;
  auto ctx = f.context();
  CHECK_FALSE(ctx->pending_state().has_value());
  CHECK_THROWS_AS(ctx->jump("Nowhere"), UnknownStateError);
  ctx->jump("DoCount");
  CHECK(ctx->state() == "Init");
  CHECK(ctx->pending_state() == "DoCount");
  CHECK(ctx->random(5) == 2);
  ctx->close();
  CHECK_THROWS_AS(ctx->send(RsmId{"p0", 1}, 1, {}), ContextClosedError);
  CHECK_THROWS_AS(ctx->load("HighFreq"), ContextClosedError);
}
