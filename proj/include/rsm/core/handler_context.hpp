// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsm/core/codec.hpp"
#include "rsm/core/errors.hpp"
#include "rsm/core/event.hpp"
#include "rsm/core/ids.hpp"
#include "rsm/core/machine_class.hpp"

namespace rsm {

/// Transactional access to one machine's persistent fields. Registers use an
/// empty key; dictionary entries use the encoded dictionary key.
class PersistentView {
 public:
  virtual ~PersistentView() = default;
  virtual std::optional<Bytes> read(const std::string& field, ByteView key) = 0;
  virtual void write(const std::string& field, ByteView key, Bytes value) = 0;
  virtual void erase(const std::string& field, ByteView key) = 0;
  /// All entries of a dictionary as this transaction sees them, in key order.
  virtual std::vector<std::pair<Bytes, Bytes>> scan(const std::string& field) = 0;
};

/// Source of handler nondeterminism. The testkit records and replays it.
class Nondet {
 public:
  virtual ~Nondet() = default;
  /// Uniform value in [0, bound); bound > 0.
  virtual std::uint64_t next(std::uint64_t bound) = 0;
};

/// Hands out fresh machine ids for `create`.
class IdSource {
 public:
  virtual ~IdSource() = default;
  virtual RsmId allocate(const std::optional<std::string>& placement) = 0;
};

struct Announcement {
  std::string topic;
  Bytes payload;
};

/// The API a handler sees while processing one event. Confined to that
/// handler execution; every persistent access goes through the transaction
/// behind `PersistentView`.
class HandlerContext {
 public:
  HandlerContext(const MachineClass& cls, RsmId self, Event current, std::string state, PersistentView& persistent,
                 std::map<std::string, Bytes>& volatile_fields, IdSource& ids, Nondet& nondet, const Program& program);

  HandlerContext(const HandlerContext&) = delete;
  HandlerContext& operator=(const HandlerContext&) = delete;

  const RsmId& self() const { return self_; }
  const Event& event() const { return current_; }
  const MachineClass& machine_class() const { return cls_; }
  /// The state the handler was dispatched in.
  const std::string& state() const { return state_; }

  template <typename T>
  T payload() const {
    return decode<T>(current_.payload());
  }

  // Output. Nothing leaves the machine until the transaction commits.
  void send(const RsmId& dest, std::uint32_t event_type, Bytes payload);
  template <typename T>
  void send(const RsmId& dest, std::uint32_t event_type, const T& value) {
    send(dest, event_type, encode(value));
  }
  RsmId create(const std::string& class_name, const std::optional<std::string>& placement = std::nullopt);

  // Persistent registers.
  Bytes load(const std::string& field);
  void store(const std::string& field, Bytes value);
  template <typename T>
  T load_as(const std::string& field) {
    return decode<T>(load(field));
  }
  template <typename T>
  void store_as(const std::string& field, const T& value) {
    store(field, encode(value));
  }

  // Persistent dictionaries.
  std::optional<Bytes> lookup(const std::string& field, ByteView key);
  void put(const std::string& field, ByteView key, Bytes value);
  void remove(const std::string& field, ByteView key);
  std::vector<std::pair<Bytes, Bytes>> entries(const std::string& field);
  template <typename V, typename K>
  std::optional<V> lookup_as(const std::string& field, const K& key) {
    auto raw = lookup(field, encode(key));
    if (!raw) return std::nullopt;
    return decode<V>(*raw);
  }
  template <typename K, typename V>
  void put_as(const std::string& field, const K& key, const V& value) {
    put(field, encode(key), encode(value));
  }
  template <typename K>
  void remove_as(const std::string& field, const K& key) {
    remove(field, encode(key));
  }

  // Volatile fields: plain memory, reset on failure.
  const Bytes& read_volatile(const std::string& field) const;
  void write_volatile(const std::string& field, Bytes value);
  template <typename T>
  T volatile_as(const std::string& field) const {
    return decode<T>(read_volatile(field));
  }
  template <typename T>
  void set_volatile(const std::string& field, const T& value) {
    write_volatile(field, encode(value));
  }

  /// Deferred: takes effect when the transaction commits.
  void jump(const std::string& state);
  /// Deferred: the machine stops processing events once this handler commits.
  void halt();
  /// Published to monitors after commit.
  void announce(std::string topic, Bytes payload = {});
  std::uint64_t random(std::uint64_t bound);

  // Runtime side.
  void close() { closed_ = true; }
  bool closed() const { return closed_; }
  const std::vector<OutputRecord>& outputs() const { return outputs_; }
  const std::optional<std::string>& pending_state() const { return pending_state_; }
  bool halt_requested() const { return halt_; }
  const std::vector<Announcement>& announcements() const { return announcements_; }

 private:
  void check_open() const {
    if (closed_) throw ContextClosedError();
  }
  void check_register(const std::string& field) const;
  void check_map(const std::string& field) const;

  const MachineClass& cls_;
  RsmId self_;
  Event current_;
  std::string state_;
  PersistentView& persistent_;
  std::map<std::string, Bytes>& volatile_;
  IdSource& ids_;
  Nondet& nondet_;
  const Program& program_;

  std::vector<OutputRecord> outputs_;
  std::optional<std::string> pending_state_;
  bool halt_ = false;
  std::vector<Announcement> announcements_;
  bool closed_ = false;
};

}  // namespace rsm
