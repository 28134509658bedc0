// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rsm/core/ids.hpp"
#include "rsm/storage/store.hpp"

namespace rsm::runtime {

/// head/tail of one machine's slice of a shared queue map.
struct QueueBounds {
  std::uint64_t head = 0;
  std::uint64_t tail = 0;
  bool operator==(const QueueBounds&) const = default;
};

/// The inboxes (or outboxes) of every machine on a host. Either one durable
/// queue per machine, or a single shared map keyed (machine, index) whose
/// per-machine head and tail live in memory and are rebuilt by a scan on
/// recovery.
///
/// A queue may have one pushing and one popping transaction open at a time;
/// the host serializes them per machine.
class QueueFamily {
 public:
  QueueFamily(storage::Store& store, std::string family, bool shared);

  bool shared() const { return shared_; }
  const std::string& family() const { return family_; }

  /// Rebuilds the shared index from the store.
  void recover();
  /// Makes the machine's queue exist. Per-machine mode commits a metadata
  /// record; shared mode needs nothing.
  void ensure(const RsmId& id);
  /// Forgets the machine's queue; it must be empty.
  void release(const RsmId& id);

  void push(storage::Transaction& tx, const RsmId& id, Bytes item);
  std::optional<Bytes> pop(storage::Transaction& tx, const RsmId& id);
  /// The element `offset` places past what `tx` has popped.
  std::optional<Bytes> peek(storage::Transaction& tx, const RsmId& id, std::size_t offset = 0);

  // Committed view.
  std::size_t size(const RsmId& id) const;
  std::vector<Bytes> items(const RsmId& id) const;

  /// In-memory bounds (shared mode).
  std::map<RsmId, QueueBounds> bounds() const;
  /// Bounds recomputed by scanning the backing map.
  std::map<RsmId, QueueBounds> scan_bounds() const;

  std::string queue_name(const RsmId& id) const;

 private:
  struct Slot {
    QueueBounds committed;
    std::uint64_t reserved_head = 0;
    std::uint64_t reserved_tail = 0;
  };
  Bytes key(const RsmId& id, std::uint64_t index) const;
  Slot& slot_locked(const RsmId& id);

  storage::Store& store_;
  std::string family_;
  bool shared_;
  std::string map_name_;
  mutable std::mutex mu_;
  std::map<RsmId, Slot> slots_;
};

}  // namespace rsm::runtime
