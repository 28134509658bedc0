// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/runtime/queues.hpp"

namespace rsm::runtime {

QueueFamily::QueueFamily(storage::Store& store, std::string family, bool shared)
    : store_(store), family_(std::move(family)), shared_(shared), map_name_(family_ + "$") {
  if (shared_) store_.ensure_map(map_name_);
}

std::string QueueFamily::queue_name(const RsmId& id) const { return family_ + "/" + id.to_string(); }

Bytes QueueFamily::key(const RsmId& id, std::uint64_t index) const {
  Bytes k = key_of(id);
  Writer(k).u64_be(index);
  return k;
}

QueueFamily::Slot& QueueFamily::slot_locked(const RsmId& id) { return slots_[id]; }

std::map<RsmId, QueueBounds> QueueFamily::scan_bounds() const {
  std::map<RsmId, QueueBounds> out;
  if (!shared_) return out;
  for (const auto& [k, _] : store_.scan(map_name_)) {
    Reader r(k);
    auto id = id_from_key(r);
    auto index = r.u64_be();
    auto [it, fresh] = out.try_emplace(id, QueueBounds{index, index + 1});
    if (!fresh) {
      it->second.head = std::min(it->second.head, index);
      it->second.tail = std::max(it->second.tail, index + 1);
    }
  }
  return out;
}

void QueueFamily::recover() {
  std::lock_guard lock(mu_);
  slots_.clear();
  for (const auto& [id, b] : scan_bounds()) slots_[id] = Slot{b, b.head, b.tail};
}

void QueueFamily::ensure(const RsmId& id) {
  if (shared_) return;
  store_.ensure_queue(queue_name(id));
}

void QueueFamily::release(const RsmId& id) {
  if (shared_) {
    std::lock_guard lock(mu_);
    slots_.erase(id);
    return;
  }
  if (!store_.has_queue(queue_name(id))) return;
  auto tx = store_.begin();
  tx.drop_collection(queue_name(id));
  tx.commit();
}

void QueueFamily::push(storage::Transaction& tx, const RsmId& id, Bytes item) {
  if (!shared_) {
    tx.enqueue(queue_name(id), std::move(item));
    return;
  }
  std::uint64_t index;
  {
    std::lock_guard lock(mu_);
    auto& s = slot_locked(id);
    index = s.reserved_tail++;
  }
  tx.set(map_name_, key(id, index), std::move(item));
  tx.on_commit([this, id, index] {
    std::lock_guard lock(mu_);
    auto& s = slot_locked(id);
    s.committed.tail = std::max(s.committed.tail, index + 1);
  });
  tx.on_abort([this, id] {
    std::lock_guard lock(mu_);
    auto& s = slot_locked(id);
    s.reserved_tail = s.committed.tail;
  });
}

std::optional<Bytes> QueueFamily::pop(storage::Transaction& tx, const RsmId& id) {
  if (!shared_) return tx.try_dequeue(queue_name(id));
  std::uint64_t index;
  {
    std::lock_guard lock(mu_);
    auto& s = slot_locked(id);
    if (s.reserved_head >= s.committed.tail) return std::nullopt;
    index = s.reserved_head++;
  }
  auto k = key(id, index);
  auto v = tx.get(map_name_, k);
  if (!v) throw Error("shared queue " + family_ + " lost entry " + std::to_string(index) + " of " + id.to_string());
  tx.erase(map_name_, k);
  tx.on_commit([this, id, index] {
    std::lock_guard lock(mu_);
    auto& s = slot_locked(id);
    s.committed.head = std::max(s.committed.head, index + 1);
  });
  tx.on_abort([this, id] {
    std::lock_guard lock(mu_);
    auto& s = slot_locked(id);
    s.reserved_head = s.committed.head;
  });
  return v;
}

std::optional<Bytes> QueueFamily::peek(storage::Transaction& tx, const RsmId& id, std::size_t offset) {
  if (!shared_) return tx.peek(queue_name(id), offset);
  std::uint64_t index;
  {
    std::lock_guard lock(mu_);
    auto& s = slot_locked(id);
    index = s.reserved_head + offset;
    if (index >= s.committed.tail) return std::nullopt;
  }
  return tx.get(map_name_, key(id, index));
}

std::size_t QueueFamily::size(const RsmId& id) const {
  if (!shared_) {
    auto name = queue_name(id);
    return store_.has_queue(name) ? store_.queue_size(name) : 0;
  }
  std::lock_guard lock(mu_);
  auto it = slots_.find(id);
  return it == slots_.end() ? 0 : static_cast<std::size_t>(it->second.committed.tail - it->second.committed.head);
}

std::vector<Bytes> QueueFamily::items(const RsmId& id) const {
  if (!shared_) {
    auto name = queue_name(id);
    return store_.has_queue(name) ? store_.queue_items(name) : std::vector<Bytes>{};
  }
  std::vector<Bytes> out;
  for (auto& [_, v] : store_.scan(map_name_, key_of(id))) out.push_back(v);
  return out;
}

std::map<RsmId, QueueBounds> QueueFamily::bounds() const {
  std::lock_guard lock(mu_);
  std::map<RsmId, QueueBounds> out;
  for (const auto& [id, s] : slots_)
    if (s.committed.tail > s.committed.head) out[id] = s.committed;
  return out;
}

}  // namespace rsm::runtime
