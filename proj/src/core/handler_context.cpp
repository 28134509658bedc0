// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/core/handler_context.hpp"

namespace rsm {

HandlerContext::HandlerContext(const MachineClass& cls, RsmId self, Event current, std::string state,
                               PersistentView& persistent, std::map<std::string, Bytes>& volatile_fields,
                               IdSource& ids, Nondet& nondet, const Program& program)
    : cls_(cls),
      self_(std::move(self)),
      current_(std::move(current)),
      state_(std::move(state)),
      persistent_(persistent),
      volatile_(volatile_fields),
      ids_(ids),
      nondet_(nondet),
      program_(program) {}

void HandlerContext::send(const RsmId& dest, std::uint32_t event_type, Bytes payload) {
  check_open();
  if (event_type == kCreateEventType) throw UsageError("event type 0xFFFFFFFF is reserved for creation records");
  outputs_.push_back(OutputRecord{dest, event_type, std::move(payload)});
}

RsmId HandlerContext::create(const std::string& class_name, const std::optional<std::string>& placement) {
  check_open();
  if (!program_.find(class_name)) throw UnknownClassError(class_name);
  RsmId id = ids_.allocate(placement);
  outputs_.push_back(OutputRecord{id, kCreateEventType, to_bytes(class_name)});
  return id;
}

void HandlerContext::check_register(const std::string& field) const {
  if (cls_.is_persistent_register(field)) return;
  if (cls_.is_volatile(field)) {
    throw FieldAccessError("field " + field + " of " + cls_.name() + " is volatile; use the volatile API");
  }
  if (cls_.is_persistent_map(field)) {
    throw FieldAccessError("field " + field + " of " + cls_.name() + " is a dictionary; use lookup/put");
  }
  throw UnknownFieldError("unknown persistent field " + cls_.name() + "." + field);
}

void HandlerContext::check_map(const std::string& field) const {
  if (cls_.is_persistent_map(field)) return;
  if (cls_.is_volatile(field) || cls_.is_persistent_register(field)) {
    throw FieldAccessError("field " + field + " of " + cls_.name() + " is not a persistent dictionary");
  }
  throw UnknownFieldError("unknown persistent dictionary " + cls_.name() + "." + field);
}

Bytes HandlerContext::load(const std::string& field) {
  check_open();
  check_register(field);
  auto value = persistent_.read(field, {});
  return value ? std::move(*value) : cls_.persistent_registers().at(field);
}

void HandlerContext::store(const std::string& field, Bytes value) {
  check_open();
  check_register(field);
  persistent_.write(field, {}, std::move(value));
}

std::optional<Bytes> HandlerContext::lookup(const std::string& field, ByteView key) {
  check_open();
  check_map(field);
  return persistent_.read(field, key);
}

void HandlerContext::put(const std::string& field, ByteView key, Bytes value) {
  check_open();
  check_map(field);
  persistent_.write(field, key, std::move(value));
}

void HandlerContext::remove(const std::string& field, ByteView key) {
  check_open();
  check_map(field);
  persistent_.erase(field, key);
}

std::vector<std::pair<Bytes, Bytes>> HandlerContext::entries(const std::string& field) {
  check_open();
  check_map(field);
  return persistent_.scan(field);
}

const Bytes& HandlerContext::read_volatile(const std::string& field) const {
  check_open();
  auto it = volatile_.find(field);
  if (it == volatile_.end()) {
    if (cls_.is_persistent_register(field) || cls_.is_persistent_map(field)) {
      throw FieldAccessError("field " + field + " of " + cls_.name() + " is persistent; use load/store");
    }
    throw UnknownFieldError("unknown volatile field " + cls_.name() + "." + field);
  }
  return it->second;
}

void HandlerContext::write_volatile(const std::string& field, Bytes value) {
  check_open();
  if (!cls_.is_volatile(field)) {
    if (cls_.is_persistent_register(field) || cls_.is_persistent_map(field)) {
      throw FieldAccessError("field " + field + " of " + cls_.name() + " is persistent; use load/store");
    }
    throw UnknownFieldError("unknown volatile field " + cls_.name() + "." + field);
  }
  volatile_[field] = std::move(value);
}

void HandlerContext::jump(const std::string& state) {
  check_open();
  if (!cls_.has_state(state)) throw UnknownStateError(state);
  pending_state_ = state;
}

void HandlerContext::halt() {
  check_open();
  halt_ = true;
}

void HandlerContext::announce(std::string topic, Bytes payload) {
  check_open();
  announcements_.push_back(Announcement{std::move(topic), std::move(payload)});
}

std::uint64_t HandlerContext::random(std::uint64_t bound) {
  check_open();
  if (bound == 0) throw UsageError("random bound must be positive");
  return nondet_.next(bound);
}

}  // namespace rsm
