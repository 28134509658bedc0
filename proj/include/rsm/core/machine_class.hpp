// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rsm/core/codec.hpp"

namespace rsm {

class HandlerContext;
using Handler = std::function<void(HandlerContext&)>;

/// A machine class: persistent and volatile fields with their initial
/// payloads, a start state, and per-state handlers keyed by event type.
/// Built once and shared read-only between threads.
class MachineClass {
 public:
  class Builder;

  const std::string& name() const { return name_; }
  const std::map<std::string, Bytes>& persistent_registers() const { return persistent_; }
  const std::set<std::string>& persistent_maps() const { return persistent_maps_; }
  const std::map<std::string, Bytes>& volatile_fields() const { return volatile_; }
  const std::string& start_state() const { return start_state_; }
  bool external() const { return external_; }

  bool has_state(const std::string& state) const { return states_.contains(state); }
  std::vector<std::string> state_names() const;
  /// nullptr when `state` has no handler for `event_type`.
  const Handler* handler(const std::string& state, std::uint32_t event_type) const;

  bool is_persistent_register(const std::string& f) const { return persistent_.contains(f); }
  bool is_persistent_map(const std::string& f) const { return persistent_maps_.contains(f); }
  bool is_volatile(const std::string& f) const { return volatile_.contains(f); }

 private:
  std::string name_;
  std::map<std::string, Bytes> persistent_;
  std::set<std::string> persistent_maps_;
  std::map<std::string, Bytes> volatile_;
  std::string start_state_;
  std::map<std::string, std::map<std::uint32_t, Handler>> states_;
  bool external_ = false;
};

class MachineClass::Builder {
 public:
  explicit Builder(std::string name);

  Builder& persistent(const std::string& field, Bytes initial);
  template <typename T>
  Builder& persistent(const std::string& field, const T& initial) {
    return persistent(field, encode(initial));
  }
  /// A persistent dictionary; keys absent until first stored.
  Builder& persistent_map(const std::string& field);
  Builder& volatile_field(const std::string& field, Bytes initial);
  template <typename T>
  Builder& volatile_field(const std::string& field, const T& initial) {
    return volatile_field(field, encode(initial));
  }
  Builder& state(const std::string& name);
  Builder& start(const std::string& name);
  Builder& on(const std::string& state, std::uint32_t event_type, Handler handler);
  /// Marks the class as a stand-in for an external service; the testkit never
  /// injects failures into it.
  Builder& external(bool value = true);

  /// Validates the class invariants and throws UsageError on violation.
  std::shared_ptr<const MachineClass> build();

 private:
  MachineClass cls_;
};

/// The program signature: every class a run may instantiate.
class Program {
 public:
  Program& add(std::shared_ptr<const MachineClass> cls);
  const MachineClass* find(const std::string& name) const;
  const MachineClass& at(const std::string& name) const;
  std::vector<std::string> class_names() const;

 private:
  std::map<std::string, std::shared_ptr<const MachineClass>> classes_;
};

}  // namespace rsm
