// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/core/machine_class.hpp"

#include "rsm/core/errors.hpp"

namespace rsm {

std::vector<std::string> MachineClass::state_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : states_) out.push_back(name);
  return out;
}

const Handler* MachineClass::handler(const std::string& state, std::uint32_t event_type) const {
  auto it = states_.find(state);
  if (it == states_.end()) return nullptr;
  auto h = it->second.find(event_type);
  return h == it->second.end() ? nullptr : &h->second;
}

MachineClass::Builder::Builder(std::string name) { cls_.name_ = std::move(name); }

MachineClass::Builder& MachineClass::Builder::persistent(const std::string& field, Bytes initial) {
  cls_.persistent_[field] = std::move(initial);
  return *this;
}

MachineClass::Builder& MachineClass::Builder::persistent_map(const std::string& field) {
  cls_.persistent_maps_.insert(field);
  return *this;
}

MachineClass::Builder& MachineClass::Builder::volatile_field(const std::string& field, Bytes initial) {
  cls_.volatile_[field] = std::move(initial);
  return *this;
}

MachineClass::Builder& MachineClass::Builder::state(const std::string& name) {
  cls_.states_[name];
  return *this;
}

MachineClass::Builder& MachineClass::Builder::start(const std::string& name) {
  cls_.start_state_ = name;
  cls_.states_[name];
  return *this;
}

MachineClass::Builder& MachineClass::Builder::on(const std::string& state, std::uint32_t event_type, Handler handler) {
  if (!handler) throw UsageError("null handler for " + cls_.name_ + "." + state);
  cls_.states_[state][event_type] = std::move(handler);
  return *this;
}

MachineClass::Builder& MachineClass::Builder::external(bool value) {
  cls_.external_ = value;
  return *this;
}

std::shared_ptr<const MachineClass> MachineClass::Builder::build() {
  if (cls_.name_.empty()) throw UsageError("machine class needs a name");
  if (cls_.start_state_.empty() || !cls_.states_.contains(cls_.start_state_)) {
    throw UsageError("class " + cls_.name_ + " has no start state");
  }
  auto clash = [&](const std::string& f) {
    int n = cls_.persistent_.contains(f) + cls_.persistent_maps_.contains(f) + cls_.volatile_.contains(f);
    return n > 1;
  };
  for (const auto& [f, _] : cls_.persistent_)
    if (clash(f)) throw UsageError("field " + f + " declared twice in " + cls_.name_);
  for (const auto& f : cls_.persistent_maps_)
    if (clash(f)) throw UsageError("field " + f + " declared twice in " + cls_.name_);
  for (const auto& [f, _] : cls_.persistent_) {
    if (!f.empty() && f[0] == '$') throw UsageError("field names starting with '$' are reserved");
  }
  return std::make_shared<const MachineClass>(cls_);
}

Program& Program::add(std::shared_ptr<const MachineClass> cls) {
  auto name = cls->name();
  classes_[name] = std::move(cls);
  return *this;
}

const MachineClass* Program::find(const std::string& name) const {
  auto it = classes_.find(name);
  return it == classes_.end() ? nullptr : it->second.get();
}

const MachineClass& Program::at(const std::string& name) const {
  auto* cls = find(name);
  if (!cls) throw UnknownClassError(name);
  return *cls;
}

std::vector<std::string> Program::class_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : classes_) out.push_back(name);
  return out;
}

}  // namespace rsm
