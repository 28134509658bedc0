// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/semantics/config.hpp"

#include <algorithm>
#include <sstream>

namespace rsm::sem {

bool operator==(const LocalConfig& a, const LocalConfig& b) {
  return a.E == b.E && a.F == b.F && a.L == b.L && equal(a.s, b.s) && a.b == b.b;
}

FieldMap persistent_part(const ClassDef& c, const FieldMap& F) {
  FieldMap out;
  for (const auto& [f, v] : F)
    if (c.is_persistent(f)) out.emplace(f, v);
  return out;
}

FieldMap volatile_part(const ClassDef& c, const FieldMap& F) {
  FieldMap out;
  for (const auto& [f, v] : F)
    if (c.is_volatile(f)) out.emplace(f, v);
  return out;
}

FieldMap reset_fields(const ClassDef& c, const FieldMap& P) {
  FieldMap out = P;
  for (const auto& [f, n] : c.volatiles) out[f] = n;
  return out;
}

LocalEnv init_locals(const ClassDef& c, Value source, Value type, Value payload) {
  LocalEnv L;
  for (const auto& [x, n] : c.locals) L[x] = n;
  L[kSourceVar] = source;
  L[kTypeVar] = type;
  L[kPayloadVar] = payload;
  return L;
}

GlobalConfig initial_config(const Program& program) {
  GlobalConfig g;
  for (const auto& [id, cls] : program.machines) {
    const auto& c = program.at(cls);
    PersistentRecord rec;
    rec.C = cls;
    for (const auto& [f, n] : c.persistent) rec.P[f] = n;
    if (auto it = program.inboxes.find(id); it != program.inboxes.end()) {
      for (const auto& ev : it->second) rec.I.insert(rec.I.begin(), Event{ev.source, ev.type, ev.payload});
    }
    LocalConfig m;
    m.F = reset_fields(c, rec.P);
    g.M[id] = std::move(m);
    g.Pi[id] = std::move(rec);
  }
  return g;
}

std::string to_string(const Event& e) {
  return "(" + std::to_string(e.r) + "," + std::to_string(e.type) + "," + std::to_string(e.payload) + ")";
}

std::string to_string(const EventList& list) {
  if (list.empty()) return ".";
  std::string out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (i) out += ",";
    out += to_string(list[i]);
  }
  return out;
}

std::string to_string(const FieldMap& map) {
  if (map.empty()) return ".";
  std::string out;
  for (const auto& [k, v] : map) {
    if (!out.empty()) out += ",";
    out += k + "->" + std::to_string(v);
  }
  return out;
}

std::string to_string(const LocalConfig& m) {
  return to_string(m.E) + "; " + to_string(m.F) + "; " + to_string(m.L) + "; " + to_sexpr(m.s) + "; " +
         std::to_string(m.b);
}

std::string to_string(const PersistentRecord& p) {
  return p.C + "; " + to_string(p.I) + "; " + to_string(p.O) + "; " + to_string(p.P) + "; " + to_string(p.T);
}

std::string to_string(const GlobalConfig& g) {
  std::ostringstream out;
  for (const auto& [id, m] : g.M) out << "M(" << id << ") = " << to_string(m) << "\n";
  for (const auto& [id, p] : g.Pi) out << "Pi(" << id << ") = " << to_string(p) << "\n";
  return out.str();
}

Oracle::Oracle(std::uint64_t seed, Value star_domain, Value first_id)
    : rng_(seed), star_domain_(std::max<Value>(star_domain, 1)), next_id_(first_id) {}

Oracle::Oracle(Choices tape, std::uint64_t seed, Value star_domain, Value first_id)
    : tape_(std::move(tape)),
      rng_(seed),
      star_domain_(std::max<Value>(star_domain, 1)),
      next_id_(first_id),
      replaying_(true) {}

Value Oracle::star() {
  Value v;
  if (star_pos_ < tape_.stars.size()) {
    v = tape_.stars[star_pos_++];
  } else {
    overran_ = overran_ || replaying_;
    v = static_cast<Value>(rng_() % static_cast<std::uint64_t>(star_domain_));
  }
  consumed_.stars.push_back(v);
  return v;
}

Value Oracle::fresh() {
  Value v;
  if (id_pos_ < tape_.ids.size()) {
    v = tape_.ids[id_pos_++];
    next_id_ = std::max(next_id_, v + 1);
  } else {
    overran_ = overran_ || replaying_;
    v = next_id_++;
  }
  consumed_.ids.push_back(v);
  return v;
}

}  // namespace rsm::sem
