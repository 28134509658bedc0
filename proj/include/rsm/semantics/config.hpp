// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rsm/semantics/syntax.hpp"

namespace rsm::sem {

/// (r, n_e, n_p): destination (or, in an inbox, source), type, payload.
struct Event {
  Value r = 0;
  Value type = 0;
  Value payload = 0;
  bool operator==(const Event&) const = default;
};

/// Newest first: index 0 is the most recently added element, so
/// "(n1, n2, n3), E" is an insertion at the front and the oldest element is
/// back().
using EventList = std::vector<Event>;
using FieldMap = std::map<std::string, Value>;
using LocalEnv = std::map<std::string, Value>;

/// M(r) = E; F; L; s; b
struct LocalConfig {
  EventList E;
  FieldMap F;
  LocalEnv L;
  StmtPtr s = skip();
  int b = 0;
};

bool operator==(const LocalConfig& a, const LocalConfig& b);

/// Pi(r) = C; I; O; P; T
struct PersistentRecord {
  std::string C;
  EventList I;
  EventList O;
  FieldMap P;
  EventList T;
  bool operator==(const PersistentRecord&) const = default;
};

struct GlobalConfig {
  std::map<Value, LocalConfig> M;
  std::map<Value, PersistentRecord> Pi;
  bool operator==(const GlobalConfig&) const = default;
};

/// F restricted to the class's persistent fields.
FieldMap persistent_part(const ClassDef& c, const FieldMap& F);
FieldMap volatile_part(const ClassDef& c, const FieldMap& F);
/// resetF(C, P): P extended with the class's volatile initial values.
FieldMap reset_fields(const ClassDef& c, const FieldMap& P);
/// initL(C, n_s, n_e, n_p)
LocalEnv init_locals(const ClassDef& c, Value source, Value type, Value payload);

/// Every machine at rest with its initial inbox.
GlobalConfig initial_config(const Program& program);

std::string to_string(const Event& e);
std::string to_string(const EventList& list);
std::string to_string(const FieldMap& map);
std::string to_string(const LocalConfig& m);
std::string to_string(const PersistentRecord& p);
std::string to_string(const GlobalConfig& g);

/// Recorded values for the two sources of nondeterminism: star and fresh
/// machine ids.
struct Choices {
  std::vector<Value> stars;
  std::vector<Value> ids;
  bool operator==(const Choices&) const = default;
};

/// Supplies star values and fresh ids. Values are drawn from a replay tape
/// while it lasts and from a seeded generator afterwards; everything handed
/// out is recorded.
class Oracle {
 public:
  /// Fresh ids count up from `first_id`; star values lie in [0, star_domain).
  Oracle(std::uint64_t seed, Value star_domain, Value first_id);
  /// Replays `tape` first.
  Oracle(Choices tape, std::uint64_t seed, Value star_domain, Value first_id);

  Value star();
  Value fresh();

  const Choices& consumed() const { return consumed_; }
  /// True if some value was drawn after the replay tape ran out.
  bool overran() const { return overran_; }
  /// Replay values not yet consumed.
  std::size_t stars_left() const { return tape_.stars.size() - star_pos_; }
  std::size_t ids_left() const { return tape_.ids.size() - id_pos_; }
  Value next_id() const { return next_id_; }

 private:
  Choices tape_;
  std::size_t star_pos_ = 0;
  std::size_t id_pos_ = 0;
  std::mt19937_64 rng_;
  Value star_domain_;
  Value next_id_;
  Choices consumed_;
  bool overran_ = false;
  bool replaying_ = false;
};

}  // namespace rsm::sem
