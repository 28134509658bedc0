// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "rsm/core/codec.hpp"
#include "rsm/core/ids.hpp"

namespace rsm {

/// Reserved event type of machine-creation records. The payload of a
/// creation record is the target class name.
inline constexpr std::uint32_t kCreateEventType = 0xFFFFFFFFu;

/// (source, event type, payload). Immutable once built.
class Event {
 public:
  Event() = default;
  Event(RsmId source, std::uint32_t type, Bytes payload)
      : source_(std::move(source)), type_(type), payload_(std::move(payload)) {}

  const RsmId& source() const { return source_; }
  std::uint32_t type() const { return type_; }
  const Bytes& payload() const { return payload_; }
  bool is_creation() const { return type_ == kCreateEventType; }

  bool operator==(const Event&) const = default;

 private:
  RsmId source_;
  std::uint32_t type_ = 0;
  Bytes payload_;
};

template <>
struct Codec<Event> {
  static void encode_to(Writer& w, const Event& e) {
    Codec<RsmId>::encode_to(w, e.source());
    w.u32(e.type());
    w.blob(e.payload());
  }
  static Event decode_from(Reader& r) {
    auto source = Codec<RsmId>::decode_from(r);
    auto type = r.u32();
    auto payload = r.blob();
    return Event(std::move(source), type, std::move(payload));
  }
};

/// An entry a handler appends to its output buffer: a send to `dest`, or a
/// creation record when `event_type == kCreateEventType`.
struct OutputRecord {
  RsmId dest;
  std::uint32_t event_type = 0;
  Bytes payload;

  bool is_creation() const { return event_type == kCreateEventType; }
  std::string class_name() const { return to_string(payload); }
  bool operator==(const OutputRecord&) const = default;
};

template <>
struct Codec<OutputRecord> {
  static void encode_to(Writer& w, const OutputRecord& o) {
    Codec<RsmId>::encode_to(w, o.dest);
    w.u32(o.event_type);
    w.blob(o.payload);
  }
  static OutputRecord decode_from(Reader& r) {
    OutputRecord o;
    o.dest = Codec<RsmId>::decode_from(r);
    o.event_type = r.u32();
    o.payload = r.blob();
    return o;
  }
};

}  // namespace rsm
