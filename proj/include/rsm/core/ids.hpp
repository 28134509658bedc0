// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

#include "rsm/core/codec.hpp"

namespace rsm {

/// Globally unique machine identity: the hosting partition plus a counter that
/// partition hands out. Ordered lexicographically (partition, counter).
struct RsmId {
  std::string partition;
  std::uint64_t counter = 0;

  auto operator<=>(const RsmId&) const = default;

  /// The distinguished environment id ("env", 0).
  static RsmId environment() { return RsmId{"env", 0}; }
  bool is_environment() const { return partition == "env"; }

  std::string to_string() const { return partition + "#" + std::to_string(counter); }
  static RsmId parse(std::string_view text);
};

std::ostream& operator<<(std::ostream& os, const RsmId& id);

template <>
struct Codec<RsmId> {
  static void encode_to(Writer& w, const RsmId& id) {
    w.str(id.partition);
    w.u64(id.counter);
  }
  static RsmId decode_from(Reader& r) {
    RsmId id;
    id.partition = r.str();
    id.counter = r.u64();
    return id;
  }
};

/// Order-preserving key encoding: partition bytes, a 0x00 separator, then the
/// counter big-endian. Partition names never contain NUL.
void append_key(Bytes& out, const RsmId& id);
Bytes key_of(const RsmId& id);
RsmId id_from_key(Reader& r);

}  // namespace rsm

template <>
struct std::hash<rsm::RsmId> {
  std::size_t operator()(const rsm::RsmId& id) const noexcept {
    return std::hash<std::string>{}(id.partition) * 1000003u ^ std::hash<std::uint64_t>{}(id.counter);
  }
};
