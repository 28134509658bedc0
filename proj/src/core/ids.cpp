// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/core/ids.hpp"

#include <charconv>

namespace rsm {

RsmId RsmId::parse(std::string_view text) {
  auto hash = text.rfind('#');
  if (hash == std::string_view::npos || hash == 0) throw UsageError("malformed machine id '" + std::string(text) + "'");
  RsmId id;
  id.partition = std::string(text.substr(0, hash));
  auto digits = text.substr(hash + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id.counter);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
    throw UsageError("malformed machine id '" + std::string(text) + "'");
  }
  return id;
}

std::ostream& operator<<(std::ostream& os, const RsmId& id) { return os << id.to_string(); }

void append_key(Bytes& out, const RsmId& id) {
  Writer w(out);
  w.raw(id.partition);
  w.u8(0);
  w.u64_be(id.counter);
}

Bytes key_of(const RsmId& id) {
  Bytes out;
  append_key(out, id);
  return out;
}

RsmId id_from_key(Reader& r) {
  RsmId id;
  while (true) {
    auto c = r.u8();
    if (c == 0) break;
    id.partition.push_back(static_cast<char>(c));
  }
  id.counter = r.u64_be();
  return id;
}

}  // namespace rsm
