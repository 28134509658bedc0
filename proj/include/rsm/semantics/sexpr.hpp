// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rsm::sem {

/// A parsed s-expression: an atom or a list. Comments run from ';' to end
/// of line.
struct Sexpr {
  bool is_list = false;
  std::string atom;
  std::vector<Sexpr> items;
  int line = 0;

  bool is_atom() const { return !is_list; }
  bool is(const std::string& head) const;
  std::optional<std::int64_t> integer() const;
  std::string to_string() const;
};

/// All top-level forms in `text`.
std::vector<Sexpr> parse_sexprs(const std::string& text);

}  // namespace rsm::sem
