// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/semantics/sexpr.hpp"

#include <cctype>
#include <charconv>

#include "rsm/semantics/syntax.hpp"

namespace rsm::sem {

bool Sexpr::is(const std::string& head) const {
  return is_list && !items.empty() && items[0].is_atom() && items[0].atom == head;
}

std::optional<std::int64_t> Sexpr::integer() const {
  if (is_list || atom.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(atom.data(), atom.data() + atom.size(), v);
  if (ec != std::errc() || ptr != atom.data() + atom.size()) return std::nullopt;
  return v;
}

std::string Sexpr::to_string() const {
  if (!is_list) return atom;
  std::string out = "(";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ' ';
    out += items[i].to_string();
  }
  return out + ")";
}

namespace {

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  std::vector<Sexpr> all() {
    std::vector<Sexpr> out;
    for (skip_space(); pos_ < text_.size(); skip_space()) out.push_back(read());
    return out;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (c == '\n') ++line_;
        ++pos_;
      } else {
        break;
      }
    }
  }

  Sexpr read() {
    Sexpr out;
    out.line = line_;
    char c = text_[pos_];
    if (c == ')') throw ParseError("line " + std::to_string(line_) + ": unexpected ')'");
    if (c == '(') {
      out.is_list = true;
      ++pos_;
      for (;;) {
        skip_space();
        if (pos_ >= text_.size()) {
          throw ParseError("line " + std::to_string(out.line) + ": unterminated list");
        }
        if (text_[pos_] == ')') {
          ++pos_;
          return out;
        }
        out.items.push_back(read());
      }
    }
    auto start = pos_;
    while (pos_ < text_.size()) {
      char d = text_[pos_];
      if (d == '(' || d == ')' || d == ';' || std::isspace(static_cast<unsigned char>(d))) break;
      ++pos_;
    }
    out.atom = text_.substr(start, pos_ - start);
    return out;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

std::vector<Sexpr> parse_sexprs(const std::string& text) { return Reader(text).all(); }

}  // namespace rsm::sem
