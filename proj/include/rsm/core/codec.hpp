// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "rsm/core/errors.hpp"

namespace rsm {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(ByteView b) { return std::string(b.begin(), b.end()); }

/// Appends canonical little-endian encodings to a byte buffer.
class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v)); }
  // Big-endian; used for order-preserving keys.
  void u64_be(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void raw(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  // u32 length prefix followed by the bytes.
  void blob(ByteView b) {
    u32(static_cast<std::uint32_t>(b.size()));
    raw(b);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes& out_;
};

/// Bounds-checked cursor over an encoded buffer. Underruns throw DecodeError.
class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  std::uint8_t u8() { return get_le<std::uint8_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_le<std::uint64_t>()); }
  std::uint64_t u64_be() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  ByteView raw(std::size_t n) {
    need(n);
    auto view = data_.subspan(pos_, n);
    pos_ += n;
    return view;
  }
  Bytes blob() {
    auto n = u32();
    auto view = raw(n);
    return Bytes(view.begin(), view.end());
  }
  std::string str() {
    auto n = u32();
    return to_string(raw(n));
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DecodeError("buffer underrun");
  }
  template <typename T>
  T get_le() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  ByteView data_;
  std::size_t pos_ = 0;
};

/// Payload codec. Specialize `encode_to`/`decode_from` for application types.
template <typename T>
struct Codec;

template <>
struct Codec<std::int64_t> {
  static void encode_to(Writer& w, std::int64_t v) { w.i64(v); }
  static std::int64_t decode_from(Reader& r) { return r.i64(); }
};

template <>
struct Codec<std::uint64_t> {
  static void encode_to(Writer& w, std::uint64_t v) { w.u64(v); }
  static std::uint64_t decode_from(Reader& r) { return r.u64(); }
};

template <>
struct Codec<bool> {
  static void encode_to(Writer& w, bool v) { w.u8(v ? 1 : 0); }
  static bool decode_from(Reader& r) { return r.u8() != 0; }
};

template <>
struct Codec<std::string> {
  static void encode_to(Writer& w, const std::string& v) { w.str(v); }
  static std::string decode_from(Reader& r) { return r.str(); }
};

template <>
struct Codec<Bytes> {
  static void encode_to(Writer& w, const Bytes& v) { w.blob(v); }
  static Bytes decode_from(Reader& r) { return r.blob(); }
};

template <typename T>
Bytes encode(const T& value) {
  Bytes out;
  Writer w(out);
  Codec<T>::encode_to(w, value);
  return out;
}

template <typename T>
T decode(ByteView data) {
  Reader r(data);
  T value = Codec<T>::decode_from(r);
  if (!r.done()) throw DecodeError("trailing bytes after value");
  return value;
}

}  // namespace rsm
