// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/net/frame.hpp"

#include "rsm/storage/crc32c.hpp"

namespace rsm::net {

void append_frame(Bytes& out, const Frame& f) {
  Bytes body;
  Writer w(body);
  w.u8(static_cast<std::uint8_t>(f.kind));
  w.str(f.sender.partition);
  w.u64(f.sender.counter);
  w.u64(f.seq);
  w.str(f.dest.partition);
  w.u64(f.dest.counter);
  w.u32(f.event_type);
  w.blob(f.payload);
  auto crc = storage::crc32c(body);
  Writer o(out);
  o.u32(static_cast<std::uint32_t>(body.size() + 4));
  o.raw(body);
  o.u32(crc);
}

Bytes encode_frame(const Frame& frame) {
  Bytes out;
  append_frame(out, frame);
  return out;
}

Frame decode_frame(ByteView data, std::size_t& consumed) {
  if (data.size() < 4) throw FrameError("short frame header");
  Reader head(data);
  std::uint32_t length = head.u32();
  if (length < 5 || data.size() - 4 < length) throw FrameError("frame length exceeds buffer");
  auto body = data.subspan(4, length - 4);
  Reader tail(data.subspan(length, 4));
  if (storage::crc32c(body) != tail.u32()) throw FrameError("frame checksum mismatch");
  try {
    Reader r(body);
    Frame f;
    auto kind = r.u8();
    if (kind > 1) throw FrameError("unknown frame kind " + std::to_string(kind));
    f.kind = static_cast<FrameKind>(kind);
    f.sender.partition = r.str();
    f.sender.counter = r.u64();
    f.seq = r.u64();
    f.dest.partition = r.str();
    f.dest.counter = r.u64();
    f.event_type = r.u32();
    f.payload = r.blob();
    if (!r.done()) throw FrameError("trailing bytes in frame");
    consumed = 4 + length;
    return f;
  } catch (const DecodeError& e) {
    throw FrameError(std::string("malformed frame: ") + e.what());
  }
}

std::vector<Frame> decode_packet(ByteView packet) {
  std::vector<Frame> out;
  while (!packet.empty()) {
    std::size_t used = 0;
    out.push_back(decode_frame(packet, used));
    packet = packet.subspan(used);
  }
  return out;
}

}  // namespace rsm::net
