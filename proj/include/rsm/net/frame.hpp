// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rsm/core/codec.hpp"
#include "rsm/core/errors.hpp"
#include "rsm/core/ids.hpp"

namespace rsm::net {

class FrameError : public Error {
 public:
  using Error::Error;
};

enum class FrameKind : std::uint8_t { kMessage = 0, kAck = 1 };

/// One logical transfer (or its acknowledgement). (sender, dest, seq)
/// identifies the transfer; retransmissions reuse it.
struct Frame {
  FrameKind kind = FrameKind::kMessage;
  RsmId sender;
  std::uint64_t seq = 0;
  RsmId dest;
  std::uint32_t event_type = 0;
  Bytes payload;

  bool operator==(const Frame&) const = default;
  Frame ack() const { return Frame{FrameKind::kAck, sender, seq, dest, event_type, {}}; }
};

/// Layout, little-endian:
///   u32 length of everything that follows
///   u8  kind
///   u32 len + bytes  sender partition, u64 sender counter
///   u64 seq
///   u32 len + bytes  dest partition, u64 dest counter
///   u32 event type, u32 payload length, payload
///   u32 CRC32C over kind..payload
Bytes encode_frame(const Frame& frame);
void append_frame(Bytes& out, const Frame& frame);

/// Decodes the frame at the start of `data`; `consumed` receives its size.
/// Throws FrameError on a short buffer, bad checksum or bad kind.
Frame decode_frame(ByteView data, std::size_t& consumed);

/// A packet is one or more frames back to back.
std::vector<Frame> decode_packet(ByteView packet);

}  // namespace rsm::net
