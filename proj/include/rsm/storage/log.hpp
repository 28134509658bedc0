// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsm/core/codec.hpp"

namespace rsm::storage {

enum class OpCode : std::uint8_t {
  kSet = 1,
  kErase = 2,
  kEnqueue = 3,
  kDequeue = 4,
  kCreateQueue = 5,
  kCreateMap = 6,
  kDropCollection = 7,
};

struct WriteOp {
  std::string collection;
  OpCode op = OpCode::kSet;
  Bytes key;
  Bytes value;

  bool operator==(const WriteOp&) const = default;
};

/// One commit record:
///   [u32 LE length][u64 tx id][ops...][u32 CRC32C]
/// where length counts every byte after the length field, each op is
///   [u32 name len][name][u8 op][u32 key len][key][u32 value len][value]
/// and the CRC covers all preceding bytes of the record, length included.
struct LogRecord {
  std::uint64_t tx_id = 0;
  std::vector<WriteOp> ops;
};

Bytes encode_record(const LogRecord& record);

/// Outcome of parsing one record at the front of `data`.
struct ParsedRecord {
  enum class Status { kOk, kTruncated, kBadChecksum, kMalformed };
  Status status = Status::kOk;
  std::size_t size = 0;  // bytes consumed, valid when status == kOk or kBadChecksum
  LogRecord record;
};

ParsedRecord parse_record(ByteView data);

/// Per-record summary for offline inspection of a log file.
struct RecordInfo {
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  std::uint64_t tx_id = 0;
  std::size_t op_count = 0;
  ParsedRecord::Status status = ParsedRecord::Status::kOk;
};

std::vector<RecordInfo> dissect_log(const std::filesystem::path& path);
std::string to_string(ParsedRecord::Status status);

}  // namespace rsm::storage
