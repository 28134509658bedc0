// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/storage/log.hpp"

#include <fstream>
#include <iterator>

#include "rsm/storage/crc32c.hpp"

namespace rsm::storage {

Bytes encode_record(const LogRecord& record) {
  Bytes out;
  Writer w(out);
  w.u32(0);  // patched below
  w.u64(record.tx_id);
  for (const auto& op : record.ops) {
    w.str(op.collection);
    w.u8(static_cast<std::uint8_t>(op.op));
    w.blob(op.key);
    w.blob(op.value);
  }
  auto length = static_cast<std::uint32_t>(out.size() - 4 + 4);
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(length >> (8 * i));
  auto crc = crc32c(out);
  w.u32(crc);
  return out;
}

ParsedRecord parse_record(ByteView data) {
  ParsedRecord result;
  if (data.size() < 4) {
    result.status = ParsedRecord::Status::kTruncated;
    return result;
  }
  Reader head(data);
  std::uint64_t length = head.u32();
  if (length < 12) {
    result.status = ParsedRecord::Status::kMalformed;
    return result;
  }
  if (data.size() < 4 + length) {
    result.status = ParsedRecord::Status::kTruncated;
    return result;
  }
  result.size = 4 + length;
  auto body = data.subspan(0, result.size - 4);
  Reader tail(data.subspan(result.size - 4, 4));
  if (crc32c(body) != tail.u32()) {
    result.status = ParsedRecord::Status::kBadChecksum;
    return result;
  }
  try {
    Reader r(body.subspan(4));
    result.record.tx_id = r.u64();
    while (!r.done()) {
      WriteOp op;
      op.collection = r.str();
      auto code = r.u8();
      if (code < 1 || code > 7) throw DecodeError("bad op code");
      op.op = static_cast<OpCode>(code);
      op.key = r.blob();
      op.value = r.blob();
      result.record.ops.push_back(std::move(op));
    }
  } catch (const DecodeError&) {
    result.status = ParsedRecord::Status::kMalformed;
  }
  return result;
}

std::vector<RecordInfo> dissect_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<RecordInfo> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    auto parsed = parse_record(ByteView(data).subspan(pos));
    RecordInfo info;
    info.offset = pos;
    info.status = parsed.status;
    info.tx_id = parsed.record.tx_id;
    info.op_count = parsed.record.ops.size();
    info.size = parsed.status == ParsedRecord::Status::kTruncated || parsed.status == ParsedRecord::Status::kMalformed
                    ? data.size() - pos
                    : parsed.size;
    out.push_back(info);
    if (parsed.status == ParsedRecord::Status::kTruncated || parsed.status == ParsedRecord::Status::kMalformed) break;
    pos += parsed.size;
  }
  return out;
}

std::string to_string(ParsedRecord::Status status) {
  switch (status) {
    case ParsedRecord::Status::kOk:
      return "ok";
    case ParsedRecord::Status::kTruncated:
      return "truncated";
    case ParsedRecord::Status::kBadChecksum:
      return "bad-checksum";
    case ParsedRecord::Status::kMalformed:
      return "malformed";
  }
  return "?";
}

}  // namespace rsm::storage
