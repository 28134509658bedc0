// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "rsm/core/codec.hpp"

namespace rsm::storage {

/// CRC-32C (Castagnoli), as used by the log and wire formats.
std::uint32_t crc32c(ByteView data);

}  // namespace rsm::storage
