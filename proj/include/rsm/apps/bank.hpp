// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "rsm/core/machine_class.hpp"
#include "rsm/testkit/explorer.hpp"

namespace rsm::apps::bank {

enum : std::uint32_t { kOpen = 1, kTransfer = 2, kDeposit = 3, kBalance = 4 };

/// Account machines. Transfer(to, amount) debits when funds allow and sends
/// a Deposit; money is neither created nor lost.
Program program();

Bytes transfer_payload(const RsmId& to, std::int64_t amount);

/// Accounts opened with `initial` each, then `transfers` random transfers.
testkit::Scenario scenario(std::size_t accounts, std::int64_t initial, std::size_t transfers);

/// Sum of all account balances on a host.
std::int64_t total(runtime::MachineHost& host);

}  // namespace rsm::apps::bank
