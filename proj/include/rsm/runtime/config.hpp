// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rsm/storage/store.hpp"

namespace rsm::runtime {

/// Host settings, loadable from a key=value file ('#' starts a comment):
///
///   partition = p0
///   store = /var/lib/rsm/p0.log      # omit for an in-memory store
///   partitions = p0,p1               # placement targets, round-robin
///   batch_size = 16
///   shared_queues = true
///   persistent_inbox = true
///   fsync = always|batched|never
///   seed = 1
///   address.p1 = 127.0.0.1:7001      # socket transport peers
struct HostConfig {
  std::string partition = "p0";
  std::string store_path;
  std::vector<std::string> partitions;
  std::uint32_t batch_size = 16;
  bool shared_queues = true;
  bool persistent_inbox = true;
  storage::FsyncPolicy fsync = storage::FsyncPolicy::kAlways;
  std::uint64_t seed = 1;
  std::chrono::milliseconds ack_timeout{50};
  std::chrono::milliseconds max_backoff{1000};
  std::uint32_t max_redeliveries = 5;
  /// Same-partition sends move outbox to inbox in one transaction instead
  /// of going through the transport.
  bool local_delivery = false;
  /// Ids reserved per durable counter bump.
  std::uint32_t id_block = 64;
  std::map<std::string, std::string> addresses;

  static HostConfig parse(std::string_view text);
  static HostConfig load(const std::string& path);
  std::string to_string() const;

  /// Throws UsageError on out-of-range values.
  void validate() const;
  /// partitions, or just this one when none are listed.
  std::vector<std::string> placement_targets() const;
};

}  // namespace rsm::runtime
