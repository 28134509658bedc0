// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsm/core/machine_class.hpp"
#include "rsm/runtime/host.hpp"
#include "rsm/testkit/explorer.hpp"

namespace rsm::apps::poolserver {

/// Event types. Client requests go to a PoolManager; the provider talks to
/// ResourceManagers.
enum : std::uint32_t {
  // client -> PM
  kCreatePool = 1,
  kResizePool = 2,
  kDeletePool = 3,
  kGetPool = 4,
  // PM -> client
  kPoolStatus = 5,
  // PM <-> RM
  kCreateResource = 10,
  kDeleteResource = 11,
  kResourceCreated = 12,
  kResourceDeleted = 13,
  // RM <-> provider
  kAllocate = 20,
  kAllocated = 21,
  kAllocateFailed = 22,
  kDeallocate = 23,
  kDeallocated = 24,
  kDeallocateFailed = 25,
  kCheckHealth = 26,
  kHealth = 27,
};

struct Options {
  /// Mock provider behaviour, per request.
  double fail_probability = 0.1;
  double unhealthy_probability = 0.02;
  /// Health probes an RM makes after its resource comes up.
  std::uint64_t health_probes = 2;
  /// Mutants for the testkit.
  bool drop_creating_count = false;
  bool volatile_created_count = false;
};

/// PoolManager, ResourceManager and the mock ResourceProvider.
Program program(const Options& options = {});

Bytes create_pool_payload(std::uint64_t size, const RsmId& provider);

struct PoolStatus {
  std::string state;
  std::uint64_t goal = 0;
  std::uint64_t creating = 0;
  std::uint64_t created = 0;
  std::uint64_t deleting = 0;
  bool deleting_pool = false;
};
Bytes encode_status(const PoolStatus& s);
PoolStatus decode_status(const Bytes& b);

/// Client operations applied to one pool.
struct ClientOp {
  enum Kind { kCreate, kResize, kDelete } kind;
  std::uint64_t size = 0;
};

/// Immediately after every ScaleUp/ScaleDown, resources being created plus
/// resources created equal the goal (zero once the pool is being deleted).
testkit::MonitorFactory property1();
/// The pool eventually holds exactly the last requested number of healthy
/// resources and the manager reports it ready.
testkit::MonitorFactory property2();
/// After DeletePool, every resource manager and the pool manager eventually
/// halt.
testkit::MonitorFactory property3();

/// At quiescence every resource the provider holds belongs to a live RM
/// that knows it, and vice versa.
std::optional<std::string> garbage_check(runtime::MachineHost& host);

testkit::Scenario scenario(const std::vector<ClientOp>& ops, const Options& options = {},
                           std::vector<testkit::MonitorFactory> monitors = {});

}  // namespace rsm::apps::poolserver
