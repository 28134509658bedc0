// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rsm/net/transport.hpp"
#include "rsm/runtime/host.hpp"

namespace rsm::runtime {

/// Thrown from the commit hook to kill a host mid-transaction.
struct SimulatedCrash {
  std::string partition;
  CommitKind kind;
  RsmId machine;
};

struct SimOptions {
  std::vector<std::string> partitions{"p0"};
  /// Template for every host; `partition` and `partitions` are overwritten.
  HostConfig host;
  net::FaultOptions faults;
  /// Crash the committing host at every Nth commit across the cluster;
  /// 0 disables.
  std::uint64_t crash_every = 0;
  /// Which commit kinds count towards crash_every; empty means all.
  std::vector<CommitKind> crash_kinds;
  std::uint64_t seed = 1;
  /// Log files go here when set; otherwise stores live in memory.
  std::filesystem::path store_dir;
  net::Millis tick{10};
};

struct SimStats {
  std::uint64_t steps = 0;
  std::uint64_t commits = 0;
  std::uint64_t crashes = 0;
  net::Millis virtual_time{0};
};

/// Several hosts over a seeded faulty network and a virtual clock, driven
/// from the calling thread. Every task choice comes from one RNG, so a run
/// is reproducible from its seed.
class SimCluster {
 public:
  SimCluster(const Program& program, SimOptions options);
  ~SimCluster();

  MachineHost& host(const std::string& partition);
  const std::vector<std::string>& partitions() const { return options_.partitions; }

  /// Environment requests, entered at `via` (the first partition by
  /// default). Retried until they commit if a crash interrupts them.
  RsmId create(const std::string& class_name, const std::optional<std::string>& placement = std::nullopt,
               const std::string& via = {});
  void send(const RsmId& dest, std::uint32_t event_type, Bytes payload, const std::string& via = {});

  /// One scheduling decision. False once the cluster is quiescent.
  bool step();
  /// Steps until quiescent or `max_steps`; true when quiescent.
  bool run(std::uint64_t max_steps = UINT64_MAX);
  bool quiescent() const;

  /// Crashes a host now and recovers it from its store.
  void crash(const std::string& partition);

  /// Observers survive crashes.
  void set_observer(Observer observer);
  using EnvRecord = std::pair<RsmId, OutputRecord>;
  const std::vector<EnvRecord>& env_outputs() const { return env_outputs_; }
  /// Extra hook run before every commit, after crash injection is decided.
  void set_commit_hook(CommitHook hook);

  SimStats stats() const;
  net::FaultStats network_stats() const { return transport_->stats(); }
  net::Millis now() const { return now_; }

 private:
  void start_host(const std::string& partition);
  CommitDecision on_commit(const std::string& partition, CommitPoint& point);
  const std::string& entry(const std::string& via) const;
  bool try_task(std::size_t index);

  const Program& program_;
  SimOptions options_;
  net::Millis now_{0};
  std::unique_ptr<net::FaultyTransport> transport_;
  std::map<std::string, std::shared_ptr<storage::Store>> stores_;
  std::map<std::string, std::unique_ptr<MachineHost>> hosts_;
  std::mt19937_64 rng_;
  Observer observer_;
  CommitHook user_hook_;
  std::vector<EnvRecord> env_outputs_;
  SimStats stats_;
};

}  // namespace rsm::runtime
