// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/runtime/sim_cluster.hpp"

#include <algorithm>

namespace rsm::runtime {

SimCluster::SimCluster(const Program& program, SimOptions options)
    : program_(program), options_(std::move(options)), rng_(options_.seed) {
  if (options_.partitions.empty()) throw UsageError("a cluster needs at least one partition");
  auto faults = options_.faults;
  faults.seed ^= options_.seed * 0x9E3779B97F4A7C15ull;
  transport_ = std::make_unique<net::FaultyTransport>(faults, [this] { return now_; });
  for (const auto& p : options_.partitions) start_host(p);
}

SimCluster::~SimCluster() {
  hosts_.clear();
  transport_.reset();
}

void SimCluster::start_host(const std::string& partition) {
  auto& store = stores_[partition];
  storage::StoreOptions so;
  so.fsync = options_.host.fsync;
  if (!store) {
    if (options_.store_dir.empty()) {
      store = storage::Store::in_memory(so);
    } else {
      std::filesystem::create_directories(options_.store_dir);
      store = storage::Store::open(options_.store_dir / (partition + ".log"), so);
    }
  }
  HostConfig cfg = options_.host;
  cfg.partition = partition;
  cfg.partitions = options_.partitions;
  cfg.seed = options_.host.seed ^ std::hash<std::string>{}(partition);
  auto host = std::make_unique<MachineHost>(cfg, store, program_, transport_.get(), [this] { return now_; });
  host->set_commit_hook([this, partition](CommitPoint& point) { return on_commit(partition, point); });
  host->set_env_sink([this](const RsmId& from, const OutputRecord& rec) { env_outputs_.emplace_back(from, rec); });
  if (observer_) host->set_observer(observer_);
  hosts_[partition] = std::move(host);
}

CommitDecision SimCluster::on_commit(const std::string& partition, CommitPoint& point) {
  bool counted = options_.crash_kinds.empty() ||
                 std::find(options_.crash_kinds.begin(), options_.crash_kinds.end(), point.kind) !=
                     options_.crash_kinds.end();
  if (counted) {
    ++stats_.commits;
    if (options_.crash_every > 0 && stats_.commits % options_.crash_every == 0) {
      throw SimulatedCrash{partition, point.kind, point.machine};
    }
  }
  return user_hook_ ? user_hook_(point) : CommitDecision::kCommit;
}

void SimCluster::crash(const std::string& partition) {
  auto it = hosts_.find(partition);
  if (it == hosts_.end()) throw UsageError("unknown partition " + partition);
  ++stats_.crashes;
  it->second.reset();
  if (!options_.store_dir.empty()) {
    // Drop the open log and recover from the file.
    stores_[partition]->close();
    stores_[partition].reset();
  }
  start_host(partition);
}

MachineHost& SimCluster::host(const std::string& partition) {
  auto it = hosts_.find(partition);
  if (it == hosts_.end()) throw UsageError("unknown partition " + partition);
  return *it->second;
}

const std::string& SimCluster::entry(const std::string& via) const {
  return via.empty() ? options_.partitions.front() : via;
}

RsmId SimCluster::create(const std::string& class_name, const std::optional<std::string>& placement,
                         const std::string& via) {
  const auto& p = entry(via);
  for (;;) {
    try {
      return host(p).create_machine(class_name, placement);
    } catch (const SimulatedCrash& c) {
      crash(c.partition);
    }
  }
}

void SimCluster::send(const RsmId& dest, std::uint32_t event_type, Bytes payload, const std::string& via) {
  const auto& p = entry(via);
  for (;;) {
    try {
      host(p).env_send(dest, event_type, payload);
      return;
    } catch (const SimulatedCrash& c) {
      crash(c.partition);
    }
  }
}

void SimCluster::set_observer(Observer observer) {
  observer_ = std::move(observer);
  for (auto& [_, h] : hosts_) h->set_observer(observer_);
}

void SimCluster::set_commit_hook(CommitHook hook) { user_hook_ = std::move(hook); }

bool SimCluster::quiescent() const {
  if (transport_->in_flight() > 0) return false;
  return std::all_of(hosts_.begin(), hosts_.end(), [](const auto& h) { return h.second->idle(); });
}

namespace {

struct Task {
  enum Kind { kHandle, kDrain, kDeliver } kind;
  std::string partition;
  RsmId id;
};

}  // namespace

bool SimCluster::step() {
  ++stats_.steps;
  std::vector<Task> tasks;
  for (const auto& p : options_.partitions) {
    auto& h = *hosts_.at(p);
    for (const auto& id : h.machines()) {
      if (!h.halted(id) && (h.inbox_size(id) > 0 || h.volatile_inbox_size(id) > 0)) {
        tasks.push_back({Task::kHandle, p, id});
      }
    }
    for (const auto& id : h.senders()) {
      if (h.outbox_size(id) > 0 || h.drain_pending(id)) tasks.push_back({Task::kDrain, p, id});
    }
  }
  auto due = transport_->next_due();
  if (due && *due <= now_) tasks.push_back({Task::kDeliver, {}, {}});
  std::shuffle(tasks.begin(), tasks.end(), rng_);

  for (const auto& t : tasks) {
    try {
      bool progressed = false;
      switch (t.kind) {
        case Task::kHandle:
          progressed = hosts_.at(t.partition)->handle_step(t.id);
          break;
        case Task::kDrain:
          progressed = hosts_.at(t.partition)->drain_step(t.id);
          break;
        case Task::kDeliver:
          progressed = transport_->deliver_one();
          break;
      }
      if (progressed) return true;
    } catch (const SimulatedCrash& c) {
      crash(c.partition);
      return true;
    }
  }

  if (quiescent()) return false;
  // Nothing runnable now: move the clock to the next timer.
  auto target = now_ + options_.tick;
  if (due && *due > now_ && *due < target) target = *due;
  now_ = target;
  stats_.virtual_time = now_;
  for (auto& [_, h] : hosts_) h->tick();
  return true;
}

bool SimCluster::run(std::uint64_t max_steps) {
  for (std::uint64_t i = 0; i < max_steps; ++i) {
    if (!step()) return true;
  }
  return quiescent();
}

SimStats SimCluster::stats() const {
  auto s = stats_;
  s.virtual_time = now_;
  return s;
}

}  // namespace rsm::runtime
