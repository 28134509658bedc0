// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rsm/core/event.hpp"
#include "rsm/core/handler_context.hpp"
#include "rsm/core/machine_class.hpp"
#include "rsm/net/frame.hpp"
#include "rsm/net/transport.hpp"
#include "rsm/runtime/config.hpp"
#include "rsm/runtime/queues.hpp"
#include "rsm/storage/store.hpp"

namespace rsm::runtime {

/// Names of the host's durable collections.
namespace layout {
inline constexpr const char* kHosted = "hosted";        // id -> class name
inline constexpr const char* kTombstones = "tombstones";  // id -> class name
inline constexpr const char* kFields = "fields";        // (id, field, key) -> value
inline constexpr const char* kMeta = "meta";
inline constexpr const char* kSendCounters = "send_counter";  // (self, peer) -> u64
inline constexpr const char* kRecvCounters = "recv_counter";  // (self, peer) -> u64
inline constexpr const char* kDeadLetters = "deadletter";
inline constexpr const char* kStateField = "$state";
}  // namespace layout

/// Where a host is about to commit.
enum class CommitKind { kHandler, kIngest, kCreate, kDrain, kTransfer, kEnv };
const char* to_string(CommitKind kind);

struct CommitPoint {
  CommitKind kind;
  RsmId machine;
  storage::Transaction& tx;
  /// Handler commits: the events handled in this transaction.
  const std::vector<Event>* events = nullptr;
  /// Handler commits: ids and random values drawn by the handlers.
  const std::vector<RsmId>* ids_drawn = nullptr;
  const std::vector<std::uint64_t>* random_drawn = nullptr;
};

enum class CommitDecision { kCommit, kAbortAndReset };

/// Called just before every commit. May throw to simulate a process crash
/// (the host must then be discarded), or ask for the handler transaction to
/// be abandoned as if the machine had failed.
using CommitHook = std::function<CommitDecision(CommitPoint&)>;

/// Published after a handler transaction commits.
struct HandledEvent {
  RsmId machine;
  std::string machine_class;
  Event event;
  std::string state_before;
  std::string state_after;
  std::vector<OutputRecord> outputs;
  std::vector<Announcement> announcements;
  bool halted = false;
};
using Observer = std::function<void(const HandledEvent&)>;

/// Receives events addressed to the environment after the sending drain
/// commits. Runs with the sender's drain locked: it may call env_send but
/// must not wait for the host.
using EnvSink = std::function<void(const RsmId& from, const OutputRecord& record)>;

struct HostStats {
  std::uint64_t handled = 0;          // events whose handler committed
  std::uint64_t handler_commits = 0;  // transactions, one per batch
  std::uint64_t handler_aborts = 0;
  std::uint64_t ingested = 0;         // messages accepted into an inbox
  std::uint64_t duplicates = 0;       // messages dropped as already seen
  std::uint64_t out_of_order = 0;     // messages dropped as ahead of sequence
  std::uint64_t unknown_dest = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t retransmits = 0;
  std::uint64_t acks_sent = 0;
  std::uint64_t created = 0;
  std::uint64_t dead_letters = 0;
  std::uint64_t malformed = 0;
  std::uint64_t env_delivered = 0;
};

struct DeadLetter {
  RsmId machine;
  Event event;
  std::string reason;
};

/// One partition's runtime: hosts machines over a durable store and moves
/// their messages with the exactly-once delivery protocol.
///
/// Per machine there are three tasks, each safe to run concurrently with the
/// others: `handle_step` (the event loop), `drain_step` plus `tick` (the
/// outbox), and `on_packet` (ingestion). Nothing runs on its own; a runner
/// (threads or a simulator) calls the tasks.
class MachineHost {
 public:
  /// Recovers the store and rehydrates every hosted machine.
  MachineHost(HostConfig config, std::shared_ptr<storage::Store> store, const Program& program,
              net::Transport* transport, net::Clock clock = net::steady_clock());
  ~MachineHost();
  MachineHost(const MachineHost&) = delete;
  MachineHost& operator=(const MachineHost&) = delete;

  const std::string& partition() const { return config_.partition; }
  const HostConfig& config() const { return config_; }
  storage::Store& store() { return *store_; }
  /// This host's identity when it speaks for the environment.
  const RsmId& env_client() const { return env_client_; }

  // ---- environment ----
  /// Asks for a new machine; placed round-robin unless `placement` names a
  /// partition. Delivered exactly once like any creation record.
  RsmId create_machine(const std::string& class_name, const std::optional<std::string>& placement = std::nullopt);
  /// Queues an event from the environment; exactly-once to `dest`.
  void env_send(const RsmId& dest, std::uint32_t event_type, Bytes payload);
  void set_env_sink(EnvSink sink);

  // ---- tasks ----
  /// One event-loop iteration: up to batch_size events in one transaction.
  /// False when the machine had nothing to do.
  bool handle_step(const RsmId& id);
  /// Advances the outbox of `sender` (a machine or env_client()): commits a
  /// fully acknowledged batch or starts the next one. False when idle or
  /// still waiting for acks.
  bool drain_step(const RsmId& sender);
  /// Retransmits unacknowledged frames whose timeout expired.
  void tick();
  void on_packet(const std::string& from, ByteView packet);

  // ---- hooks ----
  void set_commit_hook(CommitHook hook);
  void set_observer(Observer observer);
  /// Next handler run of `id` draws these ids and random values first.
  void replay_next_attempt(const RsmId& id, std::vector<RsmId> ids, std::vector<std::uint64_t> random);
  /// Blocks until work may be available or the timeout passes.
  void wait_for_work(std::chrono::milliseconds timeout);
  void notify_work();

  // ---- introspection (committed state) ----
  /// Live machines, including halted ones still draining their outbox.
  std::vector<RsmId> machines() const;
  /// Senders with an outbox: machines plus the env client.
  std::vector<RsmId> senders() const;
  bool hosts(const RsmId& id) const;
  bool halted(const RsmId& id) const;
  bool tombstoned(const RsmId& id) const;
  std::optional<std::string> class_of(const RsmId& id) const;
  std::string current_state(const RsmId& id) const;
  Bytes field(const RsmId& id, const std::string& name) const;
  std::optional<Bytes> map_entry(const RsmId& id, const std::string& map, ByteView key) const;
  std::vector<std::pair<Bytes, Bytes>> map_entries(const RsmId& id, const std::string& map) const;
  std::size_t inbox_size(const RsmId& id) const;
  std::size_t outbox_size(const RsmId& id) const;
  std::vector<Event> inbox(const RsmId& id) const;
  std::vector<OutputRecord> outbox(const RsmId& id) const;
  bool drain_pending(const RsmId& sender) const;
  std::uint64_t send_counter(const RsmId& self, const RsmId& peer) const;
  std::uint64_t receive_counter(const RsmId& self, const RsmId& peer) const;
  std::map<std::pair<RsmId, RsmId>, std::uint64_t> send_counters() const;
  std::map<std::pair<RsmId, RsmId>, std::uint64_t> receive_counters() const;
  std::vector<DeadLetter> dead_letters() const;
  const QueueFamily& inboxes() const { return *inboxes_; }
  const QueueFamily& outboxes() const { return *outboxes_; }
  /// Events held in memory by the non-persistent inbox.
  std::size_t volatile_inbox_size(const RsmId& id) const;
  HostStats stats() const;
  /// True when no machine has inbox or outbox work and nothing awaits acks.
  bool idle() const;

 private:
  struct Pending {
    net::Frame frame;
    std::string to;
    bool acked = false;
  };
  struct Drain {
    std::optional<storage::Transaction> tx;
    std::vector<Pending> frames;
    std::vector<OutputRecord> env_outputs;
    std::map<RsmId, std::uint64_t> counters;  // next seq per peer in this tx
    net::Millis next_retry{0};
    net::Millis backoff{0};
  };
  struct VolatileItem {
    Event event;
    std::uint64_t seq;
    std::string reply_to;
    net::Frame ack;
  };
  struct Machine {
    RsmId id;
    const MachineClass* cls = nullptr;
    std::map<std::string, Bytes> volatiles;
    bool halted = false;
    bool busy = false;
    std::uint32_t failures = 0;
    bool single_step = false;  // after a failure, retry one event at a time
    std::deque<VolatileItem> volatile_inbox;
    std::map<RsmId, std::uint64_t> volatile_pending;  // per sender, in memory
    std::vector<RsmId> replay_ids;
    std::vector<std::uint64_t> replay_random;
    std::uint64_t attempts = 0;
    std::mutex handler_mu;
    std::mutex ingest_mu;
  };
  struct SenderState {
    std::mutex mu;
    Drain drain;
  };

  void recover();
  std::shared_ptr<Machine> machine(const RsmId& id) const;
  std::shared_ptr<SenderState> sender_state(const RsmId& id);
  void add_live(const RsmId& id, const MachineClass& cls, bool halted);
  void reset_volatile(Machine& m);
  CommitDecision run_hook(CommitPoint& point);
  void send_packet(const std::string& to, Bytes packet);

  bool handle_durable(Machine& m);
  bool handle_volatile(Machine& m);
  void release_halted(Machine& m);
  void dead_letter(storage::Transaction& tx, const RsmId& id, const Event& e, const std::string& reason);

  bool start_drain(const RsmId& sender, SenderState& s);
  bool transfer_local(const RsmId& sender, const OutputRecord& rec, storage::Transaction& tx);
  void finish_drain(const RsmId& sender, SenderState& s);
  void transmit(Drain& d, bool only_unacked);

  void ingest(const std::string& from, const net::Frame& f);
  void ingest(const std::string& from, std::span<const net::Frame> run);
  void ingest_create(const std::string& from, const net::Frame& f);
  void on_ack(const net::Frame& f);
  void send_ack(const std::string& to, const net::Frame& f);
  /// Creates the machine if the id is unknown; false when it was a duplicate
  /// or tombstoned.
  bool instantiate(storage::Transaction& tx, const RsmId& id, const std::string& class_name);

  RsmId allocate_id(const std::optional<std::string>& placement);
  std::uint64_t counter_value(const char* map, const RsmId& self, const RsmId& peer) const;

  class View;
  class Ids;
  class Random;

  HostConfig config_;
  std::shared_ptr<storage::Store> store_;
  const Program& program_;
  net::Transport* transport_;
  net::Clock clock_;
  RsmId env_client_;
  std::unique_ptr<QueueFamily> inboxes_;
  std::unique_ptr<QueueFamily> outboxes_;

  mutable std::mutex mu_;  // guards the maps below and the id allocator
  std::map<RsmId, std::shared_ptr<Machine>> live_;
  std::map<RsmId, std::shared_ptr<SenderState>> senders_;
  std::uint64_t id_next_ = 0;
  std::uint64_t id_limit_ = 0;
  std::size_t placement_cursor_ = 0;
  std::mutex env_mu_;

  mutable std::mutex hooks_mu_;
  CommitHook commit_hook_;
  Observer observer_;
  EnvSink env_sink_;

  mutable std::mutex stats_mu_;
  HostStats stats_;

  std::mutex work_mu_;
  std::condition_variable work_cv_;
  bool work_flag_ = false;
  std::mutex create_mu_;
};

}  // namespace rsm::runtime
