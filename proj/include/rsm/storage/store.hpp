// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rsm/core/codec.hpp"
#include "rsm/core/errors.hpp"
#include "rsm/storage/log.hpp"

namespace rsm::storage {

class ConflictError : public Error {
 public:
  using Error::Error;
};

class RecoveryError : public Error {
 public:
  using Error::Error;
};

class StoreClosedError : public Error {
 public:
  StoreClosedError() : Error("store is closed") {}
};

enum class FsyncPolicy { kAlways, kBatched, kNever };

FsyncPolicy parse_fsync_policy(std::string_view text);
std::string to_string(FsyncPolicy policy);

struct StoreOptions {
  FsyncPolicy fsync = FsyncPolicy::kAlways;
  // Batched policy: fsync after this many commits.
  std::uint32_t fsync_batch = 32;
  // Snapshot and truncate the log once it grows past this many bytes.
  std::uint64_t compaction_threshold = 64ull << 20;
  // How long an operation waits for a lock held by another transaction before
  // failing with ConflictError. Zero fails immediately.
  std::chrono::milliseconds lock_timeout{5000};
};

struct StoreStats {
  std::uint64_t commits = 0;       // records appended (empty commits excluded)
  std::uint64_t empty_commits = 0;
  std::uint64_t aborts = 0;
  std::uint64_t fsyncs = 0;
  std::uint64_t log_bytes = 0;
  std::uint64_t compactions = 0;
};

enum class TxState { kOpen, kCommitted, kAborted };

/// Committed contents of one collection; used for comparisons in tests.
struct CollectionImage {
  bool is_queue = false;
  std::deque<Bytes> items;
  std::map<Bytes, Bytes> entries;
  bool operator==(const CollectionImage&) const = default;
};
using StoreImage = std::map<std::string, CollectionImage>;

class Transaction;

/// Durable transactional store of named reliable queues and reliable maps.
///
/// Every commit is one log record appended (and fsynced per policy) before
/// its effects become visible, so recovery replays exactly the committed
/// transactions. Concurrency control is lock based: map writes take a per-key
/// lock, dequeues take the queue's head. Enqueues need no lock and land in
/// commit order.
class Store : public std::enable_shared_from_this<Store> {
 public:
  /// Opens (recovering) or creates the log at `path`.
  static std::shared_ptr<Store> open(const std::filesystem::path& path, StoreOptions options = {});
  /// A store with identical semantics and no log.
  static std::shared_ptr<Store> in_memory(StoreOptions options = {});

  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  Transaction begin();

  /// Create-if-absent; a metadata operation committed as its own record.
  void ensure_queue(const std::string& name);
  void ensure_map(const std::string& name);
  bool has_queue(const std::string& name) const;
  bool has_map(const std::string& name) const;

  // Committed reads, outside any transaction.
  std::optional<Bytes> get(const std::string& map, ByteView key) const;
  std::vector<std::pair<Bytes, Bytes>> scan(const std::string& map, ByteView prefix = {}) const;
  std::size_t queue_size(const std::string& queue) const;
  std::vector<Bytes> queue_items(const std::string& queue) const;
  StoreImage image() const;

  StoreStats stats() const;
  std::uint64_t log_size() const;
  bool durable() const { return !path_.empty(); }
  const std::filesystem::path& path() const { return path_; }

  /// Writes a snapshot record and atomically replaces the log with it.
  void compact();
  /// Aborts nothing; open transactions fail on their next call.
  void close();

 private:
  friend class Transaction;
  struct TxData;
  struct Queue {
    std::deque<Bytes> items;
    std::uint64_t head_owner = 0;
  };
  struct Map {
    std::map<Bytes, Bytes> entries;
    std::map<Bytes, std::uint64_t> locks;
  };
  struct Collection {
    bool is_queue = false;
    Queue queue;
    Map map;
  };

  Store(std::filesystem::path path, StoreOptions options);
  void recover();
  void append_locked(const LogRecord& record);
  void apply_locked(const WriteOp& op, bool replay);
  void ensure_collection(const std::string& name, bool queue);
  Collection& collection_locked(const std::string& name, bool queue);
  const Collection* find_locked(const std::string& name) const;
  void wait_locked(std::unique_lock<std::mutex>& lock, const std::function<bool()>& free);
  void release_locked(TxData& tx);
  void check_open_locked() const;
  void compact_locked();

  std::filesystem::path path_;
  StoreOptions options_;
  int fd_ = -1;
  std::uint64_t log_size_ = 0;
  std::uint32_t unsynced_ = 0;
  bool closed_ = false;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, Collection> collections_;
  std::uint64_t next_tx_ = 1;
  StoreStats stats_;
};

/// One all-or-nothing unit of work. Move-only; destroying an open transaction
/// aborts it. May be handed between threads, but not used by two at once.
class Transaction {
 public:
  Transaction() = default;
  Transaction(Transaction&& other) noexcept;
  Transaction& operator=(Transaction&& other) noexcept;
  ~Transaction();

  std::uint64_t id() const;
  TxState state() const;
  bool valid() const { return data_ != nullptr; }

  void enqueue(const std::string& queue, Bytes item);
  /// Claims and returns the next head element not yet dequeued by this
  /// transaction; nullopt when the committed queue is exhausted.
  std::optional<Bytes> try_dequeue(const std::string& queue);
  /// The element `offset` positions past this transaction's dequeue cursor,
  /// without consuming it.
  std::optional<Bytes> peek(const std::string& queue, std::size_t offset = 0);

  std::optional<Bytes> get(const std::string& map, ByteView key);
  void set(const std::string& map, ByteView key, Bytes value);
  void erase(const std::string& map, ByteView key);
  /// Committed entries merged with this transaction's writes, key order.
  std::vector<std::pair<Bytes, Bytes>> scan(const std::string& map, ByteView prefix = {});
  void drop_collection(const std::string& name);

  void commit();
  /// Idempotent.
  void abort();

  void on_commit(std::function<void()> hook);
  void on_abort(std::function<void()> hook);

  const std::vector<WriteOp>& write_set() const;

 private:
  friend class Store;
  Transaction(std::shared_ptr<Store> store, std::unique_ptr<Store::TxData> data);
  void check_open() const;

  std::shared_ptr<Store> store_;
  std::unique_ptr<Store::TxData> data_;
};

}  // namespace rsm::storage
