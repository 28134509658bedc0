// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/storage/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

namespace rsm::storage {

namespace {

void write_all(int fd, const Bytes& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(std::string("log write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

void sync_fd(int fd) {
  if (::fsync(fd) != 0) throw Error(std::string("fsync failed: ") + std::strerror(errno));
}

bool has_prefix(const Bytes& key, ByteView prefix) {
  return key.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), key.begin());
}

}  // namespace

FsyncPolicy parse_fsync_policy(std::string_view text) {
  if (text == "always") return FsyncPolicy::kAlways;
  if (text == "batched") return FsyncPolicy::kBatched;
  if (text == "never") return FsyncPolicy::kNever;
  throw UsageError("unknown fsync policy '" + std::string(text) + "'");
}

std::string to_string(FsyncPolicy policy) {
  switch (policy) {
    case FsyncPolicy::kAlways:
      return "always";
    case FsyncPolicy::kBatched:
      return "batched";
    case FsyncPolicy::kNever:
      return "never";
  }
  return "?";
}

struct Store::TxData {
  std::uint64_t id = 0;
  TxState state = TxState::kOpen;
  std::vector<WriteOp> writes;
  std::map<std::pair<std::string, Bytes>, std::optional<Bytes>> overlay;
  std::set<std::pair<std::string, Bytes>> key_locks;
  std::map<std::string, std::size_t> claimed;
  std::vector<std::function<void()>> commit_hooks;
  std::vector<std::function<void()>> abort_hooks;
};

// ---------------------------------------------------------------------------
// Store

Store::Store(std::filesystem::path path, StoreOptions options) : path_(std::move(path)), options_(options) {}

Store::~Store() {
  if (fd_ >= 0) ::close(fd_);
}

std::shared_ptr<Store> Store::open(const std::filesystem::path& path, StoreOptions options) {
  if (path.empty()) throw UsageError("store path is empty");
  std::shared_ptr<Store> store(new Store(path, options));
  store->recover();
  return store;
}

std::shared_ptr<Store> Store::in_memory(StoreOptions options) {
  return std::shared_ptr<Store>(new Store({}, options));
}

void Store::recover() {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  Bytes data;
  {
    std::ifstream in(path_, std::ios::binary);
    if (in) data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::size_t pos = 0;
  std::uint64_t max_tx = 0;
  while (pos < data.size()) {
    auto parsed = parse_record(ByteView(data).subspan(pos));
    if (parsed.status == ParsedRecord::Status::kTruncated) break;
    if (parsed.status == ParsedRecord::Status::kBadChecksum || parsed.status == ParsedRecord::Status::kMalformed) {
      bool at_tail = parsed.status == ParsedRecord::Status::kMalformed || pos + parsed.size >= data.size();
      if (at_tail) break;
      throw RecoveryError("log " + path_.string() + ": record at offset " + std::to_string(pos) + " is " +
                          storage::to_string(parsed.status) + " and is followed by " +
                          std::to_string(data.size() - pos - parsed.size) + " more bytes");
    }
    for (const auto& op : parsed.record.ops) {
      try {
        apply_locked(op, true);
      } catch (const Error& e) {
        throw RecoveryError("log " + path_.string() + ": record at offset " + std::to_string(pos) + ": " + e.what());
      }
    }
    max_tx = std::max(max_tx, parsed.record.tx_id);
    pos += parsed.size;
  }
  next_tx_ = max_tx + 1;
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT, 0644);
  if (fd_ < 0) throw RecoveryError("cannot open log " + path_.string() + ": " + std::strerror(errno));
  if (pos < data.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(pos)) != 0) {
      throw RecoveryError("cannot truncate torn tail of " + path_.string());
    }
    sync_fd(fd_);
  }
  ::lseek(fd_, static_cast<off_t>(pos), SEEK_SET);
  log_size_ = pos;
  stats_.log_bytes = pos;
}

void Store::check_open_locked() const {
  if (closed_) throw StoreClosedError();
}

Transaction Store::begin() {
  std::lock_guard lock(mu_);
  check_open_locked();
  auto data = std::make_unique<TxData>();
  data->id = next_tx_++;
  return Transaction(shared_from_this(), std::move(data));
}

void Store::append_locked(const LogRecord& record) {
  auto bytes = encode_record(record);
  if (durable()) {
    write_all(fd_, bytes);
    switch (options_.fsync) {
      case FsyncPolicy::kAlways:
        sync_fd(fd_);
        ++stats_.fsyncs;
        break;
      case FsyncPolicy::kBatched:
        if (++unsynced_ >= options_.fsync_batch) {
          sync_fd(fd_);
          ++stats_.fsyncs;
          unsynced_ = 0;
        }
        break;
      case FsyncPolicy::kNever:
        break;
    }
  }
  log_size_ += bytes.size();
  stats_.log_bytes = log_size_;
  ++stats_.commits;
}

const Store::Collection* Store::find_locked(const std::string& name) const {
  auto it = collections_.find(name);
  return it == collections_.end() ? nullptr : &it->second;
}

Store::Collection& Store::collection_locked(const std::string& name, bool queue) {
  auto it = collections_.find(name);
  if (it == collections_.end()) throw UsageError("unknown collection '" + name + "'");
  if (it->second.is_queue != queue) {
    throw UsageError("collection '" + name + "' is not a " + std::string(queue ? "queue" : "map"));
  }
  return it->second;
}

void Store::apply_locked(const WriteOp& op, bool replay) {
  switch (op.op) {
    case OpCode::kCreateQueue:
    case OpCode::kCreateMap: {
      bool queue = op.op == OpCode::kCreateQueue;
      auto [it, inserted] = collections_.try_emplace(op.collection);
      if (inserted) it->second.is_queue = queue;
      break;
    }
    case OpCode::kDropCollection:
      collections_.erase(op.collection);
      break;
    case OpCode::kSet:
      collection_locked(op.collection, false).map.entries[op.key] = op.value;
      break;
    case OpCode::kErase:
      collection_locked(op.collection, false).map.entries.erase(op.key);
      break;
    case OpCode::kEnqueue:
      collection_locked(op.collection, true).queue.items.push_back(op.value);
      break;
    case OpCode::kDequeue: {
      auto& q = collection_locked(op.collection, true).queue;
      if (q.items.empty()) throw Error("dequeue from empty queue '" + op.collection + "'");
      q.items.pop_front();
      break;
    }
  }
  (void)replay;
}

void Store::ensure_collection(const std::string& name, bool queue) {
  std::lock_guard lock(mu_);
  check_open_locked();
  if (auto* c = find_locked(name)) {
    if (c->is_queue != queue) throw UsageError("collection '" + name + "' exists with another kind");
    return;
  }
  LogRecord record;
  record.tx_id = next_tx_++;
  record.ops.push_back(WriteOp{name, queue ? OpCode::kCreateQueue : OpCode::kCreateMap, {}, {}});
  append_locked(record);
  apply_locked(record.ops.front(), false);
}

void Store::ensure_queue(const std::string& name) { ensure_collection(name, true); }
void Store::ensure_map(const std::string& name) { ensure_collection(name, false); }

bool Store::has_queue(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto* c = find_locked(name);
  return c && c->is_queue;
}

bool Store::has_map(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto* c = find_locked(name);
  return c && !c->is_queue;
}

std::optional<Bytes> Store::get(const std::string& map, ByteView key) const {
  std::lock_guard lock(mu_);
  auto* c = find_locked(map);
  if (!c || c->is_queue) return std::nullopt;
  auto it = c->map.entries.find(Bytes(key.begin(), key.end()));
  if (it == c->map.entries.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<Bytes, Bytes>> Store::scan(const std::string& map, ByteView prefix) const {
  std::lock_guard lock(mu_);
  std::vector<std::pair<Bytes, Bytes>> out;
  auto* c = find_locked(map);
  if (!c || c->is_queue) return out;
  for (auto it = c->map.entries.lower_bound(Bytes(prefix.begin(), prefix.end()));
       it != c->map.entries.end() && has_prefix(it->first, prefix); ++it) {
    out.emplace_back(it->first, it->second);
  }
  return out;
}

std::size_t Store::queue_size(const std::string& queue) const {
  std::lock_guard lock(mu_);
  auto* c = find_locked(queue);
  return c && c->is_queue ? c->queue.items.size() : 0;
}

std::vector<Bytes> Store::queue_items(const std::string& queue) const {
  std::lock_guard lock(mu_);
  auto* c = find_locked(queue);
  if (!c || !c->is_queue) return {};
  return std::vector<Bytes>(c->queue.items.begin(), c->queue.items.end());
}

StoreImage Store::image() const {
  std::lock_guard lock(mu_);
  StoreImage out;
  for (const auto& [name, c] : collections_) {
    auto& img = out[name];
    img.is_queue = c.is_queue;
    img.items = c.queue.items;
    img.entries = c.map.entries;
  }
  return out;
}

StoreStats Store::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::uint64_t Store::log_size() const {
  std::lock_guard lock(mu_);
  return log_size_;
}

void Store::compact() {
  std::lock_guard lock(mu_);
  check_open_locked();
  compact_locked();
}

void Store::compact_locked() {
  if (!durable()) return;
  LogRecord snapshot;
  snapshot.tx_id = next_tx_ - 1;
  for (const auto& [name, c] : collections_) {
    snapshot.ops.push_back(WriteOp{name, c.is_queue ? OpCode::kCreateQueue : OpCode::kCreateMap, {}, {}});
    if (c.is_queue) {
      for (const auto& item : c.queue.items) snapshot.ops.push_back(WriteOp{name, OpCode::kEnqueue, {}, item});
    } else {
      for (const auto& [k, v] : c.map.entries) snapshot.ops.push_back(WriteOp{name, OpCode::kSet, k, v});
    }
  }
  auto bytes = encode_record(snapshot);
  auto tmp = path_;
  tmp += ".compact";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error("cannot create " + tmp.string());
  write_all(fd, bytes);
  sync_fd(fd);
  ::close(fd);
  std::filesystem::rename(tmp, path_);
  ::close(fd_);
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND);
  if (fd_ < 0) throw Error("cannot reopen log " + path_.string());
  log_size_ = bytes.size();
  stats_.log_bytes = log_size_;
  ++stats_.compactions;
}

void Store::close() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  closed_ = true;
  if (fd_ >= 0) {
    if (options_.fsync != FsyncPolicy::kNever) ::fsync(fd_);
    ::close(fd_);
    fd_ = -1;
  }
  cv_.notify_all();
}

void Store::wait_locked(std::unique_lock<std::mutex>& lock, const std::function<bool()>& free) {
  if (free()) return;
  if (options_.lock_timeout.count() == 0) throw ConflictError("lock held by another transaction");
  auto deadline = std::chrono::steady_clock::now() + options_.lock_timeout;
  if (!cv_.wait_until(lock, deadline, [&] { return closed_ || free(); })) {
    throw ConflictError("timed out waiting for a lock held by another transaction");
  }
  check_open_locked();
}

void Store::release_locked(TxData& tx) {
  for (const auto& [coll, key] : tx.key_locks) {
    auto it = collections_.find(coll);
    if (it == collections_.end()) continue;
    auto lk = it->second.map.locks.find(key);
    if (lk != it->second.map.locks.end() && lk->second == tx.id) it->second.map.locks.erase(lk);
  }
  tx.key_locks.clear();
  for (const auto& [name, _] : tx.claimed) {
    auto it = collections_.find(name);
    if (it != collections_.end() && it->second.queue.head_owner == tx.id) it->second.queue.head_owner = 0;
  }
  tx.claimed.clear();
}

// ---------------------------------------------------------------------------
// Transaction

Transaction::Transaction(std::shared_ptr<Store> store, std::unique_ptr<Store::TxData> data)
    : store_(std::move(store)), data_(std::move(data)) {}

Transaction::Transaction(Transaction&& other) noexcept = default;

Transaction& Transaction::operator=(Transaction&& other) noexcept {
  if (this != &other) {
    if (data_ && data_->state == TxState::kOpen) {
      try {
        abort();
      } catch (...) {
      }
    }
    store_ = std::move(other.store_);
    data_ = std::move(other.data_);
  }
  return *this;
}

Transaction::~Transaction() {
  if (data_ && data_->state == TxState::kOpen) {
    try {
      abort();
    } catch (...) {
    }
  }
}

std::uint64_t Transaction::id() const { return data_ ? data_->id : 0; }
TxState Transaction::state() const { return data_ ? data_->state : TxState::kAborted; }

const std::vector<WriteOp>& Transaction::write_set() const {
  if (!data_) throw UsageError("empty transaction handle");
  return data_->writes;
}

void Transaction::check_open() const {
  if (!data_) throw UsageError("empty transaction handle");
  if (data_->state == TxState::kCommitted) throw UsageError("transaction already committed");
  if (data_->state == TxState::kAborted) throw UsageError("transaction already aborted");
}

void Transaction::enqueue(const std::string& queue, Bytes item) {
  check_open();
  std::lock_guard lock(store_->mu_);
  store_->check_open_locked();
  store_->collection_locked(queue, true);
  data_->writes.push_back(WriteOp{queue, OpCode::kEnqueue, {}, std::move(item)});
}

std::optional<Bytes> Transaction::peek(const std::string& queue, std::size_t offset) {
  check_open();
  std::unique_lock lock(store_->mu_);
  store_->check_open_locked();
  auto* q = &store_->collection_locked(queue, true).queue;
  auto me = data_->id;
  store_->wait_locked(lock, [&] {
    auto* c = store_->find_locked(queue);
    return !c || c->queue.head_owner == 0 || c->queue.head_owner == me;
  });
  q = &store_->collection_locked(queue, true).queue;
  q->head_owner = me;
  auto& claimed = data_->claimed[queue];
  auto idx = claimed + offset;
  if (idx >= q->items.size()) return std::nullopt;
  return q->items[idx];
}

std::optional<Bytes> Transaction::try_dequeue(const std::string& queue) {
  check_open();
  std::unique_lock lock(store_->mu_);
  store_->check_open_locked();
  store_->collection_locked(queue, true);
  auto me = data_->id;
  store_->wait_locked(lock, [&] {
    auto* c = store_->find_locked(queue);
    return !c || c->queue.head_owner == 0 || c->queue.head_owner == me;
  });
  auto& q = store_->collection_locked(queue, true).queue;
  q.head_owner = me;
  auto& claimed = data_->claimed[queue];
  if (claimed >= q.items.size()) return std::nullopt;
  Bytes item = q.items[claimed++];
  data_->writes.push_back(WriteOp{queue, OpCode::kDequeue, {}, {}});
  return item;
}

std::optional<Bytes> Transaction::get(const std::string& map, ByteView key) {
  check_open();
  Bytes k(key.begin(), key.end());
  std::lock_guard lock(store_->mu_);
  store_->check_open_locked();
  auto ov = data_->overlay.find({map, k});
  if (ov != data_->overlay.end()) return ov->second;
  const auto& entries = store_->collection_locked(map, false).map.entries;
  auto it = entries.find(k);
  if (it == entries.end()) return std::nullopt;
  return it->second;
}

void Transaction::set(const std::string& map, ByteView key, Bytes value) {
  check_open();
  Bytes k(key.begin(), key.end());
  std::unique_lock lock(store_->mu_);
  store_->check_open_locked();
  store_->collection_locked(map, false);
  auto me = data_->id;
  store_->wait_locked(lock, [&] {
    auto* c = store_->find_locked(map);
    if (!c) return true;
    auto it = c->map.locks.find(k);
    return it == c->map.locks.end() || it->second == me;
  });
  auto& m = store_->collection_locked(map, false).map;
  m.locks[k] = me;
  data_->key_locks.insert({map, k});
  data_->overlay[{map, k}] = value;
  data_->writes.push_back(WriteOp{map, OpCode::kSet, std::move(k), std::move(value)});
}

void Transaction::erase(const std::string& map, ByteView key) {
  check_open();
  Bytes k(key.begin(), key.end());
  std::unique_lock lock(store_->mu_);
  store_->check_open_locked();
  store_->collection_locked(map, false);
  auto me = data_->id;
  store_->wait_locked(lock, [&] {
    auto* c = store_->find_locked(map);
    if (!c) return true;
    auto it = c->map.locks.find(k);
    return it == c->map.locks.end() || it->second == me;
  });
  auto& m = store_->collection_locked(map, false).map;
  m.locks[k] = me;
  data_->key_locks.insert({map, k});
  data_->overlay[{map, k}] = std::nullopt;
  data_->writes.push_back(WriteOp{map, OpCode::kErase, std::move(k), {}});
}

std::vector<std::pair<Bytes, Bytes>> Transaction::scan(const std::string& map, ByteView prefix) {
  check_open();
  std::lock_guard lock(store_->mu_);
  store_->check_open_locked();
  const auto& entries = store_->collection_locked(map, false).map.entries;
  std::map<Bytes, Bytes> merged;
  for (auto it = entries.lower_bound(Bytes(prefix.begin(), prefix.end()));
       it != entries.end() && has_prefix(it->first, prefix); ++it) {
    merged.emplace(it->first, it->second);
  }
  for (const auto& [mk, value] : data_->overlay) {
    if (mk.first != map || !has_prefix(mk.second, prefix)) continue;
    if (value) {
      merged[mk.second] = *value;
    } else {
      merged.erase(mk.second);
    }
  }
  return {merged.begin(), merged.end()};
}

void Transaction::drop_collection(const std::string& name) {
  check_open();
  std::lock_guard lock(store_->mu_);
  store_->check_open_locked();
  data_->writes.push_back(WriteOp{name, OpCode::kDropCollection, {}, {}});
}

void Transaction::on_commit(std::function<void()> hook) {
  check_open();
  data_->commit_hooks.push_back(std::move(hook));
}

void Transaction::on_abort(std::function<void()> hook) {
  check_open();
  data_->abort_hooks.push_back(std::move(hook));
}

void Transaction::commit() {
  check_open();
  {
    std::lock_guard lock(store_->mu_);
    store_->check_open_locked();
    if (data_->writes.empty()) {
      ++store_->stats_.empty_commits;
    } else {
      LogRecord record{data_->id, data_->writes};
      try {
        store_->append_locked(record);
      } catch (...) {
        store_->release_locked(*data_);
        data_->state = TxState::kAborted;
        store_->cv_.notify_all();
        throw;
      }
      for (const auto& op : data_->writes) store_->apply_locked(op, false);
      if (store_->durable() && store_->log_size_ > store_->options_.compaction_threshold) store_->compact_locked();
    }
    store_->release_locked(*data_);
    data_->state = TxState::kCommitted;
  }
  store_->cv_.notify_all();
  auto hooks = std::move(data_->commit_hooks);
  data_->abort_hooks.clear();
  for (auto& h : hooks) h();
}

void Transaction::abort() {
  if (!data_ || data_->state != TxState::kOpen) return;
  {
    std::lock_guard lock(store_->mu_);
    store_->release_locked(*data_);
    data_->state = TxState::kAborted;
    ++store_->stats_.aborts;
  }
  store_->cv_.notify_all();
  auto hooks = std::move(data_->abort_hooks);
  data_->commit_hooks.clear();
  for (auto& h : hooks) h();
}

}  // namespace rsm::storage
