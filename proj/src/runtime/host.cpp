// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/runtime/host.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <random>

namespace rsm::runtime {

using storage::Transaction;

const char* to_string(CommitKind kind) {
  switch (kind) {
    case CommitKind::kHandler:
      return "handler";
    case CommitKind::kIngest:
      return "ingest";
    case CommitKind::kCreate:
      return "create";
    case CommitKind::kDrain:
      return "drain";
    case CommitKind::kTransfer:
      return "transfer";
    case CommitKind::kEnv:
      return "env";
  }
  return "?";
}

namespace {

Bytes field_key(const RsmId& id, const std::string& field, ByteView key) {
  Bytes k = key_of(id);
  Writer w(k);
  w.raw(field);
  w.u8(0);
  w.raw(key);
  return k;
}

Bytes pair_key(const RsmId& self, const RsmId& peer) {
  Bytes k = key_of(self);
  append_key(k, peer);
  return k;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr int kSlotShift = 48;

}  // namespace

// ---------------------------------------------------------------------------
// Handler plumbing

class MachineHost::View : public PersistentView {
 public:
  View(Transaction& tx, const RsmId& id) : tx_(tx), id_(id) {}

  std::optional<Bytes> read(const std::string& field, ByteView key) override {
    return tx_.get(layout::kFields, field_key(id_, field, key));
  }
  void write(const std::string& field, ByteView key, Bytes value) override {
    tx_.set(layout::kFields, field_key(id_, field, key), std::move(value));
  }
  void erase(const std::string& field, ByteView key) override { tx_.erase(layout::kFields, field_key(id_, field, key)); }
  std::vector<std::pair<Bytes, Bytes>> scan(const std::string& field) override {
    auto prefix = field_key(id_, field, {});
    auto rows = tx_.scan(layout::kFields, prefix);
    for (auto& [k, _] : rows) k.erase(k.begin(), k.begin() + static_cast<std::ptrdiff_t>(prefix.size()));
    return rows;
  }

 private:
  Transaction& tx_;
  const RsmId& id_;
};

class MachineHost::Ids : public IdSource {
 public:
  Ids(MachineHost& host, std::vector<RsmId>& replay) : host_(host), replay_(replay) {}
  RsmId allocate(const std::optional<std::string>& placement) override {
    RsmId id;
    if (!replay_.empty()) {
      id = replay_.front();
      replay_.erase(replay_.begin());
    } else {
      id = host_.allocate_id(placement);
    }
    drawn.push_back(id);
    return id;
  }
  std::vector<RsmId> drawn;

 private:
  MachineHost& host_;
  std::vector<RsmId>& replay_;
};

class MachineHost::Random : public Nondet {
 public:
  Random(std::uint64_t seed, std::vector<std::uint64_t>& replay) : rng_(seed), replay_(replay) {}
  std::uint64_t next(std::uint64_t bound) override {
    std::uint64_t v;
    if (!replay_.empty()) {
      v = replay_.front() % bound;
      replay_.erase(replay_.begin());
    } else {
      v = rng_() % bound;
    }
    drawn.push_back(v);
    return v;
  }
  std::vector<std::uint64_t> drawn;

 private:
  std::mt19937_64 rng_;
  std::vector<std::uint64_t>& replay_;
};

// ---------------------------------------------------------------------------
// Construction and recovery

MachineHost::MachineHost(HostConfig config, std::shared_ptr<storage::Store> store, const Program& program,
                         net::Transport* transport, net::Clock clock)
    : config_(std::move(config)),
      store_(std::move(store)),
      program_(program),
      transport_(transport),
      clock_(std::move(clock)) {
  config_.validate();
  if (!config_.persistent_inbox && config_.local_delivery) {
    throw UsageError("local_delivery needs the persistent inbox");
  }
  env_client_ = RsmId{"env", (fnv1a(config_.partition) & ((1ull << kSlotShift) - 1)) | 1};
  recover();
  if (transport_) {
    transport_->attach(config_.partition, [this](const std::string& from, ByteView packet) { on_packet(from, packet); });
  }
}

MachineHost::~MachineHost() {
  if (transport_) transport_->detach(config_.partition);
  std::lock_guard lock(mu_);
  for (auto& [_, s] : senders_) {
    std::lock_guard slock(s->mu);
    s->drain = Drain{};
  }
}

void MachineHost::recover() {
  for (const char* m : {layout::kHosted, layout::kTombstones, layout::kFields, layout::kMeta, layout::kSendCounters,
                        layout::kRecvCounters}) {
    store_->ensure_map(m);
  }
  store_->ensure_queue(layout::kDeadLetters);
  inboxes_ = std::make_unique<QueueFamily>(*store_, "inbox", config_.shared_queues);
  outboxes_ = std::make_unique<QueueFamily>(*store_, "outbox", config_.shared_queues);
  inboxes_->recover();
  outboxes_->recover();

  auto counter = store_->get(layout::kMeta, to_bytes("id_counter"));
  id_next_ = id_limit_ = counter ? decode<std::uint64_t>(*counter) : 1;

  for (const auto& [k, v] : store_->scan(layout::kHosted)) {
    Reader r(k);
    auto id = id_from_key(r);
    add_live(id, program_.at(rsm::to_string(v)), false);
  }
  for (const auto& [k, v] : store_->scan(layout::kTombstones)) {
    Reader r(k);
    auto id = id_from_key(r);
    if (outboxes_->size(id) > 0) add_live(id, program_.at(rsm::to_string(v)), true);
  }
  outboxes_->ensure(env_client_);
  std::lock_guard lock(mu_);
  senders_[env_client_] = std::make_shared<SenderState>();
}

void MachineHost::add_live(const RsmId& id, const MachineClass& cls, bool halted) {
  std::lock_guard lock(mu_);
  if (live_.count(id)) return;
  auto m = std::make_shared<Machine>();
  m->id = id;
  m->cls = &cls;
  m->volatiles = cls.volatile_fields();
  m->halted = halted;
  live_[id] = m;
  senders_[id] = std::make_shared<SenderState>();
}

std::shared_ptr<MachineHost::Machine> MachineHost::machine(const RsmId& id) const {
  std::lock_guard lock(mu_);
  auto it = live_.find(id);
  return it == live_.end() ? nullptr : it->second;
}

std::shared_ptr<MachineHost::SenderState> MachineHost::sender_state(const RsmId& id) {
  std::lock_guard lock(mu_);
  auto it = senders_.find(id);
  return it == senders_.end() ? nullptr : it->second;
}

void MachineHost::reset_volatile(Machine& m) {
  m.volatiles = m.cls->volatile_fields();
  m.busy = false;
}

CommitDecision MachineHost::run_hook(CommitPoint& point) {
  CommitHook hook;
  {
    std::lock_guard lock(hooks_mu_);
    hook = commit_hook_;
  }
  return hook ? hook(point) : CommitDecision::kCommit;
}

void MachineHost::set_commit_hook(CommitHook hook) {
  std::lock_guard lock(hooks_mu_);
  commit_hook_ = std::move(hook);
}

void MachineHost::set_observer(Observer observer) {
  std::lock_guard lock(hooks_mu_);
  observer_ = std::move(observer);
}

void MachineHost::set_env_sink(EnvSink sink) {
  std::lock_guard lock(hooks_mu_);
  env_sink_ = std::move(sink);
}

void MachineHost::replay_next_attempt(const RsmId& id, std::vector<RsmId> ids, std::vector<std::uint64_t> random) {
  auto m = machine(id);
  if (!m) return;
  std::lock_guard lock(m->handler_mu);
  m->replay_ids = std::move(ids);
  m->replay_random = std::move(random);
}

void MachineHost::notify_work() {
  {
    std::lock_guard lock(work_mu_);
    work_flag_ = true;
  }
  work_cv_.notify_all();
}

void MachineHost::wait_for_work(std::chrono::milliseconds timeout) {
  std::unique_lock lock(work_mu_);
  work_cv_.wait_for(lock, timeout, [&] { return work_flag_; });
  work_flag_ = false;
}

RsmId MachineHost::allocate_id(const std::optional<std::string>& placement) {
  std::lock_guard lock(mu_);
  auto targets = config_.placement_targets();
  std::string target;
  if (placement) {
    target = *placement;
  } else {
    target = targets[placement_cursor_++ % targets.size()];
  }
  if (id_next_ == id_limit_) {
    id_limit_ = id_next_ + config_.id_block;
    auto tx = store_->begin();
    tx.set(layout::kMeta, to_bytes("id_counter"), encode(id_limit_));
    tx.commit();
  }
  std::uint64_t slot = 0;
  if (target != config_.partition) {
    auto it = std::find(targets.begin(), targets.end(), config_.partition);
    slot = 1 + static_cast<std::uint64_t>(it - targets.begin());
  }
  return RsmId{target, (slot << kSlotShift) | id_next_++};
}

// ---------------------------------------------------------------------------
// Environment

RsmId MachineHost::create_machine(const std::string& class_name, const std::optional<std::string>& placement) {
  if (!program_.find(class_name)) throw UnknownClassError(class_name);
  auto id = allocate_id(placement);
  std::lock_guard lock(env_mu_);
  auto tx = store_->begin();
  outboxes_->push(tx, env_client_, encode(OutputRecord{id, kCreateEventType, to_bytes(class_name)}));
  CommitPoint point{CommitKind::kEnv, env_client_, tx};
  run_hook(point);
  tx.commit();
  notify_work();
  return id;
}

void MachineHost::env_send(const RsmId& dest, std::uint32_t event_type, Bytes payload) {
  if (event_type == kCreateEventType) throw UsageError("event type 0xFFFFFFFF is reserved for creation records");
  auto targets = config_.placement_targets();
  if (dest.is_environment() || std::find(targets.begin(), targets.end(), dest.partition) == targets.end()) {
    throw UsageError("unknown destination " + dest.to_string());
  }
  std::lock_guard lock(env_mu_);
  auto tx = store_->begin();
  outboxes_->push(tx, env_client_, encode(OutputRecord{dest, event_type, std::move(payload)}));
  CommitPoint point{CommitKind::kEnv, env_client_, tx};
  run_hook(point);
  tx.commit();
  notify_work();
}

// ---------------------------------------------------------------------------
// Event loop

bool MachineHost::handle_step(const RsmId& id) {
  auto m = machine(id);
  if (!m) return false;
  std::unique_lock lock(m->handler_mu, std::try_to_lock);
  if (!lock.owns_lock() || m->halted) return false;
  return config_.persistent_inbox ? handle_durable(*m) : handle_volatile(*m);
}

namespace {

struct BatchOutcome {
  std::vector<Event> events;
  std::vector<HandledEvent> handled;
  bool halt = false;
  bool failed = false;
  std::string failure;
};

}  // namespace

bool MachineHost::handle_durable(Machine& m) {
  if (inboxes_->size(m.id) == 0) return false;
  auto tx = store_->begin();
  auto raw_state = tx.get(layout::kFields, field_key(m.id, layout::kStateField, {}));
  std::string state = raw_state ? decode<std::string>(*raw_state) : m.cls->start_state();
  auto snapshot = m.volatiles;
  View view(tx, m.id);
  Ids ids(*this, m.replay_ids);
  Random rnd(config_.seed ^ (std::hash<RsmId>{}(m.id) * 0x9E3779B97F4A7C15ull) ^ (m.attempts++ << 20), m.replay_random);
  m.busy = true;

  BatchOutcome out;
  std::uint32_t batch = m.single_step ? 1 : config_.batch_size;
  std::uint32_t consumed = 0;
  while (consumed < batch) {
    auto raw = inboxes_->pop(tx, m.id);
    if (!raw) break;
    ++consumed;
    Event ev = decode<Event>(*raw);
    const Handler* h = m.cls->handler(state, ev.type());
    if (!h) {
      dead_letter(tx, m.id, ev, "no handler for event type " + std::to_string(ev.type()) + " in state " + state);
      continue;
    }
    HandlerContext ctx(*m.cls, m.id, ev, state, view, m.volatiles, ids, rnd, program_);
    try {
      (*h)(ctx);
    } catch (const std::exception& e) {
      ctx.close();
      out.failed = true;
      out.failure = e.what();
      out.events.push_back(ev);
      break;
    }
    ctx.close();
    HandledEvent he;
    he.machine = m.id;
    he.machine_class = m.cls->name();
    he.event = ev;
    he.state_before = state;
    for (const auto& o : ctx.outputs()) outboxes_->push(tx, m.id, encode(o));
    if (ctx.pending_state() && *ctx.pending_state() != state) {
      state = *ctx.pending_state();
      tx.set(layout::kFields, field_key(m.id, layout::kStateField, {}), encode(state));
    }
    he.state_after = state;
    he.outputs = ctx.outputs();
    he.announcements = ctx.announcements();
    he.halted = ctx.halt_requested();
    out.events.push_back(ev);
    out.handled.push_back(std::move(he));
    if (ctx.halt_requested()) {
      out.halt = true;
      break;
    }
  }
  m.busy = false;
  m.replay_ids.clear();
  m.replay_random.clear();

  if (out.failed) {
    tx.abort();
    m.volatiles = std::move(snapshot);
    {
      std::lock_guard lock(stats_mu_);
      ++stats_.handler_aborts;
    }
    if (!m.single_step && consumed > 1) {
      // Find the failing event by retrying one at a time.
      m.single_step = true;
      return true;
    }
    if (++m.failures <= config_.max_redeliveries) {
      m.single_step = true;
      return true;
    }
    auto dl = store_->begin();
    auto head = inboxes_->pop(dl, m.id);
    if (head) dead_letter(dl, m.id, decode<Event>(*head), "handler failed: " + out.failure);
    dl.commit();
    m.failures = 0;
    m.single_step = false;
    return true;
  }

  if (out.halt) {
    auto key = key_of(m.id);
    tx.erase(layout::kHosted, key);
    tx.set(layout::kTombstones, key, to_bytes(m.cls->name()));
    for (const auto& [k, _] : tx.scan(layout::kFields, key)) tx.erase(layout::kFields, k);
  }

  CommitPoint point{CommitKind::kHandler, m.id, tx, &out.events, &ids.drawn, &rnd.drawn};
  if (run_hook(point) == CommitDecision::kAbortAndReset) {
    tx.abort();
    reset_volatile(m);
    return true;
  }
  tx.commit();
  m.failures = 0;
  m.single_step = false;
  {
    std::lock_guard lock(stats_mu_);
    stats_.handled += out.handled.size();
    ++stats_.handler_commits;
  }
  if (out.halt) m.halted = true;
  Observer observer;
  {
    std::lock_guard lock(hooks_mu_);
    observer = observer_;
  }
  if (observer)
    for (const auto& he : out.handled) observer(he);
  if (m.halted && outboxes_->size(m.id) == 0) release_halted(m);
  notify_work();
  return true;
}

bool MachineHost::handle_volatile(Machine& m) {
  std::vector<VolatileItem> items;
  {
    std::lock_guard lock(m.ingest_mu);
    auto batch = m.single_step ? 1u : config_.batch_size;
    for (std::size_t i = 0; i < m.volatile_inbox.size() && i < batch; ++i) items.push_back(m.volatile_inbox[i]);
  }
  if (items.empty()) return false;
  auto tx = store_->begin();
  auto raw_state = tx.get(layout::kFields, field_key(m.id, layout::kStateField, {}));
  std::string state = raw_state ? decode<std::string>(*raw_state) : m.cls->start_state();
  auto snapshot = m.volatiles;
  View view(tx, m.id);
  Ids ids(*this, m.replay_ids);
  Random rnd(config_.seed ^ (std::hash<RsmId>{}(m.id) * 0x9E3779B97F4A7C15ull) ^ (m.attempts++ << 20), m.replay_random);

  BatchOutcome out;
  std::size_t used = 0;
  for (const auto& item : items) {
    ++used;
    const auto& ev = item.event;
    auto ck = pair_key(m.id, ev.source());
    auto c = tx.get(layout::kRecvCounters, ck);
    tx.set(layout::kRecvCounters, ck, encode((c ? decode<std::uint64_t>(*c) : 0) + 1));
    const Handler* h = m.cls->handler(state, ev.type());
    if (!h) {
      dead_letter(tx, m.id, ev, "no handler for event type " + std::to_string(ev.type()) + " in state " + state);
      continue;
    }
    HandlerContext ctx(*m.cls, m.id, ev, state, view, m.volatiles, ids, rnd, program_);
    try {
      (*h)(ctx);
    } catch (const std::exception& e) {
      ctx.close();
      out.failed = true;
      out.failure = e.what();
      break;
    }
    ctx.close();
    HandledEvent he{m.id, m.cls->name(), ev, state, state, ctx.outputs(), ctx.announcements(), ctx.halt_requested()};
    for (const auto& o : ctx.outputs()) outboxes_->push(tx, m.id, encode(o));
    if (ctx.pending_state() && *ctx.pending_state() != state) {
      state = *ctx.pending_state();
      tx.set(layout::kFields, field_key(m.id, layout::kStateField, {}), encode(state));
    }
    he.state_after = state;
    out.events.push_back(ev);
    out.handled.push_back(std::move(he));
    if (ctx.halt_requested()) {
      out.halt = true;
      break;
    }
  }
  m.replay_ids.clear();
  m.replay_random.clear();
  if (out.failed) {
    tx.abort();
    m.volatiles = std::move(snapshot);
    {
      std::lock_guard lock(stats_mu_);
      ++stats_.handler_aborts;
    }
    if (!m.single_step && items.size() > 1) {
      m.single_step = true;
      return true;
    }
    if (++m.failures <= config_.max_redeliveries) {
      m.single_step = true;
      return true;
    }
    // Consume the poison event: count it and dead-letter it.
    auto dl = store_->begin();
    const auto& ev = items.front().event;
    auto ck = pair_key(m.id, ev.source());
    auto c = dl.get(layout::kRecvCounters, ck);
    dl.set(layout::kRecvCounters, ck, encode((c ? decode<std::uint64_t>(*c) : 0) + 1));
    dead_letter(dl, m.id, ev, "handler failed: " + out.failure);
    dl.commit();
    used = 1;
    m.failures = 0;
    m.single_step = false;
  } else {
    if (out.halt) {
      auto key = key_of(m.id);
      tx.erase(layout::kHosted, key);
      tx.set(layout::kTombstones, key, to_bytes(m.cls->name()));
      for (const auto& [k, _] : tx.scan(layout::kFields, key)) tx.erase(layout::kFields, k);
    }
    CommitPoint point{CommitKind::kHandler, m.id, tx, &out.events, &ids.drawn, &rnd.drawn};
    if (run_hook(point) == CommitDecision::kAbortAndReset) {
      tx.abort();
      reset_volatile(m);
      return true;
    }
    tx.commit();
    m.failures = 0;
    m.single_step = false;
    {
      std::lock_guard lock(stats_mu_);
      stats_.handled += out.handled.size();
      ++stats_.handler_commits;
    }
    if (out.halt) m.halted = true;
  }
  // Processing committed: release the senders.
  {
    std::lock_guard lock(m.ingest_mu);
    for (std::size_t i = 0; i < used; ++i) {
      auto& item = m.volatile_inbox.front();
      auto& pending = m.volatile_pending[item.event.source()];
      if (pending > 0) --pending;
      send_ack(item.reply_to, item.ack);
      m.volatile_inbox.pop_front();
    }
    if (m.halted) {
      m.volatile_inbox.clear();
      m.volatile_pending.clear();
    }
  }
  Observer observer;
  {
    std::lock_guard lock(hooks_mu_);
    observer = observer_;
  }
  if (observer)
    for (const auto& he : out.handled) observer(he);
  if (m.halted && outboxes_->size(m.id) == 0) release_halted(m);
  notify_work();
  return true;
}

void MachineHost::dead_letter(Transaction& tx, const RsmId& id, const Event& e, const std::string& reason) {
  Bytes rec;
  Writer w(rec);
  Codec<RsmId>::encode_to(w, id);
  Codec<Event>::encode_to(w, e);
  w.str(reason);
  tx.enqueue(layout::kDeadLetters, std::move(rec));
  spdlog::warn("{}: dead-lettered event type {} for {}: {}", config_.partition, e.type(), id.to_string(), reason);
  std::lock_guard lock(stats_mu_);
  ++stats_.dead_letters;
}

void MachineHost::release_halted(Machine& m) {
  {
    std::lock_guard lock(m.ingest_mu);
    auto tx = store_->begin();
    while (inboxes_->pop(tx, m.id)) {
    }
    tx.commit();
  }
  inboxes_->release(m.id);
  outboxes_->release(m.id);
  std::lock_guard lock(mu_);
  live_.erase(m.id);
  senders_.erase(m.id);
}

// ---------------------------------------------------------------------------
// Outbox draining

bool MachineHost::drain_step(const RsmId& sender) {
  auto s = sender_state(sender);
  if (!s) return false;
  std::unique_lock lock(s->mu, std::try_to_lock);
  if (!lock.owns_lock()) return false;
  if (s->drain.tx) {
    bool done = std::all_of(s->drain.frames.begin(), s->drain.frames.end(), [](const Pending& p) { return p.acked; });
    if (!done) return false;
    finish_drain(sender, *s);
    return true;
  }
  return start_drain(sender, *s);
}

bool MachineHost::start_drain(const RsmId& sender, SenderState& s) {
  if (outboxes_->size(sender) == 0) return false;
  Drain d;
  d.tx.emplace(store_->begin());
  auto& tx = *d.tx;
  std::uint32_t count = 0;
  while (count < config_.batch_size) {
    auto raw = outboxes_->peek(tx, sender, 0);
    if (!raw) break;
    auto rec = decode<OutputRecord>(*raw);
    bool local = config_.local_delivery && !rec.dest.is_environment() && rec.dest.partition == config_.partition;
    if (local) {
      if (count > 0) break;
      outboxes_->pop(tx, sender);
      return transfer_local(sender, rec, tx);
    }
    outboxes_->pop(tx, sender);
    ++count;
    if (rec.dest.is_environment()) {
      d.env_outputs.push_back(std::move(rec));
      continue;
    }
    net::Frame f{net::FrameKind::kMessage, sender, 0, rec.dest, rec.event_type, std::move(rec.payload)};
    if (!rec.is_creation()) {
      auto it = d.counters.find(rec.dest);
      if (it == d.counters.end()) {
        auto c = tx.get(layout::kSendCounters, pair_key(sender, rec.dest));
        it = d.counters.emplace(rec.dest, c ? decode<std::uint64_t>(*c) : 0).first;
      }
      f.seq = it->second++;
      tx.set(layout::kSendCounters, pair_key(sender, rec.dest), encode(it->second));
    }
    d.frames.push_back(Pending{std::move(f), rec.dest.partition, false});
  }
  if (count == 0) return false;
  d.backoff = config_.ack_timeout;
  d.next_retry = clock_() + d.backoff;
  s.drain = std::move(d);
  if (s.drain.frames.empty()) {
    finish_drain(sender, s);
  } else {
    transmit(s.drain, false);
  }
  return true;
}

bool MachineHost::transfer_local(const RsmId& sender, const OutputRecord& rec, Transaction& tx) {
  if (rec.is_creation()) {
    std::lock_guard lock(create_mu_);
    try {
      instantiate(tx, rec.dest, rec.class_name());
    } catch (const UnknownClassError& e) {
      dead_letter(tx, sender, Event(sender, rec.event_type, rec.payload), e.what());
    }
    CommitPoint point{CommitKind::kTransfer, sender, tx};
    if (run_hook(point) == CommitDecision::kAbortAndReset) return true;
    tx.commit();
    notify_work();
    return true;
  }
  auto dest = machine(rec.dest);
  if (!dest) {
    if (!tombstoned(rec.dest)) {
      std::lock_guard lock(stats_mu_);
      ++stats_.unknown_dest;
      return false;
    }
    CommitPoint point{CommitKind::kTransfer, sender, tx};
    if (run_hook(point) == CommitDecision::kAbortAndReset) return true;
    tx.commit();
    return true;
  }
  std::lock_guard lock(dest->ingest_mu);
  if (!dest->halted) inboxes_->push(tx, rec.dest, encode(Event(sender, rec.event_type, rec.payload)));
  CommitPoint point{CommitKind::kTransfer, sender, tx};
  if (run_hook(point) == CommitDecision::kAbortAndReset) return true;
  tx.commit();
  {
    std::lock_guard slock(stats_mu_);
    ++stats_.ingested;
  }
  notify_work();
  return true;
}

void MachineHost::finish_drain(const RsmId& sender, SenderState& s) {
  auto& d = s.drain;
  CommitPoint point{CommitKind::kDrain, sender, *d.tx};
  if (run_hook(point) == CommitDecision::kAbortAndReset) {
    s.drain = Drain{};
    return;
  }
  d.tx->commit();
  // The sink runs before the drain is cleared so idle() cannot report an
  // idle host while outputs are still on their way out.
  if (!d.env_outputs.empty()) {
    EnvSink sink;
    {
      std::lock_guard lock(hooks_mu_);
      sink = env_sink_;
    }
    for (const auto& rec : d.env_outputs) {
      if (sink) sink(sender, rec);
    }
    std::lock_guard lock(stats_mu_);
    stats_.env_delivered += d.env_outputs.size();
  }
  s.drain = Drain{};
  if (auto m = machine(sender); m && m->halted && outboxes_->size(sender) == 0) {
    std::unique_lock lock(m->handler_mu, std::try_to_lock);
    if (lock.owns_lock()) release_halted(*m);
  }
  notify_work();
}

void MachineHost::transmit(Drain& d, bool only_unacked) {
  std::map<std::string, Bytes> packets;
  std::vector<std::string> order;
  std::uint64_t n = 0;
  for (const auto& p : d.frames) {
    if (p.acked) continue;
    auto [it, fresh] = packets.try_emplace(p.to);
    if (fresh) order.push_back(p.to);
    net::append_frame(it->second, p.frame);
    ++n;
  }
  for (const auto& to : order) send_packet(to, std::move(packets[to]));
  std::lock_guard lock(stats_mu_);
  stats_.frames_sent += n;
  if (only_unacked) stats_.retransmits += n;
}

void MachineHost::send_packet(const std::string& to, Bytes packet) {
  if (transport_) transport_->send(config_.partition, to, std::move(packet));
}

void MachineHost::tick() {
  std::vector<std::shared_ptr<SenderState>> all;
  {
    std::lock_guard lock(mu_);
    for (const auto& [_, s] : senders_) all.push_back(s);
  }
  auto now = clock_();
  for (auto& s : all) {
    std::unique_lock lock(s->mu, std::try_to_lock);
    if (!lock.owns_lock() || !s->drain.tx || now < s->drain.next_retry) continue;
    bool waiting = std::any_of(s->drain.frames.begin(), s->drain.frames.end(), [](const Pending& p) { return !p.acked; });
    if (!waiting) continue;
    transmit(s->drain, true);
    s->drain.backoff = std::min(s->drain.backoff * 2, config_.max_backoff);
    s->drain.next_retry = now + s->drain.backoff;
  }
}

// ---------------------------------------------------------------------------
// Ingestion

void MachineHost::on_packet(const std::string& from, ByteView packet) {
  std::vector<net::Frame> frames;
  try {
    frames = net::decode_packet(packet);
  } catch (const net::FrameError& e) {
    spdlog::warn("{}: dropping malformed packet from {}: {}", config_.partition, from, e.what());
    std::lock_guard lock(stats_mu_);
    ++stats_.malformed;
    return;
  }
  // Consecutive data frames for one (sender, dest) pair are ingested in a
  // single transaction.
  for (std::size_t i = 0; i < frames.size();) {
    const auto& f = frames[i];
    if (f.kind == net::FrameKind::kAck) {
      on_ack(f);
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (f.event_type != kCreateEventType) {
      while (j < frames.size() && frames[j].kind == net::FrameKind::kMessage && frames[j].sender == f.sender &&
             frames[j].dest == f.dest && frames[j].event_type != kCreateEventType) {
        ++j;
      }
    }
    ingest(from, std::span<const net::Frame>(frames.data() + i, j - i));
    i = j;
  }
}

void MachineHost::on_ack(const net::Frame& f) {
  auto s = sender_state(f.sender);
  if (!s) return;
  bool done = false;
  {
    std::lock_guard lock(s->mu);
    if (!s->drain.tx) return;
    for (auto& p : s->drain.frames) {
      if (p.frame.dest == f.dest && p.frame.seq == f.seq && p.frame.event_type == f.event_type) p.acked = true;
    }
    done = std::all_of(s->drain.frames.begin(), s->drain.frames.end(), [](const Pending& p) { return p.acked; });
  }
  if (done) notify_work();
}

void MachineHost::send_ack(const std::string& to, const net::Frame& f) {
  send_packet(to, net::encode_frame(f.ack()));
  std::lock_guard lock(stats_mu_);
  ++stats_.acks_sent;
}

bool MachineHost::instantiate(Transaction& tx, const RsmId& id, const std::string& class_name) {
  auto key = key_of(id);
  if (store_->get(layout::kHosted, key) || store_->get(layout::kTombstones, key)) return false;
  const auto* cls = program_.find(class_name);
  if (!cls) throw UnknownClassError(class_name);
  tx.set(layout::kHosted, key, to_bytes(class_name));
  inboxes_->ensure(id);
  outboxes_->ensure(id);
  tx.on_commit([this, id, cls] {
    add_live(id, *cls, false);
    std::lock_guard lock(stats_mu_);
    ++stats_.created;
  });
  return true;
}

void MachineHost::ingest_create(const std::string& from, const net::Frame& f) {
  {
    std::lock_guard lock(create_mu_);
    auto tx = store_->begin();
    bool fresh = false;
    try {
      fresh = instantiate(tx, f.dest, rsm::to_string(f.payload));
    } catch (const UnknownClassError& e) {
      dead_letter(tx, f.dest, Event(f.sender, f.event_type, f.payload), e.what());
      fresh = true;
    }
    if (fresh) {
      CommitPoint point{CommitKind::kCreate, f.dest, tx};
      if (run_hook(point) == CommitDecision::kAbortAndReset) return;
      tx.commit();
    } else {
      std::lock_guard slock(stats_mu_);
      ++stats_.duplicates;
    }
  }
  send_ack(from, f);
  notify_work();
}

void MachineHost::ingest(const std::string& from, const net::Frame& f) {
  ingest(from, std::span<const net::Frame>(&f, 1));
}

void MachineHost::ingest(const std::string& from, std::span<const net::Frame> run) {
  const auto& f = run.front();
  if (f.dest.partition != config_.partition) {
    std::lock_guard lock(stats_mu_);
    stats_.malformed += run.size();
    return;
  }
  if (f.event_type == kCreateEventType) {
    ingest_create(from, f);
    return;
  }
  auto m = machine(f.dest);
  if (!m && !tombstoned(f.dest)) {
    // Not created yet; the sender retries.
    std::lock_guard lock(stats_mu_);
    stats_.unknown_dest += run.size();
    return;
  }
  auto ck = pair_key(f.dest, f.sender);
  if (m && !m->halted && !config_.persistent_inbox) {
    std::lock_guard lock(m->ingest_mu);
    auto raw = store_->get(layout::kRecvCounters, ck);
    std::uint64_t c = raw ? decode<std::uint64_t>(*raw) : 0;
    auto& pending = m->volatile_pending[f.sender];
    for (const auto& g : run) {
      if (g.seq < c) {
        {
          std::lock_guard slock(stats_mu_);
          ++stats_.duplicates;
        }
        send_ack(from, g);
      } else if (g.seq == c + pending) {
        m->volatile_inbox.push_back(VolatileItem{Event(g.sender, g.event_type, g.payload), g.seq, from, g});
        ++pending;
        std::lock_guard slock(stats_mu_);
        ++stats_.ingested;
      } else {
        std::lock_guard slock(stats_mu_);
        ++(g.seq < c + pending ? stats_.duplicates : stats_.out_of_order);
      }
    }
    notify_work();
    return;
  }
  std::unique_lock<std::mutex> lock = m ? std::unique_lock(m->ingest_mu) : std::unique_lock(create_mu_);
  auto tx = store_->begin();
  auto raw = tx.get(layout::kRecvCounters, ck);
  const std::uint64_t c = raw ? decode<std::uint64_t>(*raw) : 0;
  std::uint64_t next = c, duplicates = 0, ahead = 0;
  for (const auto& g : run) {
    if (g.seq == next) {
      if (m && !m->halted) inboxes_->push(tx, g.dest, encode(Event(g.sender, g.event_type, g.payload)));
      ++next;
    } else if (g.seq < next) {
      ++duplicates;
    } else {
      ++ahead;
    }
  }
  if (next > c) {
    tx.set(layout::kRecvCounters, ck, encode(next));
    CommitPoint point{CommitKind::kIngest, f.dest, tx};
    if (run_hook(point) == CommitDecision::kAbortAndReset) return;
    tx.commit();
  }
  {
    std::lock_guard slock(stats_mu_);
    stats_.ingested += next - c;
    stats_.duplicates += duplicates;
    stats_.out_of_order += ahead;
  }
  lock.unlock();
  Bytes acks;
  std::uint64_t n = 0;
  for (const auto& g : run) {
    if (g.seq >= next) continue;
    net::append_frame(acks, g.ack());
    ++n;
  }
  if (n > 0) {
    send_packet(from, std::move(acks));
    std::lock_guard slock(stats_mu_);
    stats_.acks_sent += n;
  }
  notify_work();
}

// ---------------------------------------------------------------------------
// Introspection

std::vector<RsmId> MachineHost::machines() const {
  std::lock_guard lock(mu_);
  std::vector<RsmId> out;
  for (const auto& [id, _] : live_) out.push_back(id);
  return out;
}

std::vector<RsmId> MachineHost::senders() const {
  std::lock_guard lock(mu_);
  std::vector<RsmId> out;
  for (const auto& [id, _] : senders_) out.push_back(id);
  return out;
}

bool MachineHost::hosts(const RsmId& id) const { return store_->get(layout::kHosted, key_of(id)).has_value(); }
bool MachineHost::tombstoned(const RsmId& id) const {
  return store_->get(layout::kTombstones, key_of(id)).has_value();
}
bool MachineHost::halted(const RsmId& id) const { return tombstoned(id); }

std::optional<std::string> MachineHost::class_of(const RsmId& id) const {
  if (auto v = store_->get(layout::kHosted, key_of(id))) return rsm::to_string(*v);
  if (auto v = store_->get(layout::kTombstones, key_of(id))) return rsm::to_string(*v);
  return std::nullopt;
}

std::string MachineHost::current_state(const RsmId& id) const {
  if (auto v = store_->get(layout::kFields, field_key(id, layout::kStateField, {}))) return decode<std::string>(*v);
  auto cls = class_of(id);
  if (!cls) throw UsageError("no machine " + id.to_string());
  return program_.at(*cls).start_state();
}

Bytes MachineHost::field(const RsmId& id, const std::string& name) const {
  if (auto v = store_->get(layout::kFields, field_key(id, name, {}))) return *v;
  auto cls = class_of(id);
  if (!cls) throw UsageError("no machine " + id.to_string());
  const auto& regs = program_.at(*cls).persistent_registers();
  auto it = regs.find(name);
  if (it == regs.end()) throw UnknownFieldError("unknown persistent field " + *cls + "." + name);
  return it->second;
}

std::optional<Bytes> MachineHost::map_entry(const RsmId& id, const std::string& map, ByteView key) const {
  return store_->get(layout::kFields, field_key(id, map, key));
}

std::vector<std::pair<Bytes, Bytes>> MachineHost::map_entries(const RsmId& id, const std::string& map) const {
  auto prefix = field_key(id, map, {});
  auto rows = store_->scan(layout::kFields, prefix);
  for (auto& [k, _] : rows) k.erase(k.begin(), k.begin() + static_cast<std::ptrdiff_t>(prefix.size()));
  return rows;
}

std::size_t MachineHost::inbox_size(const RsmId& id) const { return inboxes_->size(id); }
std::size_t MachineHost::outbox_size(const RsmId& id) const { return outboxes_->size(id); }

std::vector<Event> MachineHost::inbox(const RsmId& id) const {
  std::vector<Event> out;
  for (const auto& raw : inboxes_->items(id)) out.push_back(decode<Event>(raw));
  return out;
}

std::vector<OutputRecord> MachineHost::outbox(const RsmId& id) const {
  std::vector<OutputRecord> out;
  for (const auto& raw : outboxes_->items(id)) out.push_back(decode<OutputRecord>(raw));
  return out;
}

bool MachineHost::drain_pending(const RsmId& sender) const {
  std::shared_ptr<SenderState> s;
  {
    std::lock_guard lock(mu_);
    auto it = senders_.find(sender);
    if (it == senders_.end()) return false;
    s = it->second;
  }
  std::lock_guard lock(s->mu);
  return s->drain.tx.has_value();
}

std::size_t MachineHost::volatile_inbox_size(const RsmId& id) const {
  auto m = machine(id);
  if (!m) return 0;
  std::lock_guard lock(m->ingest_mu);
  return m->volatile_inbox.size();
}

std::uint64_t MachineHost::counter_value(const char* map, const RsmId& self, const RsmId& peer) const {
  auto v = store_->get(map, pair_key(self, peer));
  return v ? decode<std::uint64_t>(*v) : 0;
}

std::uint64_t MachineHost::send_counter(const RsmId& self, const RsmId& peer) const {
  return counter_value(layout::kSendCounters, self, peer);
}

std::uint64_t MachineHost::receive_counter(const RsmId& self, const RsmId& peer) const {
  return counter_value(layout::kRecvCounters, self, peer);
}

namespace {

std::map<std::pair<RsmId, RsmId>, std::uint64_t> read_counters(const storage::Store& store, const char* map) {
  std::map<std::pair<RsmId, RsmId>, std::uint64_t> out;
  for (const auto& [k, v] : store.scan(map)) {
    Reader r(k);
    auto self = id_from_key(r);
    auto peer = id_from_key(r);
    out[{self, peer}] = decode<std::uint64_t>(v);
  }
  return out;
}

}  // namespace

std::map<std::pair<RsmId, RsmId>, std::uint64_t> MachineHost::send_counters() const {
  return read_counters(*store_, layout::kSendCounters);
}

std::map<std::pair<RsmId, RsmId>, std::uint64_t> MachineHost::receive_counters() const {
  return read_counters(*store_, layout::kRecvCounters);
}

std::vector<DeadLetter> MachineHost::dead_letters() const {
  std::vector<DeadLetter> out;
  for (const auto& raw : store_->queue_items(layout::kDeadLetters)) {
    Reader r(raw);
    DeadLetter d;
    d.machine = Codec<RsmId>::decode_from(r);
    d.event = Codec<Event>::decode_from(r);
    d.reason = r.str();
    out.push_back(std::move(d));
  }
  return out;
}

HostStats MachineHost::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

bool MachineHost::idle() const {
  for (const auto& id : senders()) {
    if (outboxes_->size(id) > 0 || drain_pending(id)) return false;
  }
  for (const auto& id : machines()) {
    if (halted(id)) continue;
    if (inboxes_->size(id) > 0 || volatile_inbox_size(id) > 0) return false;
  }
  return true;
}

}  // namespace rsm::runtime
