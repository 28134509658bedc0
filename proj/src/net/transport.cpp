// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/net/transport.hpp"

#include <algorithm>

namespace rsm::net {

Clock steady_clock() {
  return [] {
    return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now().time_since_epoch());
  };
}

// ---------------------------------------------------------------------------
// InProcessTransport

InProcessTransport::InProcessTransport() : worker_([this] { run(); }) {}

InProcessTransport::~InProcessTransport() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

void InProcessTransport::attach(const std::string& endpoint, PacketHandler handler) {
  std::lock_guard lock(mu_);
  handlers_[endpoint] = std::make_shared<PacketHandler>(std::move(handler));
}

void InProcessTransport::detach(const std::string& endpoint) {
  std::unique_lock lock(mu_);
  handlers_.erase(endpoint);
  // A delivery already in progress may still hold the old handler.
  idle_cv_.wait(lock, [&] { return !busy_; });
}

void InProcessTransport::send(const std::string& from, const std::string& to, Bytes packet) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(Packet{from, to, std::move(packet)});
  }
  cv_.notify_one();
}

void InProcessTransport::flush() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

std::uint64_t InProcessTransport::delivered() const {
  std::lock_guard lock(mu_);
  return delivered_;
}

void InProcessTransport::run() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
    if (stopping_) return;
    Packet p = std::move(queue_.front());
    queue_.pop_front();
    auto it = handlers_.find(p.to);
    std::shared_ptr<PacketHandler> handler = it == handlers_.end() ? nullptr : it->second;
    busy_ = true;
    lock.unlock();
    if (handler) (*handler)(p.from, p.data);
    lock.lock();
    busy_ = false;
    if (handler) ++delivered_;
    idle_cv_.notify_all();
  }
}

// ---------------------------------------------------------------------------
// FaultyTransport

FaultyTransport::FaultyTransport(FaultOptions options, Clock clock)
    : options_(options), clock_(std::move(clock)), rng_(options.seed) {
  options_.reorder_window = std::max<std::size_t>(options_.reorder_window, 1);
}

FaultyTransport::~FaultyTransport() { stop_pump(); }

void FaultyTransport::attach(const std::string& endpoint, PacketHandler handler) {
  std::lock_guard lock(mu_);
  handlers_[endpoint] = std::make_shared<PacketHandler>(std::move(handler));
}

void FaultyTransport::detach(const std::string& endpoint) {
  std::lock_guard lock(mu_);
  handlers_.erase(endpoint);
}

bool FaultyTransport::chance(double p) { return p > 0 && std::uniform_real_distribution<double>(0, 1)(rng_) < p; }

void FaultyTransport::send(const std::string& from, const std::string& to, Bytes packet) {
  std::lock_guard lock(mu_);
  ++stats_.sent;
  if (unreachable_.count(from) || unreachable_.count(to) || chance(options_.drop_prob)) {
    ++stats_.dropped;
    return;
  }
  int copies = 1;
  if (chance(options_.duplicate_prob)) {
    ++copies;
    ++stats_.duplicated;
  }
  auto now = clock_();
  for (int i = 0; i < copies; ++i) {
    Millis delay{0};
    if (options_.max_delay.count() > 0) {
      delay = Millis(std::uniform_int_distribution<std::int64_t>(0, options_.max_delay.count())(rng_));
    }
    flight_.push_back(Packet{now + delay, next_order_++, from, to, packet});
  }
}

bool FaultyTransport::deliver_one() {
  Packet p;
  std::shared_ptr<PacketHandler> handler;
  {
    std::lock_guard lock(mu_);
    auto now = clock_();
    // Due packets in send order.
    std::vector<std::size_t> due;
    for (std::size_t i = 0; i < flight_.size(); ++i)
      if (flight_[i].due <= now) due.push_back(i);
    if (due.empty()) return false;
    std::sort(due.begin(), due.end(), [&](auto a, auto b) { return flight_[a].order < flight_[b].order; });
    std::size_t pick = 0;
    if (due.size() > 1 && options_.reorder_window > 1 && chance(options_.reorder_prob)) {
      auto reach = std::min(due.size(), options_.reorder_window);
      pick = std::uniform_int_distribution<std::size_t>(1, reach - 1)(rng_);
      ++stats_.reordered;
    }
    auto idx = due[pick];
    p = std::move(flight_[idx]);
    flight_.erase(flight_.begin() + static_cast<std::ptrdiff_t>(idx));
    if (unreachable_.count(p.to)) {
      ++stats_.dropped;
      return true;
    }
    auto it = handlers_.find(p.to);
    if (it == handlers_.end()) {
      ++stats_.dropped;
      return true;
    }
    handler = it->second;
    ++stats_.delivered;
  }
  (*handler)(p.from, p.data);
  return true;
}

std::size_t FaultyTransport::in_flight() const {
  std::lock_guard lock(mu_);
  return flight_.size();
}

std::optional<Millis> FaultyTransport::next_due() const {
  std::lock_guard lock(mu_);
  std::optional<Millis> best;
  for (const auto& p : flight_)
    if (!best || p.due < *best) best = p.due;
  return best;
}

void FaultyTransport::set_reachable(const std::string& endpoint, bool reachable) {
  std::lock_guard lock(mu_);
  if (reachable) {
    unreachable_.erase(endpoint);
  } else {
    unreachable_.insert(endpoint);
  }
}

FaultStats FaultyTransport::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void FaultyTransport::start_pump() {
  std::lock_guard lock(mu_);
  if (pumping_) return;
  pumping_ = true;
  pump_ = std::thread([this] {
    for (;;) {
      {
        std::lock_guard lock(mu_);
        if (!pumping_) return;
      }
      if (!deliver_one()) std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
  });
}

void FaultyTransport::stop_pump() {
  {
    std::lock_guard lock(mu_);
    if (!pumping_) return;
    pumping_ = false;
  }
  pump_.join();
}

}  // namespace rsm::net
