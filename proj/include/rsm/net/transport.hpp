// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "rsm/core/codec.hpp"

namespace rsm::net {

using Millis = std::chrono::milliseconds;
/// Monotonic time source; virtual in simulations.
using Clock = std::function<Millis()>;
Clock steady_clock();

/// Receives one packet; `from` is the sending endpoint, where replies go.
using PacketHandler = std::function<void(const std::string& from, ByteView packet)>;

/// Unreliable, unordered packet delivery between named endpoints (one per
/// partition). Every transport may lose, duplicate or reorder; the delivery
/// protocol above it restores exactly-once FIFO.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void attach(const std::string& endpoint, PacketHandler handler) = 0;
  virtual void detach(const std::string& endpoint) = 0;
  virtual void send(const std::string& from, const std::string& to, Bytes packet) = 0;
};

/// Lossless FIFO delivery on a background thread.
class InProcessTransport : public Transport {
 public:
  InProcessTransport();
  ~InProcessTransport() override;

  void attach(const std::string& endpoint, PacketHandler handler) override;
  void detach(const std::string& endpoint) override;
  void send(const std::string& from, const std::string& to, Bytes packet) override;

  /// Blocks until every packet sent so far has been handed to its handler.
  void flush();
  std::uint64_t delivered() const;

 private:
  struct Packet {
    std::string from, to;
    Bytes data;
  };
  void run();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<Packet> queue_;
  std::map<std::string, std::shared_ptr<PacketHandler>> handlers_;
  bool stopping_ = false;
  bool busy_ = false;
  std::uint64_t delivered_ = 0;
  std::thread worker_;
};

struct FaultOptions {
  double drop_prob = 0;
  double duplicate_prob = 0;
  /// Chance that delivery picks a packet other than the oldest due one.
  double reorder_prob = 0;
  /// How far back the reordering may reach (1 disables reordering).
  std::size_t reorder_window = 1;
  Millis max_delay{0};
  std::uint64_t seed = 1;
};

struct FaultStats {
  std::uint64_t sent = 0;
  std::uint64_t dropped = 0;
  std::uint64_t duplicated = 0;
  std::uint64_t reordered = 0;
  std::uint64_t delivered = 0;
};

/// Seeded lossy network. Packets wait in flight until `deliver_one` (or the
/// pump thread) hands them over; with a virtual clock the whole schedule is
/// reproducible from the seed. Each send is dropped independently, so a
/// packet retransmitted forever eventually gets through.
class FaultyTransport : public Transport {
 public:
  FaultyTransport(FaultOptions options, Clock clock);
  ~FaultyTransport() override;

  void attach(const std::string& endpoint, PacketHandler handler) override;
  void detach(const std::string& endpoint) override;
  void send(const std::string& from, const std::string& to, Bytes packet) override;

  /// Delivers one due packet; false when none is due. The handler runs on
  /// the calling thread and its exceptions propagate.
  bool deliver_one();
  std::size_t in_flight() const;
  /// Earliest delivery time among packets in flight.
  std::optional<Millis> next_due() const;
  /// Packets sent to or from an unreachable endpoint are dropped.
  void set_reachable(const std::string& endpoint, bool reachable);
  FaultStats stats() const;

  /// Delivers due packets on a background thread until stopped.
  void start_pump();
  void stop_pump();

 private:
  struct Packet {
    Millis due;
    std::uint64_t order;
    std::string from, to;
    Bytes data;
  };
  bool chance(double p);

  FaultOptions options_;
  Clock clock_;
  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  std::vector<Packet> flight_;
  std::uint64_t next_order_ = 0;
  std::map<std::string, std::shared_ptr<PacketHandler>> handlers_;
  std::set<std::string> unreachable_;
  FaultStats stats_;
  std::thread pump_;
  bool pumping_ = false;
};

/// TCP between processes. Each attached endpoint listens on its configured
/// port; a connection opens with the caller's endpoint name, then carries
/// frames back to back, each delivered to the handler as its own packet.
class SocketTransport : public Transport {
 public:
  /// endpoint name -> "host:port"
  explicit SocketTransport(std::map<std::string, std::string> addresses);
  ~SocketTransport() override;

  void attach(const std::string& endpoint, PacketHandler handler) override;
  void detach(const std::string& endpoint) override;
  void send(const std::string& from, const std::string& to, Bytes packet) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rsm::net
