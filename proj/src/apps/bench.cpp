// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/apps/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "rsm/core/handler_context.hpp"
#include "rsm/net/transport.hpp"
#include "rsm/runtime/threaded_runner.hpp"

namespace rsm::apps::bench {
namespace {

using Clock = std::chrono::steady_clock;

enum : std::uint32_t { kStart = 1, kBall = 2, kData = 3 };

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

Program bench_program() {
  Program p;
  p.add(MachineClass::Builder("Blank").state("S").start("S").build());
  // Start payload: (peer, rounds, ball). Ping serves the ball until the
  // rounds run out; Pong returns it.
  p.add(MachineClass::Builder("Ping")
            .persistent<RsmId>("peer", RsmId{})
            .persistent<std::uint64_t>("left", 0)
            .state("S")
            .start("S")
            .on("S", kStart,
                [](HandlerContext& ctx) {
                  Reader r(ctx.event().payload());
                  auto peer = Codec<RsmId>::decode_from(r);
                  auto rounds = r.u64();
                  auto ball = r.blob();
                  ctx.store_as("peer", peer);
                  ctx.store_as("left", rounds);
                  ctx.send(peer, kBall, std::move(ball));
                })
            .on("S", kBall,
                [](HandlerContext& ctx) {
                  auto left = ctx.load_as<std::uint64_t>("left");
                  if (left <= 1) {
                    ctx.store_as<std::uint64_t>("left", 0);
                    return;
                  }
                  ctx.store_as("left", left - 1);
                  ctx.send(ctx.load_as<RsmId>("peer"), kBall, ctx.event().payload());
                })
            .build());
  p.add(MachineClass::Builder("Pong")
            .state("S")
            .start("S")
            .on("S", kBall, [](HandlerContext& ctx) { ctx.send(ctx.event().source(), kBall, ctx.event().payload()); })
            .build());
  p.add(MachineClass::Builder("Sink")
            .persistent<std::uint64_t>("bytes", 0)
            .state("S")
            .start("S")
            .on("S", kData,
                [](HandlerContext& ctx) {
                  ctx.store_as("bytes", ctx.load_as<std::uint64_t>("bytes") + ctx.event().payload().size());
                })
            .build());
  return p;
}

const Program& program() {
  static const Program p = bench_program();
  return p;
}

// A small cluster on real log files, each host driven by worker threads.
class Deployment {
 public:
  Deployment(const std::string& name, runtime::HostConfig base, const Options& options,
             std::vector<std::string> partitions = {"p0", "p1"}) {
    dir_ = options.dir / name;
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
    for (const auto& p : partitions) {
      auto cfg = base;
      cfg.partition = p;
      cfg.partitions = partitions;
      cfg.fsync = options.fsync;
      storage::StoreOptions so;
      so.fsync = options.fsync;
      stores_.push_back(storage::Store::open(dir_ / (p + ".log"), so));
      hosts_.push_back(std::make_unique<runtime::MachineHost>(cfg, stores_.back(), program(), &transport_));
    }
    workers_ = options.workers;
  }
  ~Deployment() {
    runners_.clear();
    hosts_.clear();
    stores_.clear();
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }

  runtime::MachineHost& host(std::size_t i) { return *hosts_[i]; }
  storage::Store& store(std::size_t i) { return *stores_[i]; }
  void start() {
    for (auto& h : hosts_) runners_.push_back(std::make_unique<runtime::ThreadedRunner>(*h, workers_));
  }
  void stop() { runners_.clear(); }
  void settle() {
    for (auto& r : runners_) r->wait_idle(std::chrono::seconds(60));
  }

 private:
  std::filesystem::path dir_;
  net::InProcessTransport transport_;
  std::vector<std::shared_ptr<storage::Store>> stores_;
  std::vector<std::unique_ptr<runtime::MachineHost>> hosts_;
  std::vector<std::unique_ptr<runtime::ThreadedRunner>> runners_;
  unsigned workers_ = 1;
};

std::string echo(const runtime::HostConfig& c, const Options& o, const std::string& extra) {
  return fmt::format("batch_size={};shared_queues={};persistent_inbox={};fsync={};{}", c.batch_size, c.shared_queues,
                     c.persistent_inbox, storage::to_string(o.fsync), extra);
}

// Waits on a counter bumped by an observer.
class Counter {
 public:
  void bump() {
    {
      std::lock_guard lock(mu_);
      ++n_;
    }
    cv_.notify_all();
  }
  bool wait_for(std::uint64_t target, std::chrono::seconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return n_ >= target; });
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t n_ = 0;
};

}  // namespace

double quantile(std::vector<double> samples, double q) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
  return samples[std::clamp<std::size_t>(rank, 1, samples.size()) - 1];
}

std::vector<Row> creation(std::uint64_t n, bool shared_queues, const Options& options) {
  runtime::HostConfig cfg;
  cfg.shared_queues = shared_queues;
  Deployment d("creation", cfg, options, {"p0"});
  d.start();
  auto& host = d.host(0);
  auto before = d.store(0).stats().commits;
  auto t0 = Clock::now();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto id = host.create_machine("Blank");
    while (!host.hosts(id)) std::this_thread::yield();
  }
  double total = ms_since(t0);
  auto commits = d.store(0).stats().commits - before;
  auto config = echo(cfg, options, fmt::format("n={}", n));
  return {{"creation", config, "total", total, "ms"},
          {"creation", config, "per_machine", total / static_cast<double>(n), "ms"},
          {"creation", config, "commits_per_machine", static_cast<double>(commits) / static_cast<double>(n), "count"}};
}

std::vector<Row> latency(std::uint64_t rounds, std::size_t payload_bytes, const Options& options) {
  runtime::HostConfig cfg;
  Deployment d("latency", cfg, options);
  std::vector<double> samples;
  std::mutex mu;
  Counter served;
  auto last = Clock::now();
  d.host(0).set_observer([&](const runtime::HandledEvent& e) {
    if (e.machine_class != "Ping") return;
    {
      std::lock_guard lock(mu);
      auto now = Clock::now();
      if (e.event.type() == kBall) samples.push_back(std::chrono::duration<double, std::milli>(now - last).count());
      last = now;
    }
    served.bump();
  });
  d.start();
  auto ping = d.host(0).create_machine("Ping", "p0");
  auto pong = d.host(0).create_machine("Pong", "p1");
  d.settle();
  Bytes start;
  Writer w(start);
  Codec<RsmId>::encode_to(w, pong);
  w.u64(rounds);
  w.blob(Bytes(payload_bytes, 0x5a));
  d.host(0).env_send(ping, kStart, std::move(start));
  served.wait_for(rounds + 1, std::chrono::seconds(600));
  std::lock_guard lock(mu);
  auto config = echo(cfg, options, fmt::format("rounds={};payload={}", rounds, payload_bytes));
  double mean = samples.empty() ? 0 : std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
  return {{"latency", config, "p50", quantile(samples, 0.5), "ms"},
          {"latency", config, "p90", quantile(samples, 0.9), "ms"},
          {"latency", config, "p99", quantile(samples, 0.99), "ms"},
          {"latency", config, "mean", mean, "ms"}};
}

std::vector<Row> throughput(std::uint64_t messages, std::size_t payload_bytes, std::uint32_t batch_size,
                            const Options& options) {
  runtime::HostConfig cfg;
  cfg.batch_size = batch_size;
  Deployment d("throughput", cfg, options);
  Counter handled;
  d.host(1).set_observer([&](const runtime::HandledEvent& e) {
    if (e.machine_class == "Sink") handled.bump();
  });
  d.start();
  auto sink = d.host(0).create_machine("Sink", "p1");
  d.settle();
  // Queue everything first so the timed part is transfer and processing.
  d.stop();
  for (std::uint64_t i = 0; i < messages; ++i) d.host(0).env_send(sink, kData, Bytes(payload_bytes, 0x33));
  auto t0 = Clock::now();
  d.start();
  handled.wait_for(messages, std::chrono::seconds(600));
  double seconds = ms_since(t0) / 1000.0;
  auto config = echo(cfg, options, fmt::format("messages={};payload={}", messages, payload_bytes));
  double bytes = static_cast<double>(messages * payload_bytes);
  return {{"throughput", config, "throughput", bytes / seconds / 1e6, "MB/s"},
          {"throughput", config, "messages_per_second", static_cast<double>(messages) / seconds, "msg/s"}};
}

std::vector<Row> durable_writes(std::uint64_t messages, bool persistent_inbox, const Options& options) {
  runtime::HostConfig cfg;
  cfg.persistent_inbox = persistent_inbox;
  cfg.batch_size = 1;
  Deployment d("writes", cfg, options);
  Counter handled;
  d.host(1).set_observer([&](const runtime::HandledEvent& e) {
    if (e.machine_class == "Sink") handled.bump();
  });
  d.start();
  auto sink = d.host(0).create_machine("Sink", "p1");
  d.settle();
  auto before = d.store(1).stats().commits;
  for (std::uint64_t i = 0; i < messages; ++i) d.host(0).env_send(sink, kData, Bytes(100, 0x33));
  handled.wait_for(messages, std::chrono::seconds(600));
  d.settle();
  auto commits = d.store(1).stats().commits - before;
  auto config = echo(cfg, options, fmt::format("messages={}", messages));
  return {{"durable_writes", config, "receiver_commits_per_message",
           static_cast<double>(commits) / static_cast<double>(messages), "count"}};
}

void write_csv(std::ostream& out, const std::vector<Row>& rows) {
  out << "scenario,config,metric,value,unit\n";
  for (const auto& r : rows) out << fmt::format("{},\"{}\",{},{:.6g},{}\n", r.scenario, r.config, r.metric, r.value, r.unit);
}

}  // namespace rsm::apps::bench
