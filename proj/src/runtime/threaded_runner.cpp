// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/runtime/threaded_runner.hpp"

#include <spdlog/spdlog.h>

namespace rsm::runtime {

ThreadedRunner::ThreadedRunner(MachineHost& host, unsigned workers) : host_(host) {
  if (workers == 0) workers = 1;
  for (unsigned i = 0; i < workers; ++i) threads_.emplace_back([this, i] { work(i); });
}

ThreadedRunner::~ThreadedRunner() { stop(); }

void ThreadedRunner::stop() {
  stopping_ = true;
  host_.notify_work();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
}

void ThreadedRunner::work(unsigned index) {
  auto tick_every = host_.config().ack_timeout / 2;
  auto last_tick = std::chrono::steady_clock::now();
  while (!stopping_) {
    bool progressed = false;
    try {
      auto ids = host_.machines();
      // Stagger the starting point so workers spread over machines.
      for (std::size_t k = 0; k < ids.size(); ++k) {
        progressed |= host_.handle_step(ids[(k + index) % ids.size()]);
      }
      for (const auto& s : host_.senders()) progressed |= host_.drain_step(s);
      auto now = std::chrono::steady_clock::now();
      if (index == 0 && now - last_tick >= tick_every) {
        host_.tick();
        last_tick = now;
      }
    } catch (const std::exception& e) {
      spdlog::error("{}: worker {} failed: {}", host_.partition(), index, e.what());
    }
    if (!progressed) host_.wait_for_work(std::chrono::milliseconds(std::max<long>(1, tick_every.count())));
  }
}

bool ThreadedRunner::wait_idle(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (host_.idle()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return host_.idle();
}

}  // namespace rsm::runtime
