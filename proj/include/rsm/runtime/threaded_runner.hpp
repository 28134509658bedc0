// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

#include "rsm/runtime/host.hpp"

namespace rsm::runtime {

/// Runs a host's tasks on a pool of worker threads until stopped. Workers
/// sleep on the host's work notification when nothing is runnable.
class ThreadedRunner {
 public:
  ThreadedRunner(MachineHost& host, unsigned workers = 2);
  ~ThreadedRunner();
  ThreadedRunner(const ThreadedRunner&) = delete;
  ThreadedRunner& operator=(const ThreadedRunner&) = delete;

  void stop();
  /// Waits until the host is idle or the timeout passes; true when idle.
  bool wait_idle(std::chrono::milliseconds timeout);

 private:
  void work(unsigned index);

  MachineHost& host_;
  std::atomic<bool> stopping_{false};
  std::vector<std::thread> threads_;
};

}  // namespace rsm::runtime
