// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsm/storage/store.hpp"

namespace rsm::apps::bench {

/// One CSV row. `config` echoes the settings that produced the value.
struct Row {
  std::string scenario;
  std::string config;
  std::string metric;
  double value = 0;
  std::string unit;
};

struct Options {
  /// Logs go under this directory, one subdirectory per run.
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "rsm-bench";
  storage::FsyncPolicy fsync = storage::FsyncPolicy::kAlways;
  unsigned workers = 1;
};

/// A client creating `n` machines one after another, each waited for.
std::vector<Row> creation(std::uint64_t n, bool shared_queues, const Options& options = {});

/// Ping-pong between machines on two partitions; per-round latency
/// quantiles.
std::vector<Row> latency(std::uint64_t rounds, std::size_t payload_bytes, const Options& options = {});

/// Messages from the environment on one partition processed by a sink on
/// another.
std::vector<Row> throughput(std::uint64_t messages, std::size_t payload_bytes, std::uint32_t batch_size,
                            const Options& options = {});

/// Receiver-side commits per delivered message.
std::vector<Row> durable_writes(std::uint64_t messages, bool persistent_inbox, const Options& options = {});

/// Nearest-rank quantile of unsorted samples.
double quantile(std::vector<double> samples, double q);

void write_csv(std::ostream& out, const std::vector<Row>& rows);

}  // namespace rsm::apps::bench
