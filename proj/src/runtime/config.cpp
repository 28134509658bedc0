// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/runtime/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rsm/core/errors.hpp"

namespace rsm::runtime {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw UsageError("'" + key + "' expects a boolean, got '" + v + "'");
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw UsageError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

}  // namespace

HostConfig HostConfig::parse(std::string_view text) {
  HostConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    if (key == "partition") {
      c.partition = value;
    } else if (key == "store") {
      c.store_path = value;
    } else if (key == "partitions") {
      c.partitions.clear();
      std::istringstream parts(value);
      std::string p;
      while (std::getline(parts, p, ',')) {
        if (auto t = trim(p); !t.empty()) c.partitions.push_back(t);
      }
    } else if (key == "batch_size") {
      c.batch_size = static_cast<std::uint32_t>(parse_uint(key, value));
    } else if (key == "shared_queues") {
      c.shared_queues = parse_bool(key, value);
    } else if (key == "persistent_inbox") {
      c.persistent_inbox = parse_bool(key, value);
    } else if (key == "fsync") {
      c.fsync = storage::parse_fsync_policy(value);
    } else if (key == "seed") {
      c.seed = parse_uint(key, value);
    } else if (key == "ack_timeout_ms") {
      c.ack_timeout = std::chrono::milliseconds(parse_uint(key, value));
    } else if (key == "max_backoff_ms") {
      c.max_backoff = std::chrono::milliseconds(parse_uint(key, value));
    } else if (key == "max_redeliveries") {
      c.max_redeliveries = static_cast<std::uint32_t>(parse_uint(key, value));
    } else if (key == "local_delivery") {
      c.local_delivery = parse_bool(key, value);
    } else if (key == "id_block") {
      c.id_block = static_cast<std::uint32_t>(parse_uint(key, value));
    } else if (key.rfind("address.", 0) == 0) {
      c.addresses[key.substr(8)] = value;
    } else {
      throw UsageError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

HostConfig HostConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read host config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void HostConfig::validate() const {
  if (partition.empty() || partition == "env" || partition.find('\0') != std::string::npos) {
    throw UsageError("invalid partition name '" + partition + "'");
  }
  if (batch_size < 1 || batch_size > 1024) throw UsageError("batch_size must be in 1..1024");
  if (id_block < 1) throw UsageError("id_block must be positive");
  if (ack_timeout.count() <= 0) throw UsageError("ack_timeout_ms must be positive");
  if (max_backoff < ack_timeout) throw UsageError("max_backoff_ms must be at least ack_timeout_ms");
  if (!partitions.empty() && std::find(partitions.begin(), partitions.end(), partition) == partitions.end()) {
    throw UsageError("partitions must include this host's partition '" + partition + "'");
  }
}

std::vector<std::string> HostConfig::placement_targets() const {
  return partitions.empty() ? std::vector<std::string>{partition} : partitions;
}

std::string HostConfig::to_string() const {
  std::ostringstream out;
  out << "partition = " << partition << "\n";
  if (!store_path.empty()) out << "store = " << store_path << "\n";
  if (!partitions.empty()) {
    out << "partitions = ";
    for (std::size_t i = 0; i < partitions.size(); ++i) out << (i ? "," : "") << partitions[i];
    out << "\n";
  }
  out << "batch_size = " << batch_size << "\n"
      << "shared_queues = " << (shared_queues ? "true" : "false") << "\n"
      << "persistent_inbox = " << (persistent_inbox ? "true" : "false") << "\n"
      << "fsync = " << storage::to_string(fsync) << "\n"
      << "seed = " << seed << "\n"
      << "ack_timeout_ms = " << ack_timeout.count() << "\n"
      << "max_backoff_ms = " << max_backoff.count() << "\n"
      << "max_redeliveries = " << max_redeliveries << "\n"
      << "local_delivery = " << (local_delivery ? "true" : "false") << "\n"
      << "id_block = " << id_block << "\n";
  for (const auto& [name, addr] : addresses) out << "address." << name << " = " << addr << "\n";
  return out.str();
}

}  // namespace rsm::runtime
