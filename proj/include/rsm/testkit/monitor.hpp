// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "rsm/runtime/host.hpp"

namespace rsm::testkit {

/// A specification checked against committed handler executions.
///
/// Safety monitors call `fail` when they see a bad event sequence. Liveness
/// monitors report `hot()` while an obligation is pending; a run fails if a
/// monitor is still hot when the run ends fairly.
class Monitor {
 public:
  enum class Kind { kSafety, kLiveness };

  Monitor(std::string name, Kind kind) : name_(std::move(name)), kind_(kind) {}
  virtual ~Monitor() = default;

  const std::string& name() const { return name_; }
  Kind kind() const { return kind_; }

  virtual void observe(const runtime::HandledEvent& event) = 0;
  virtual bool hot() const { return false; }
  /// Describes the pending obligation for liveness reports.
  virtual std::string describe() const { return name_ + " is hot"; }

  const std::optional<std::string>& error() const { return error_; }

 protected:
  void fail(std::string message) {
    if (!error_) error_ = std::move(message);
  }

 private:
  std::string name_;
  Kind kind_;
  std::optional<std::string> error_;
};

using MonitorFactory = std::function<std::unique_ptr<Monitor>()>;

}  // namespace rsm::testkit
