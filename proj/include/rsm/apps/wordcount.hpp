// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsm/core/machine_class.hpp"
#include "rsm/testkit/explorer.hpp"

namespace rsm::apps::wordcount {

/// Event types.
enum : std::uint32_t { kInit = 1, kWord = 2, kWordFreq = 3 };

struct Options {
  std::uint64_t shards = 4;
  /// Mutant for the testkit: keeps WordFreq in volatile memory.
  bool volatile_word_freq = false;
};

/// MainMachine, WordCountMachine and MaxMachine.
Program program(const Options& options = {});

/// Stable routing hash.
std::uint64_t word_hash(const std::string& word);

Bytes word_payload(const std::string& word);
Bytes freq_payload(const std::string& word, std::uint64_t freq);
std::pair<std::string, std::uint64_t> parse_freq(const Bytes& payload);

/// The highest-frequency word; ties go to the word that reached the
/// frequency first.
std::pair<std::string, std::uint64_t> sequential_max(const std::vector<std::string>& words);

/// `count` words drawn from a skewed vocabulary with a unique most
/// frequent word.
std::vector<std::string> corpus(std::uint64_t count, std::uint64_t seed);

/// Hot until the max machine has reported `expected`.
testkit::MonitorFactory max_monitor(std::pair<std::string, std::uint64_t> expected);

/// Main machine fed with `words` over `shards` shards.
testkit::Scenario scenario(const std::vector<std::string>& words, const Options& options = {});

}  // namespace rsm::apps::wordcount
