// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rsm/apps/wordcount.hpp"

#include <map>
#include <random>

#include "rsm/core/handler_context.hpp"

namespace rsm::apps::wordcount {

std::uint64_t word_hash(const std::string& word) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : word) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Bytes word_payload(const std::string& word) { return encode(word); }

Bytes freq_payload(const std::string& word, std::uint64_t freq) {
  Bytes out;
  Writer w(out);
  w.str(word);
  w.u64(freq);
  return out;
}

std::pair<std::string, std::uint64_t> parse_freq(const Bytes& payload) {
  Reader r(payload);
  auto word = r.str();
  return {word, r.u64()};
}

namespace {

Bytes encode_freqs(const std::map<std::string, std::uint64_t>& m) {
  Bytes out;
  Writer w(out);
  w.u64(m.size());
  for (const auto& [k, v] : m) {
    w.str(k);
    w.u64(v);
  }
  return out;
}

std::map<std::string, std::uint64_t> decode_freqs(const Bytes& b) {
  std::map<std::string, std::uint64_t> m;
  if (b.empty()) return m;
  Reader r(b);
  auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto k = r.str();
    m[k] = r.u64();
  }
  return m;
}

}  // namespace

Program program(const Options& options) {
  const std::uint64_t n = options.shards;
  auto main = MachineClass::Builder("MainMachine")
                  .persistent_map("WordCountMachines")
                  .persistent("MaxMachineId", RsmId{})
                  .state("Init")
                  .state("Receive")
                  .start("Init")
                  .on("Init", kInit,
                      [n](HandlerContext& ctx) {
                        auto max_id = ctx.create("MaxMachine");
                        ctx.store_as("MaxMachineId", max_id);
                        for (std::uint64_t i = 0; i < n; ++i) {
                          auto id = ctx.create("WordCountMachine");
                          ctx.put_as("WordCountMachines", i, id);
                          ctx.send(id, kInit, max_id);
                        }
                        ctx.jump("Receive");
                      })
                  .on("Receive", kWord,
                      [n](HandlerContext& ctx) {
                        auto word = ctx.payload<std::string>();
                        auto target = ctx.lookup_as<RsmId>("WordCountMachines", word_hash(word) % n);
                        ctx.send(*target, kWord, ctx.event().payload());
                      })
                  .build();

  auto wc = MachineClass::Builder("WordCountMachine");
  if (options.volatile_word_freq) {
    wc.volatile_field("WordFreq", Bytes{});
  } else {
    wc.persistent_map("WordFreq");
  }
  const bool vol = options.volatile_word_freq;
  wc.persistent<std::uint64_t>("HighFreq", 0)
      .persistent("TargetMachine", RsmId{})
      .volatile_field<std::uint64_t>("WordsSeenSinceLastCrash", 0)
      .state("Init")
      .state("DoCount")
      .start("Init")
      .on("Init", kInit,
          [](HandlerContext& ctx) {
            ctx.store_as("TargetMachine", ctx.payload<RsmId>());
            ctx.jump("DoCount");
          })
      .on("DoCount", kWord, [vol](HandlerContext& ctx) {
        ctx.set_volatile("WordsSeenSinceLastCrash", ctx.volatile_as<std::uint64_t>("WordsSeenSinceLastCrash") + 1);
        auto word = ctx.payload<std::string>();
        std::uint64_t f;
        if (vol) {
          auto m = decode_freqs(ctx.read_volatile("WordFreq"));
          f = ++m[word];
          ctx.write_volatile("WordFreq", encode_freqs(m));
        } else {
          f = ctx.lookup_as<std::uint64_t>("WordFreq", word).value_or(0) + 1;
          ctx.put_as("WordFreq", word, f);
        }
        if (f > ctx.load_as<std::uint64_t>("HighFreq")) {
          ctx.store_as("HighFreq", f);
          ctx.send(ctx.load_as<RsmId>("TargetMachine"), kWordFreq, freq_payload(word, f));
        }
      });

  auto max = MachineClass::Builder("MaxMachine")
                 .persistent<std::uint64_t>("HighFreq", 0)
                 .state("DoCount")
                 .start("DoCount")
                 .on("DoCount", kWordFreq,
                     [](HandlerContext& ctx) {
                       auto [word, freq] = parse_freq(ctx.event().payload());
                       if (freq > ctx.load_as<std::uint64_t>("HighFreq")) {
                         ctx.store_as("HighFreq", freq);
                         ctx.send(RsmId::environment(), kWordFreq, ctx.event().payload());
                       }
                     })
                 .build();

  Program p;
  p.add(main);
  p.add(wc.build());
  p.add(max);
  return p;
}

std::pair<std::string, std::uint64_t> sequential_max(const std::vector<std::string>& words) {
  std::map<std::string, std::uint64_t> freq;
  std::pair<std::string, std::uint64_t> best{"", 0};
  for (const auto& w : words) {
    auto f = ++freq[w];
    if (f > best.second) best = {w, f};
  }
  return best;
}

std::vector<std::string> corpus(std::uint64_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t vocab = 500;
  std::vector<double> weights(vocab);
  for (std::size_t i = 0; i < vocab; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<std::string> words;
  words.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) words.push_back("w" + std::to_string(pick(rng)));
  // Make the top word unique.
  std::map<std::string, std::uint64_t> freq;
  for (const auto& w : words) ++freq[w];
  std::uint64_t top = 0, ties = 0;
  for (const auto& [_, f] : freq) {
    if (f > top) {
      top = f;
      ties = 1;
    } else if (f == top) {
      ++ties;
    }
  }
  if (ties > 1 || words.empty()) words.push_back(words.empty() ? "w0" : sequential_max(words).first);
  return words;
}

namespace {

class MaxMonitor : public testkit::Monitor {
 public:
  explicit MaxMonitor(std::pair<std::string, std::uint64_t> expected)
      : Monitor("wordcount-max", Kind::kLiveness), expected_(std::move(expected)) {}
  void observe(const runtime::HandledEvent& e) override {
    if (e.machine_class != "MaxMachine") return;
    for (const auto& o : e.outputs) {
      if (o.dest.is_environment()) last_ = parse_freq(o.payload);
    }
  }
  bool hot() const override { return last_ != expected_; }
  std::string describe() const override {
    return "max machine reported (" + last_.first + ", " + std::to_string(last_.second) + "), expected (" +
           expected_.first + ", " + std::to_string(expected_.second) + ")";
  }

 private:
  std::pair<std::string, std::uint64_t> expected_;
  std::pair<std::string, std::uint64_t> last_{"", 0};
};

}  // namespace

testkit::MonitorFactory max_monitor(std::pair<std::string, std::uint64_t> expected) {
  return [expected] { return std::make_unique<MaxMonitor>(expected); };
}

testkit::Scenario scenario(const std::vector<std::string>& words, const Options& options) {
  testkit::Scenario s;
  s.name = "wordcount";
  s.program = program(options);
  s.setup = [words, shards = options.shards](testkit::TestEnv& env) {
    auto main = env.create("MainMachine");
    env.send(main, kInit, shards);
    for (const auto& w : words) env.send(main, kWord, word_payload(w));
  };
  s.monitors.push_back(max_monitor(sequential_max(words)));
  return s;
}

}  // namespace rsm::apps::wordcount
