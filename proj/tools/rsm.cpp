// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

// rsm: run the examples, test them, check semantics programs, benchmark.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsm/apps/bank.hpp"
#include "rsm/apps/bench.hpp"
#include "rsm/apps/poolserver.hpp"
#include "rsm/apps/wordcount.hpp"
#include "rsm/runtime/threaded_runner.hpp"
#include "rsm/semantics/checks.hpp"

using namespace rsm;
using json = nlohmann::ordered_json;

namespace {

// One host from a config file, driven by worker threads.
class Deployment {
 public:
  Deployment(const std::string& config_path, const std::string& store_override, const Program& program,
             unsigned workers) {
    if (!config_path.empty()) config_ = runtime::HostConfig::load(config_path);
    if (!store_override.empty()) config_.store_path = store_override;
    config_.validate();
    storage::StoreOptions so;
    so.fsync = config_.fsync;
    store_ = config_.store_path.empty() ? storage::Store::in_memory(so) : storage::Store::open(config_.store_path, so);
    if (config_.addresses.empty()) {
      transport_ = std::make_unique<net::InProcessTransport>();
    } else {
      transport_ = std::make_unique<net::SocketTransport>(config_.addresses);
    }
    host_ = std::make_unique<runtime::MachineHost>(config_, store_, program, transport_.get());
    host_->set_env_sink([this](const RsmId& from, const OutputRecord& r) {
      std::lock_guard lock(mu_);
      outputs_.emplace_back(from, r);
    });
    runner_ = std::make_unique<runtime::ThreadedRunner>(*host_, workers);
  }
  ~Deployment() {
    runner_.reset();
    host_.reset();
  }

  runtime::MachineHost& host() { return *host_; }
  const std::string& partition() const { return config_.partition; }
  void settle(std::chrono::seconds timeout = std::chrono::seconds(600)) {
    if (!runner_->wait_idle(timeout)) throw Error("host did not settle within the timeout");
  }
  std::vector<std::pair<RsmId, OutputRecord>> outputs() {
    std::lock_guard lock(mu_);
    return outputs_;
  }

 private:
  runtime::HostConfig config_;
  std::shared_ptr<storage::Store> store_;
  std::unique_ptr<net::Transport> transport_;
  std::unique_ptr<runtime::MachineHost> host_;
  std::unique_ptr<runtime::ThreadedRunner> runner_;
  std::mutex mu_;
  std::vector<std::pair<RsmId, OutputRecord>> outputs_;
};

std::vector<std::string> read_words(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

json status_json(const apps::poolserver::PoolStatus& s) {
  return {{"state", s.state},       {"goal", s.goal},         {"creating", s.creating},
          {"created", s.created},   {"deleting", s.deleting}, {"deleting_pool", s.deleting_pool}};
}

std::vector<apps::poolserver::ClientOp> parse_ops(const std::string& text) {
  using Op = apps::poolserver::ClientOp;
  std::vector<Op> ops;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    auto colon = item.find(':');
    auto verb = item.substr(0, colon);
    std::uint64_t n = colon == std::string::npos ? 0 : std::stoull(item.substr(colon + 1));
    if (verb == "create") {
      ops.push_back({Op::kCreate, n});
    } else if (verb == "resize") {
      ops.push_back({Op::kResize, n});
    } else if (verb == "delete") {
      ops.push_back({Op::kDelete, 0});
    } else {
      throw UsageError("unknown pool op '" + verb + "' (create:N, resize:N, delete)");
    }
  }
  if (ops.empty() || ops.front().kind != Op::kCreate) throw UsageError("pool ops must start with create:N");
  return ops;
}

// ---- rsm run ----

struct RunArgs {
  std::string app = "wordcount";
  std::string config, store, input;
  std::uint64_t words = 10000, seed = 1, shards = 4, accounts = 8, transfers = 1000;
  unsigned workers = 2;
};

int cmd_run(const RunArgs& a) {
  if (a.app == "wordcount") {
    auto program = apps::wordcount::program({.shards = a.shards});
    Deployment d(a.config, a.store, program, a.workers);
    auto words = a.input.empty() ? apps::wordcount::corpus(a.words, a.seed) : read_words(a.input);
    auto main = d.host().create_machine("MainMachine", d.partition());
    d.host().env_send(main, apps::wordcount::kInit, encode(a.shards));
    for (const auto& w : words) d.host().env_send(main, apps::wordcount::kWord, apps::wordcount::word_payload(w));
    d.settle();
    std::pair<std::string, std::uint64_t> last{"", 0};
    for (const auto& [_, r] : d.outputs()) {
      if (r.event_type == apps::wordcount::kWordFreq) last = apps::wordcount::parse_freq(r.payload);
    }
    auto expected = apps::wordcount::sequential_max(words);
    std::cout << json{{"app", "wordcount"},
                      {"words", words.size()},
                      {"max_word", last.first},
                      {"frequency", last.second},
                      {"matches_sequential", last == expected}}
                     .dump(2)
              << "\n";
    return last == expected ? 0 : 1;
  }
  if (a.app == "bank") {
    auto program = apps::bank::program();
    Deployment d(a.config, a.store, program, a.workers);
    std::vector<RsmId> ids;
    for (std::uint64_t i = 0; i < a.accounts; ++i) {
      ids.push_back(d.host().create_machine("Account", d.partition()));
      d.host().env_send(ids.back(), apps::bank::kOpen, encode<std::int64_t>(100));
    }
    std::mt19937_64 rng(a.seed);
    for (std::uint64_t t = 0; t < a.transfers; ++t) {
      d.host().env_send(ids[rng() % ids.size()], apps::bank::kTransfer,
                        apps::bank::transfer_payload(ids[rng() % ids.size()], static_cast<std::int64_t>(rng() % 100)));
    }
    d.settle();
    auto total = apps::bank::total(d.host());
    auto expected = static_cast<std::int64_t>(100 * a.accounts);
    std::cout << json{{"app", "bank"}, {"accounts", a.accounts}, {"total", total}, {"conserved", total == expected}}
                     .dump(2)
              << "\n";
    return total == expected ? 0 : 1;
  }
  throw UsageError("unknown app '" + a.app + "' (wordcount, bank)");
}

// ---- rsm poolserver ----

struct PoolArgs {
  std::string config, store = "rsm-pool.log", pool;
  std::uint64_t size = 0;
  double fail = 0.1, unhealthy = 0.02;
};

int cmd_poolserver(const std::string& op, const PoolArgs& a) {
  namespace ps = apps::poolserver;
  auto program = ps::program({.fail_probability = a.fail, .unhealthy_probability = a.unhealthy});
  Deployment d(a.config, a.store, program, 2);
  RsmId pm;
  if (op == "create") {
    auto provider = d.host().create_machine("ResourceProvider", d.partition());
    pm = d.host().create_machine("PoolManager", d.partition());
    d.host().env_send(pm, ps::kCreatePool, ps::create_pool_payload(a.size, provider));
  } else {
    if (a.pool.empty()) throw UsageError("--pool is required for " + op);
    pm = RsmId::parse(a.pool);
    if (!d.host().hosts(pm)) throw UsageError("no pool " + a.pool + " in " + a.store);
    if (op == "resize") d.host().env_send(pm, ps::kResizePool, encode(a.size));
    if (op == "delete") d.host().env_send(pm, ps::kDeletePool, Bytes{});
  }
  d.settle();
  json out{{"pool", pm.to_string()}};
  if (d.host().hosts(pm) && !d.host().halted(pm)) {
    d.host().env_send(pm, ps::kGetPool, Bytes{});
    d.settle();
  }
  for (const auto& [from, r] : d.outputs()) {
    if (from == pm && r.event_type == ps::kPoolStatus) out["status"] = status_json(ps::decode_status(r.payload));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---- rsm test ----

struct TestArgs {
  std::string program = "wordcount", mutant, ops = "create:10,resize:3", strategy = "portfolio", json_out;
  std::vector<std::string> monitors;
  std::uint64_t iterations = 100, seed = 1, max_steps = 10000, words = 200, accounts = 4, transfers = 40;
  bool inject_crashes = false, no_recheck = false;
  double crash_probability = 0.2;
};

int cmd_test(const TestArgs& a) {
  testkit::Scenario s;
  if (a.program == "wordcount") {
    if (!a.mutant.empty() && a.mutant != "volatile-wordfreq") throw UsageError("unknown wordcount mutant " + a.mutant);
    s = apps::wordcount::scenario(apps::wordcount::corpus(a.words, a.seed),
                                  {.volatile_word_freq = a.mutant == "volatile-wordfreq"});
  } else if (a.program == "poolserver") {
    apps::poolserver::Options o;
    if (a.mutant == "drop-creating-count") {
      o.drop_creating_count = true;
    } else if (a.mutant == "volatile-created-count") {
      o.volatile_created_count = true;
    } else if (!a.mutant.empty()) {
      throw UsageError("unknown poolserver mutant " + a.mutant);
    }
    std::vector<testkit::MonitorFactory> monitors;
    for (const auto& m : a.monitors) {
      if (m == "prop1") {
        monitors.push_back(apps::poolserver::property1());
      } else if (m == "prop2") {
        monitors.push_back(apps::poolserver::property2());
      } else if (m == "prop3") {
        monitors.push_back(apps::poolserver::property3());
      } else {
        throw UsageError("unknown monitor " + m + " (prop1, prop2, prop3)");
      }
    }
    s = apps::poolserver::scenario(parse_ops(a.ops), o, std::move(monitors));
  } else if (a.program == "bank") {
    s = apps::bank::scenario(a.accounts, 100, a.transfers);
  } else {
    throw UsageError("unknown program '" + a.program + "' (wordcount, poolserver, bank)");
  }
  testkit::ExploreOptions o;
  o.iterations = a.iterations;
  o.seed = a.seed;
  o.max_steps = a.max_steps;
  o.strategy = testkit::parse_strategy(a.strategy);
  o.inject_crashes = a.inject_crashes;
  o.crash_probability = a.crash_probability;
  o.check_non_interference = !a.no_recheck;
  auto report = testkit::explore(s, o);
  auto text = report.to_json();
  if (a.json_out.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream(a.json_out) << text << "\n";
    std::cout << (report.passed() ? "pass" : "FAIL") << ": " << report.iterations_run << " iterations, "
              << report.violations.size() << " violations\n";
  }
  return report.passed() ? 0 : 1;
}

// ---- rsm semantics ----

struct SemArgs {
  std::string file, schedule, resets = "all";
  std::uint64_t seed = 1, max_steps = 100000;
  std::int64_t star_domain = 3, machine = 0;
};

int cmd_sem_run(const SemArgs& a) {
  auto p = sem::load_program(a.file);
  sem::Oracle oracle(a.seed, a.star_domain, p.first_fresh_id());
  auto init = sem::initial_config(p);
  auto r = a.schedule.empty() ? sem::run_to_quiescence(p, init, oracle, a.max_steps)
                              : sem::run_schedule(p, init, sem::load_schedule(a.schedule), oracle, true);
  for (const auto& s : r.skipped) std::cerr << "skipped: " << s << "\n";
  std::cout << "# " << r.taken.size() << " steps\n" << sem::dump_traces(r.final);
  return 0;
}

std::vector<sem::Value> target_machines(const sem::Program& p, std::int64_t only) {
  std::vector<sem::Value> out;
  for (const auto& [id, _] : p.machines) {
    if (only == 0 || id == only) out.push_back(id);
  }
  if (out.empty()) throw UsageError("no machine " + std::to_string(only));
  return out;
}

int cmd_sem_transparency(const SemArgs& a) {
  auto p = sem::load_program(a.file);
  sem::ExhaustiveOptions o;
  o.max_resets = a.resets == "all" ? 4 : std::stoi(a.resets);
  o.star_domain = a.star_domain;
  o.seed = a.seed;
  bool ok = true;
  for (auto r : target_machines(p, a.machine)) {
    auto rep = sem::check_transparency_exhaustive(p, sem::initial_config(p), r, o);
    std::cout << "machine " << r << ": " << (rep.violations == 0 ? "pass" : "FAIL") << " (" << rep.runs
              << " runs, " << rep.violations << " violations)\n";
    for (const auto& e : rep.examples) std::cout << "  " << e << "\n";
    ok &= rep.violations == 0;
  }
  return ok ? 0 : 1;
}

int cmd_sem_noninterference(const SemArgs& a) {
  auto p = sem::load_program(a.file);
  bool ok = true;
  for (auto r : target_machines(p, a.machine)) {
    auto g = sem::initial_config(p);
    if (!sem::applicable(p, g, sem::GlobalRule::kStart, r)) continue;
    sem::Oracle o(a.seed, a.star_domain, p.first_fresh_id());
    auto start = sem::step_global(p, g, sem::GlobalRule::kStart, r, o).M.at(r);
    sem::NonInterferenceOptions no;
    no.seed = a.seed;
    no.star_domain = a.star_domain;
    auto cls = std::find_if(p.machines.begin(), p.machines.end(), [&](auto& m) { return m.first == r; })->second;
    auto v = sem::check_non_interference(p, cls, start, no);
    std::cout << "machine " << r << " (" << cls << "): " << (v.passed ? "pass" : "FAIL") << " (" << v.perturbations
              << " perturbations)";
    if (!v.passed) std::cout << " " << v.detail;
    std::cout << "\n";
    ok &= v.passed;
  }
  return ok ? 0 : 1;
}

// ---- rsm bench ----

struct BenchArgs {
  std::string scenario = "all", out, fsync = "always", dir;
  std::uint64_t n = 1000, rounds = 1000, messages = 5000;
  std::size_t payload = 100, latency_payload = 50;
  std::vector<std::uint32_t> batches{1, 16, 64};
};

int cmd_bench(const BenchArgs& a) {
  namespace b = apps::bench;
  b::Options o;
  o.fsync = storage::parse_fsync_policy(a.fsync);
  if (!a.dir.empty()) o.dir = a.dir;
  std::vector<b::Row> rows;
  auto add = [&](std::vector<b::Row> r) { rows.insert(rows.end(), r.begin(), r.end()); };
  bool all = a.scenario == "all";
  if (all || a.scenario == "creation") {
    add(b::creation(a.n, true, o));
    add(b::creation(a.n, false, o));
  }
  if (all || a.scenario == "latency") add(b::latency(a.rounds, a.latency_payload, o));
  if (all || a.scenario == "throughput") {
    for (auto batch : a.batches) add(b::throughput(a.messages, a.payload, batch, o));
  }
  if (all || a.scenario == "writes") {
    add(b::durable_writes(a.messages / 10 + 1, true, o));
    add(b::durable_writes(a.messages / 10 + 1, false, o));
  }
  if (rows.empty()) throw UsageError("unknown scenario '" + a.scenario + "' (creation, latency, throughput, writes, all)");
  if (a.out.empty()) {
    b::write_csv(std::cout, rows);
  } else {
    std::ofstream f(a.out);
    b::write_csv(f, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reliable state machines: runtime, testkit and semantics tools"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Deploy an example on one host and feed it a workload");
  run_cmd->add_option("app", run.app, "wordcount or bank");
  run_cmd->add_option("--config", run.config, "Host config file (key = value)")->check(CLI::ExistingFile);
  run_cmd->add_option("--store", run.store, "Log file; overrides the config");
  run_cmd->add_option("--input", run.input, "Whitespace-separated words (wordcount)")->check(CLI::ExistingFile);
  run_cmd->add_option("--words", run.words, "Generated corpus size when no input is given");
  run_cmd->add_option("--shards", run.shards);
  run_cmd->add_option("--seed", run.seed);
  run_cmd->add_option("--accounts", run.accounts);
  run_cmd->add_option("--transfers", run.transfers);
  run_cmd->add_option("--workers", run.workers);

  TestArgs test;
  auto* test_cmd = app.add_subcommand("test", "Systematically test an example; prints a JSON report");
  test_cmd->add_option("--program", test.program, "wordcount, poolserver or bank");
  test_cmd->add_option("--iterations", test.iterations);
  test_cmd->add_option("--seed", test.seed);
  test_cmd->add_option("--max-steps", test.max_steps, "Exploration depth");
  test_cmd->add_flag("--inject-crashes", test.inject_crashes);
  test_cmd->add_option("--crash-probability", test.crash_probability);
  test_cmd->add_flag("--no-recheck", test.no_recheck, "Skip re-execution after injected crashes");
  test_cmd->add_option("--strategy", test.strategy, "random, round-robin, pct, portfolio");
  test_cmd->add_option("--monitor", test.monitors, "poolserver: prop1, prop2, prop3 (default by ops)");
  test_cmd->add_option("--ops", test.ops, "poolserver client ops, e.g. create:100,resize:5");
  test_cmd->add_option("--mutant", test.mutant, "volatile-wordfreq, drop-creating-count, volatile-created-count");
  test_cmd->add_option("--words", test.words);
  test_cmd->add_option("--accounts", test.accounts);
  test_cmd->add_option("--transfers", test.transfers);
  test_cmd->add_option("--json", test.json_out, "Write the report here and print a summary");

  SemArgs sem_args;
  auto* sem_cmd = app.add_subcommand("semantics", "Interpret and check programs in the core calculus");
  sem_cmd->require_subcommand(1);
  auto* sem_run = sem_cmd->add_subcommand("run", "Run to quiescence (or a schedule) and print ghost traces");
  auto* sem_tr = sem_cmd->add_subcommand("check-transparency", "Exhaustive reset placement against reset-free runs");
  auto* sem_ni = sem_cmd->add_subcommand("check-noninterference", "Perturb volatile fields of each starting handler");
  for (auto* c : {sem_run, sem_tr, sem_ni}) {
    c->add_option("file", sem_args.file)->required()->check(CLI::ExistingFile);
    c->add_option("--seed", sem_args.seed);
    c->add_option("--star-domain", sem_args.star_domain);
  }
  sem_run->add_option("--schedule", sem_args.schedule, "One '<rule> <machine>' per line")->check(CLI::ExistingFile);
  sem_run->add_option("--max-steps", sem_args.max_steps);
  sem_tr->add_option("--resets", sem_args.resets, "Maximum resets per run, or 'all' (4)");
  for (auto* c : {sem_tr, sem_ni}) c->add_option("--machine", sem_args.machine, "Only this machine id");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Microbenchmarks; CSV on stdout or --out");
  bench_cmd->add_option("--scenario", bench.scenario, "creation, latency, throughput, writes, all");
  bench_cmd->add_option("--out", bench.out);
  bench_cmd->add_option("--fsync", bench.fsync, "always, batched, never");
  bench_cmd->add_option("--dir", bench.dir, "Scratch directory for logs");
  bench_cmd->add_option("--n", bench.n, "Machines created");
  bench_cmd->add_option("--rounds", bench.rounds, "Ping-pong rounds");
  bench_cmd->add_option("--messages", bench.messages);
  bench_cmd->add_option("--payload", bench.payload, "Throughput payload bytes");
  bench_cmd->add_option("--batch", bench.batches, "Batch sizes for throughput");

  PoolArgs pool;
  std::string pool_op;
  auto* pool_cmd = app.add_subcommand("poolserver", "Pool client against a local host");
  pool_cmd->add_option("op", pool_op, "create, get, resize, delete")
      ->required()
      ->check(CLI::IsMember({"create", "get", "resize", "delete"}));
  pool_cmd->add_option("--size", pool.size);
  pool_cmd->add_option("--pool", pool.pool, "Pool id printed by create");
  pool_cmd->add_option("--store", pool.store);
  pool_cmd->add_option("--config", pool.config)->check(CLI::ExistingFile);
  pool_cmd->add_option("--fail", pool.fail, "Provider failure probability");
  pool_cmd->add_option("--unhealthy", pool.unhealthy, "Provider unhealthy probability");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  try {
    if (*run_cmd) return cmd_run(run);
    if (*test_cmd) return cmd_test(test);
    if (*sem_run) return cmd_sem_run(sem_args);
    if (*sem_tr) return cmd_sem_transparency(sem_args);
    if (*sem_ni) return cmd_sem_noninterference(sem_args);
    if (*bench_cmd) return cmd_bench(bench);
    if (*pool_cmd) {
      if ((pool_op == "create" || pool_op == "resize") && pool_cmd->count("--size") == 0) {
        throw UsageError(pool_op + " needs --size");
      }
      return cmd_poolserver(pool_op, pool);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
