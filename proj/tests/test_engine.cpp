//  Copyright 2026 The morpheus-mini Authors
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#include <doctest.h>

#include <map>

#include "morpheus/engine.hpp"
#include "support.hpp"

using namespace morpheus;
using namespace morpheus::test;

namespace {

Key flow_of(const Packet& p) { return Key{p.src_ip, p.dst_ip, p.src_port, p.dst_port, proto_number(p.proto)}; }

Packet most_frequent(const std::vector<Packet>& trace) {
  std::map<Key, std::size_t> counts;
  for (const auto& p : trace) ++counts[flow_of(p)];
  const Packet* best = &trace.front();
  std::size_t n = 0;
  for (const auto& p : trace) {
    if (const auto c = counts[flow_of(p)]; c > n) {
      best = &p;
      n = c;
    }
  }
  return *best;
}

EngineConfig quick(EngineMode mode = EngineMode::Morpheus) {
  EngineConfig cfg;
  cfg.mode = mode;
  cfg.period = 5000;
  cfg.compile_latency = 200;
  return cfg;
}

}  // namespace

TEST_CASE("a single pass instruction") {
  const Program p = parse_program("program minimal version=0 provenance=original\nentry start\nstart:\n  ret pass\n");
  Engine e(p, {}, quick());
  const auto r = e.process(Packet{});
  CHECK(r.action.verdict == Verdict::Pass);
  CHECK(r.cost.total() == 1);
  CHECK(e.report().packets == 1);
  CHECK(e.report().total() == 1);
}

TEST_CASE("no packets, empty report") {
  const Scenario s = build_scenario("router");
  Engine e(s.program, scenario_tables(s), quick());
  CHECK(e.report().packets == 0);
  CHECK(e.report().total() == 0);
  CHECK(e.report().mean_cost() == 0.0);
  CHECK(e.report().spec_hit_fraction() == 0.0);
  CHECK(e.version() == 0);
  CHECK(e.packets_seen() == 0);
}

TEST_CASE("cost breakdown adds up") {
  const Scenario s = build_scenario("katran_lb");
  Engine e(s.program, scenario_tables(s), quick());
  std::uint64_t sum = 0;
  for (const auto& pkt : gen_trace(Locality::Low, 12000, 2, s.flows)) sum += e.process(pkt).cost.total();
  e.finish_pending();
  const auto& r = e.report();
  CHECK(r.packets == 12000);
  CHECK(r.total() == sum);
  std::uint64_t by_cat = 0;
  for (auto v : r.breakdown.by_category) by_cat += v;
  CHECK(by_cat == r.total());
  CHECK(r.breakdown[CostCategory::Instrumentation] > 0);
  CHECK(r.recompiles >= 2);
}

TEST_CASE("heavy hitter packets get cheaper after a compile") {
  const Scenario s = build_scenario("router");
  const auto trace = gen_trace(Locality::High, 20000, 1, s.flows);
  Engine e(s.program, scenario_tables(s), quick());
  Engine base(s.program, scenario_tables(s), quick(EngineMode::Baseline));
  for (const auto& pkt : trace) {
    e.process(pkt);
    base.process(pkt);
  }
  e.finish_pending();
  CHECK(e.version() >= 1);
  CHECK(base.version() == 0);
  CHECK(base.report().recompiles == 0);
  const Packet hot = most_frequent(trace);
  const auto fast = e.process(hot);
  const auto slow = base.process(hot);
  CHECK(fast.action == slow.action);
  CHECK(fast.specialized);
  CHECK(fast.cost.total() < slow.cost.total());
}

TEST_CASE("a data-plane write sends the next packet down the fallback") {
  const Scenario s = build_scenario("katran_lb");
  const auto warm = gen_trace(Locality::High, 20000, 3, s.flows);
  EngineConfig cfg = quick();
  cfg.period = 1000000;
  Engine e(s.program, scenario_tables(s), cfg);
  Engine base(s.program, scenario_tables(s), quick(EngineMode::Baseline));
  // The first compile instruments the now-populated connection table, the
  // second one specializes it.
  for (int round = 0; round < 2; ++round) {
    for (const auto& pkt : warm) {
      e.process(pkt);
      base.process(pkt);
    }
    REQUIRE(e.compile_now());
  }
  REQUIRE(e.artifact()->guards.size() == 2);
  // UDP services are flagged and skip the connection table.
  std::vector<Packet> tcp;
  for (const auto& p : warm) {
    if (p.proto == Proto::Tcp) tcp.push_back(p);
  }
  const Packet known = most_frequent(tcp);
  const auto before = e.process(known);
  CHECK(before.specialized);
  CHECK_FALSE(before.guard_fallback);
  CHECK(before.action == base.process(known).action);

  // A flow the connection table has never seen is written on the data plane.
  Packet fresh = known;
  fresh.src_ip = 0x0a7f7f7f;
  fresh.src_port = 61000;
  CHECK(e.process(fresh).action == base.process(fresh).action);
  const auto after = e.process(known);
  CHECK(after.guard_fallback);
  CHECK(after.action == base.process(known).action);
}

TEST_CASE("a route update is visible on the next packet") {
  const Scenario s = build_scenario("router");
  const auto warm = gen_trace(Locality::High, 20000, 4, s.flows);
  EngineConfig cfg = quick();
  cfg.period = 1000000;
  cfg.trigger = CompileTrigger::Periodic;
  Engine e(s.program, scenario_tables(s), cfg);
  for (const auto& pkt : warm) e.process(pkt);
  REQUIRE(e.compile_now());
  const Packet hot = most_frequent(warm);
  REQUIRE(e.process(hot).specialized);

  CHECK(e.control_update("forward", insert(lpm_row(hot.dst_ip, 32, {v32(0x123456), v16(9)}))) ==
        UpdateStatus::Applied);
  const auto applied = e.take_applied();
  REQUIRE(applied.size() == 1);
  CHECK(applied[0].table == *s.program.find_table("forward"));
  const std::uint64_t spec_before = e.report().specialized_packets;
  for (int i = 0; i < 100; ++i) {
    const auto r = e.process(hot);
    CHECK(r.action.packet.dst_mac == 0x123456);
    CHECK(r.action.packet.vlan == 9);
    CHECK_FALSE(r.specialized);
  }
  CHECK(e.report().specialized_packets == spec_before);
  REQUIRE(e.compile_now());
  const auto r = e.process(hot);
  CHECK(r.specialized);
  CHECK(r.action.packet.dst_mac == 0x123456);
}

TEST_CASE("updates during a compile wait for the swap") {
  const Scenario s = build_scenario("router");
  EngineConfig cfg = quick();
  cfg.period = 1000;
  cfg.compile_latency = 500;
  cfg.trigger = CompileTrigger::Periodic;
  Engine e(s.program, scenario_tables(s), cfg);
  const auto trace = gen_trace(Locality::High, 3000, 5, s.flows);
  std::size_t i = 0;
  while (!e.compiling()) e.process(trace[i++]);
  const std::uint64_t started = e.packets_seen();
  const std::uint64_t gen = e.tables()[2].generation();
  CHECK(e.control_update("forward", insert(lpm_row(0x01020300, 24, {v32(1), v16(1)}))) == UpdateStatus::Queued);
  CHECK(e.take_applied().empty());
  CHECK(e.tables()[2].generation() == gen);
  while (e.compiling()) e.process(trace[i++]);
  CHECK(e.packets_seen() - started <= 501);
  const auto applied = e.take_applied();
  CHECK(applied.size() == 1);
  CHECK(e.tables()[2].generation() == gen + 1);
  CHECK_FALSE(e.compiling());

  // With event triggering, the applied read-only update starts the next compile.
  cfg.trigger = CompileTrigger::Both;
  Engine ev(s.program, scenario_tables(s), cfg);
  i = 0;
  while (!ev.compiling()) ev.process(trace[i++]);
  ev.control_update("forward", insert(lpm_row(0x01020300, 24, {v32(1), v16(1)})));
  const std::uint64_t v = ev.version();
  while (ev.version() == v) ev.process(trace[i++]);
  CHECK(ev.take_applied().size() == 1);
  CHECK(ev.compiling());

  // Schema errors surface immediately, even mid-compile.
  Mutation bad = insert(exact_row({1, 2}, {v1(1)}));
  CHECK_THROWS_AS(e.control_update("router_cfg", bad), Error);
  CHECK_THROWS_AS(e.control_update("no_such_table", bad), Error);
}

TEST_CASE("multi-worker runs keep versions monotone") {
  const Scenario s = build_scenario("firewall");
  EngineConfig cfg = quick();
  cfg.workers = 4;
  cfg.keep_packet_log = true;
  Engine e(s.program, scenario_tables(s), cfg);
  for (const auto& pkt : gen_trace(Locality::High, 30000, 6, s.flows)) e.process(pkt);
  const auto& log = e.packet_log();
  REQUIRE(log.size() == 30000);
  std::set<std::size_t> workers;
  for (std::size_t i = 1; i < log.size(); ++i) {
    CHECK(log[i].seq == log[i - 1].seq + 1);
    REQUIRE(log[i].version >= log[i - 1].version);
    REQUIRE(log[i].version - log[i - 1].version <= 1);
    workers.insert(log[i].worker);
  }
  CHECK(workers.size() == 4);
  CHECK(log.back().version >= 3);
  const std::string csv = format_packet_log(log);
  CHECK(csv.rfind("seq,version,cost,action\n0,0,", 0) == 0);
}

TEST_CASE("naive instrumentation records every lookup") {
  const Scenario s = build_scenario("katran_lb");
  Engine naive(s.program, scenario_tables(s), quick(EngineMode::NaiveInstrumentation));
  Engine adaptive(s.program, scenario_tables(s), quick());
  Engine base(s.program, scenario_tables(s), quick(EngineMode::Baseline));
  for (const auto& pkt : gen_trace(Locality::Low, 12000, 7, s.flows)) {
    const auto want = base.process(pkt).action;
    CHECK(naive.process(pkt).action == want);
    CHECK(adaptive.process(pkt).action == want);
  }
  CHECK(naive.version() >= 1);
  CHECK(naive.report().breakdown[CostCategory::Instrumentation] >
        adaptive.report().breakdown[CostCategory::Instrumentation]);
  CHECK(base.report().breakdown[CostCategory::Instrumentation] == 0);
}

TEST_CASE("engine config") {
  const EngineConfig d;
  CHECK(d.period == 50000);
  CHECK(d.trigger == CompileTrigger::Both);
  CHECK(d.mode == EngineMode::Morpheus);
  CHECK_NOTHROW(d.check());

  const auto cfg = parse_engine_config(R"({"mode": "baseline", "workers": 3, "period": 777,
      "trigger": "event", "sampling": {"probability": 0.25, "top_k": 4},
      "disabled_passes": ["jit"], "disabled_tables": ["conn_table"]})");
  CHECK(cfg.mode == EngineMode::Baseline);
  CHECK(cfg.workers == 3);
  CHECK(cfg.period == 777);
  CHECK(cfg.compile_latency == 1000);
  CHECK(cfg.trigger == CompileTrigger::Event);
  CHECK(cfg.passes.sampling.probability == 0.25);
  CHECK(cfg.passes.sampling.top_k == 4);
  CHECK(cfg.passes.disabled_passes.count("jit") == 1);
  CHECK(cfg.passes.disabled_tables.count("conn_table") == 1);

  CHECK_THROWS_AS(parse_engine_config(R"({"perod": 5})"), Error);
  CHECK_THROWS_AS(parse_engine_config(R"({"sampling": {"p": 0.1}})"), Error);
  CHECK_THROWS_AS(parse_engine_config(R"({"workers": 0})"), Error);
  CHECK_THROWS_AS(parse_engine_config(R"({"mode": "turbo"})"), Error);
  CHECK_THROWS_AS(parse_engine_config("not json"), Error);

  for (auto m : {EngineMode::Baseline, EngineMode::Morpheus, EngineMode::NaiveInstrumentation}) {
    CHECK(engine_mode_from_name(engine_mode_name(m)) == m);
  }
  for (auto t : {CompileTrigger::Periodic, CompileTrigger::Event, CompileTrigger::Both}) {
    CHECK(trigger_from_name(trigger_name(t)) == t);
  }
}

TEST_CASE("periodic compiles follow the period") {
  const Scenario s = build_scenario("l2switch");
  EngineConfig cfg = quick();
  cfg.trigger = CompileTrigger::Periodic;
  Engine e(s.program, scenario_tables(s), cfg);
  for (const auto& pkt : gen_trace(Locality::High, 25000, 8, s.flows)) e.process(pkt);
  e.finish_pending();
  CHECK(e.report().recompiles == 5);
  CHECK(e.pass_logs().size() == 5);
}
