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

// Serial vs OpenMP bulk lookups, per-packet engine throughput by mode, and
// the verification matrix.

#include <benchmark/benchmark.h>

#include <random>

#include "morpheus/batch.hpp"
#include "morpheus/harness.hpp"

using namespace morpheus;

namespace {

TableState router_fib() {
  const Scenario s = build_scenario("router");
  return scenario_tables(s)[*s.program.find_table("forward")];
}

TableState firewall_acl() {
  const Scenario s = build_scenario("firewall");
  return scenario_tables(s)[*s.program.find_table("acl")];
}

std::vector<Key> address_keys(std::size_t n) {
  std::mt19937_64 rng(1);
  std::vector<Key> keys;
  keys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) keys.push_back(Key{static_cast<u128>(0xac100000u | (rng() & 0xfffff))});
  return keys;
}

std::vector<Key> tuple_keys(const Scenario& s, std::size_t n) {
  std::vector<Key> keys;
  for (const auto& p : gen_trace(Locality::None, n, 2, s.flows)) {
    keys.push_back(Key{p.src_ip, p.dst_ip, p.src_port, p.dst_port, proto_number(p.proto)});
  }
  return keys;
}

template <BatchLookup (*Kernel)(const TableState&, const std::vector<Key>&)>
void lpm_batch(benchmark::State& state) {
  const TableState fib = router_fib();
  const auto keys = address_keys(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(fib, keys));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <BatchLookup (*Kernel)(const TableState&, const std::vector<Key>&)>
void wildcard_batch(benchmark::State& state) {
  const TableState acl = firewall_acl();
  const auto keys = tuple_keys(build_scenario("firewall"), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(acl, keys));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void engine_packets(benchmark::State& state) {
  const auto mode = static_cast<EngineMode>(state.range(0));
  const Scenario s = build_scenario("router");
  const auto trace = gen_trace(Locality::High, 50000, 1, s.flows);
  EngineConfig cfg;
  cfg.mode = mode;
  cfg.period = 10000;
  for (auto _ : state) {
    Engine e(s.program, scenario_tables(s), cfg);
    for (const auto& p : trace) benchmark::DoNotOptimize(e.process(p));
    state.counters["mean_cost"] = e.report().mean_cost();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.size()));
  state.SetLabel(std::string(engine_mode_name(mode)));
}

template <std::vector<MatrixOutcome> (*Verify)(const std::vector<MatrixCell>&, const RunConfig&)>
void verify_matrix(benchmark::State& state) {
  const auto cells = full_matrix(1, 1);
  RunConfig base;
  base.packets = 20000;
  base.engine.period = 5000;
  for (auto _ : state) benchmark::DoNotOptimize(Verify(cells, base));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cells.size()));
}

}  // namespace

BENCHMARK(lpm_batch<lookup_batch_serial>)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(lpm_batch<lookup_batch_parallel>)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(wildcard_batch<lookup_batch_serial>)->Arg(1 << 12);
BENCHMARK(wildcard_batch<lookup_batch_parallel>)->Arg(1 << 12);
BENCHMARK(engine_packets)
    ->Arg(static_cast<int>(EngineMode::Baseline))
    ->Arg(static_cast<int>(EngineMode::Morpheus))
    ->Arg(static_cast<int>(EngineMode::NaiveInstrumentation))
    ->Unit(benchmark::kMillisecond);
BENCHMARK(verify_matrix<verify_matrix_serial>)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(verify_matrix<verify_matrix_parallel>)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
