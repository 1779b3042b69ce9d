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

#include "morpheus/harness.hpp"
#include "support.hpp"

using namespace morpheus;

namespace {

RunConfig small(const std::string& scenario, Locality profile, std::size_t packets = 20000) {
  RunConfig cfg;
  cfg.scenario = scenario;
  cfg.profile = profile;
  cfg.packets = packets;
  cfg.engine.period = 5000;
  cfg.engine.compile_latency = 200;
  cfg.window = 5000;
  return cfg;
}

}  // namespace

TEST_CASE("run windows") {
  const auto r = run_scenario(small("router", Locality::High));
  REQUIRE(r.windows.size() == 4);
  std::uint64_t packets = 0;
  std::uint64_t recompiles = 0;
  for (const auto& w : r.windows) {
    packets += w.packets;
    recompiles += w.recompiles;
  }
  CHECK(packets == 20000);
  CHECK(recompiles == r.report.recompiles);
  // Later windows run the specialized program.
  CHECK(r.windows.back().mean_cost < r.windows.front().mean_cost);
  CHECK(r.windows.back().spec_hit_fraction > 0.5);
  const std::string csv = format_windows(r.windows);
  CHECK(csv.rfind("window,packets,mean_cost,spec_hit_fraction,recompiles,guard_fallbacks\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("runs are deterministic") {
  auto cfg = small("firewall", Locality::Low);
  cfg.engine.workers = 2;
  const auto a = run_scenario(cfg);
  const auto b = run_scenario(cfg);
  CHECK(format_windows(a.windows) == format_windows(b.windows));
  CHECK(format_pass_logs(a.pass_logs) == format_pass_logs(b.pass_logs));
  CHECK(a.report.total() == b.report.total());
}

TEST_CASE("verify agrees on every scenario") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    const auto v = verify_scenario(small(name, Locality::Low));
    CHECK(v.identical);
    CHECK_FALSE(v.divergence.has_value());
    CHECK(v.packets == 20000);
    CHECK(v.baseline.recompiles == 0);
    CHECK(v.optimized.recompiles >= 1);
  }
}

TEST_CASE("verify reports an injected fault") {
  auto cfg = small("router", Locality::High);
  cfg.engine.passes.inject_fault = true;
  const auto v = verify_scenario(cfg);
  CHECK_FALSE(v.identical);
  REQUIRE(v.divergence.has_value());
  CHECK(v.divergence->version >= 1);
  CHECK_FALSE(v.divergence->pass_log.empty());
  CHECK(v.packets == v.divergence->seq + 1);
  const std::string text = format_divergence(*v.divergence);
  CHECK(text.find("version:") != std::string::npos);
}

TEST_CASE("verify with no packets") {
  auto cfg = small("nat", Locality::None, 0);
  const auto v = verify_scenario(cfg);
  CHECK(v.identical);
  CHECK(v.packets == 0);
  CHECK(v.optimized.total() == 0);
}

TEST_CASE("serial and parallel matrices agree") {
  auto cells = full_matrix(1, 3);
  CHECK(cells.size() == 15);
  cells.resize(6);
  const auto base = small("router", Locality::High, 8000);
  const auto serial = verify_matrix_serial(cells, base);
  const auto parallel = verify_matrix_parallel(cells, base);
  CHECK(serial == parallel);
  for (const auto& o : serial) {
    CAPTURE(o.cell.scenario);
    CHECK(o.identical);
    CHECK(o.error.empty());
    CHECK(o.packets == 8000);
  }
}

TEST_CASE("bad run settings") {
  auto cfg = small("nosuch", Locality::High);
  CHECK_THROWS_AS(cfg.check(), Error);
  CHECK_THROWS_AS(run_scenario(cfg), Error);
  cfg = small("router", Locality::High);
  cfg.window = 0;
  CHECK_THROWS_AS(cfg.check(), Error);
  cfg = small("router", Locality::High);
  cfg.engine.period = 0;
  CHECK_THROWS_AS(cfg.check(), Error);
}

TEST_CASE("schedules replace the single profile") {
  auto cfg = small("router", Locality::None);
  cfg.schedule = {Segment{Locality::High, 3000, 1}, Segment{Locality::Low, 2000, 2}};
  const auto w = make_workload(cfg);
  CHECK(w.trace.size() == 5000);
  CHECK(w.boundaries == std::vector<std::size_t>{0, 3000});
  const auto r = run_scenario(cfg);
  CHECK(r.boundaries == w.boundaries);
  CHECK(r.report.packets == 5000);
}

TEST_CASE("inspect report") {
  EngineConfig cfg;
  cfg.period = 5000;
  const std::string text = inspect_scenario("katran_lb", cfg);
  CHECK(text.find("conn_table RW") != std::string::npos);
  CHECK(text.find("guard summary: program=1 site=1") != std::string::npos);
  CHECK(text.find("pass log:") != std::string::npos);
  CHECK(text.find("provenance=optimized") == std::string::npos);
  const std::string dumped = inspect_scenario("katran_lb", cfg, 20000, 1, true);
  CHECK(dumped.find("provenance=optimized") != std::string::npos);
  CHECK(inspect_scenario("katran_lb", cfg) == text);
}
