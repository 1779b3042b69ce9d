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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "morpheus/harness.hpp"
#include "support.hpp"

using namespace morpheus;
using namespace morpheus::test;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string num(double x, int digits = 2) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

RunConfig base_run(const std::string& scenario, Locality profile, std::size_t packets, std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.scenario = scenario;
  cfg.profile = profile;
  cfg.packets = packets;
  cfg.seed = seed;
  cfg.engine.period = 10000;
  cfg.window = 5000;
  return cfg;
}

// 1. Every scenario, profile and seed: identical actions with live updates.
Outcome equivalence_matrix() {
  const auto cells = full_matrix(5, 1);
  auto base = base_run("router", Locality::High, 100000);
  // Each cell must see a control update mid-run.
  for (const auto& c : cells) {
    const auto updates = control_schedule(build_scenario(c.scenario), base.packets, c.seed);
    const bool mid = std::any_of(updates.begin(), updates.end(),
                                 [&](const ScheduledUpdate& u) { return u.seq > 0 && u.seq < base.packets; });
    if (!mid) return {false, c.scenario + " seed " + std::to_string(c.seed) + " has no mid-run update"};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto outcomes = verify_matrix_parallel(cells, base);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t identical = 0;
  std::uint64_t recompiles = 0;
  std::string first_bad;
  for (const auto& o : outcomes) {
    if (o.identical && o.error.empty() && o.packets == base.packets) {
      ++identical;
    } else if (first_bad.empty()) {
      first_bad = " first failure: " + o.cell.scenario + "/" + std::string(locality_name(o.cell.profile)) + "/" +
                  std::to_string(o.cell.seed) + (o.error.empty() ? "" : " " + o.error);
    }
    recompiles += o.recompiles;
  }
  Outcome out;
  out.pass = identical == cells.size() && secs < 300;
  out.detail = std::to_string(identical) + "/" + std::to_string(cells.size()) + " cells identical, " +
               std::to_string(recompiles) + " recompiles, " + num(secs, 1) + " s" + first_bad;
  return out;
}

Key flow_key(const Packet& p) { return Key{p.src_ip, p.dst_ip, p.src_port, p.dst_port, proto_number(p.proto)}; }

Packet hottest(const std::vector<Packet>& trace) {
  std::map<Key, std::size_t> counts;
  for (const auto& p : trace) ++counts[flow_key(p)];
  const Packet* best = &trace.front();
  std::size_t n = 0;
  for (const auto& p : trace) {
    if (counts[flow_key(p)] > n) {
      n = counts[flow_key(p)];
      best = &p;
    }
  }
  return *best;
}

// 2. A route change is visible on the very next packet; specialized hits
// resume only after the next compile; no stale results in shadow mode.
Outcome guard_consistency() {
  const Scenario s = build_scenario("router");
  const auto trace = gen_trace(Locality::High, 40000, 1, s.flows);
  EngineConfig cfg;
  cfg.period = 10000;
  cfg.compile_latency = 1000;
  cfg.trigger = CompileTrigger::Periodic;
  Engine e(s.program, scenario_tables(s), cfg);
  std::size_t i = 0;
  for (; i < 25000; ++i) e.process(trace[i]);
  e.finish_pending();
  const Packet hot = hottest(trace);
  if (!e.process(hot).specialized) return {false, "hot packet not specialized before the update"};

  const std::uint32_t new_hop = 0x0afeed01;
  e.control_update("forward", insert(lpm_row(hot.dst_ip, 32, {v32(new_hop), v16(33)})));
  const auto next = e.process(hot);
  bool ok = next.action.packet.dst_mac == new_hop && !next.specialized;
  const std::uint64_t spec_at_update = e.report().specialized_packets;
  const std::uint64_t compiles_at_update = e.report().recompiles;
  bool spec_before_recompile = false;
  bool spec_after_recompile = false;
  for (; i < trace.size(); ++i) {
    const auto r = e.process(trace[i]);
    if (trace[i].dst_ip == hot.dst_ip && r.action.packet.dst_mac != new_hop) ok = false;
    if (e.report().recompiles == compiles_at_update) spec_before_recompile |= r.specialized;
    else spec_after_recompile |= r.specialized;
  }
  ok = ok && !spec_before_recompile && spec_after_recompile && e.report().specialized_packets > spec_at_update;

  std::uint64_t stale = 0;
  for (const auto& name : scenario_names()) {
    auto run = base_run(name, Locality::Low, 10000);
    run.engine.period = 2000;
    run.engine.compile_latency = 200;
    run.engine.shadow_check = true;
    stale += run_scenario(run).report.stale;
  }
  Outcome out;
  out.pass = ok && stale == 0;
  out.detail = std::string("next packet ") + (next.action.packet.dst_mac == new_hop ? "rerouted" : "stale") +
               ", specialized hits before recompile " + (spec_before_recompile ? "yes" : "none") +
               ", after recompile " + (spec_after_recompile ? "yes" : "none") + ", shadow stale " +
               std::to_string(stale);
  return out;
}

// 3. Versions in the packet log only ever step by one.
Outcome atomic_swap() {
  std::size_t swaps = 0;
  for (const auto& name : scenario_names()) {
    auto run = base_run(name, Locality::Low, 100000);
    run.engine.workers = 4;
    run.engine.keep_packet_log = true;
    const auto r = run_scenario(run);
    const auto& log = r.packet_log;
    if (log.size() != run.packets) return {false, name + ": packet log incomplete"};
    std::set<std::size_t> workers;
    for (std::size_t i = 0; i < log.size(); ++i) {
      workers.insert(log[i].worker);
      if (i == 0) continue;
      if (log[i].seq != log[i - 1].seq + 1) return {false, name + ": sequence gap"};
      if (log[i].version < log[i - 1].version || log[i].version - log[i - 1].version > 1) {
        return {false, name + ": version jump at seq " + std::to_string(log[i].seq)};
      }
      swaps += log[i].version != log[i - 1].version ? 1 : 0;
    }
    if (workers.size() < 2) return {false, name + ": only one worker ran"};
  }
  return {swaps >= 5, "5 scenarios x 4 workers, " + std::to_string(swaps) + " swaps, all single-step"};
}

struct Costs {
  double optimized = 0;
  double baseline = 0;
};

Costs costs(const RunConfig& cfg) {
  const auto v = verify_scenario(cfg);
  if (!v.identical) throw Error("divergence during a cost run");
  return {v.optimized.mean_cost(), v.baseline.mean_cost()};
}

// 4. Router: High < Low < None <= baseline, and at least 40% gain on High.
Outcome router_ordering() {
  const auto high = costs(base_run("router", Locality::High, 100000));
  const auto low = costs(base_run("router", Locality::Low, 100000));
  const auto none = costs(base_run("router", Locality::None, 100000));
  const double gain = 1.0 - high.optimized / high.baseline;
  Outcome out;
  out.pass = high.optimized < low.optimized && low.optimized < none.optimized && none.optimized <= none.baseline &&
             gain >= 0.40;
  out.detail = "high " + num(high.optimized) + " low " + num(low.optimized) + " none " + num(none.optimized) +
               " baseline " + num(none.baseline) + ", gains " + num(100 * gain, 1) + "% / " +
               num(100 * (1 - low.optimized / low.baseline), 1) + "% / " +
               num(100 * (1 - none.optimized / none.baseline), 1) + "%";
  return out;
}

double instrumentation_per_packet(const CostReport& r) {
  return r.packets == 0 ? 0.0
                        : static_cast<double>(r.breakdown[CostCategory::Instrumentation]) /
                              static_cast<double>(r.packets);
}

// 5. Naive instrumentation costs more than the adaptive plan; adaptive still
// pays for itself except on NAT; sampled heavy hitters match exact counts.
Outcome instrumentation_overhead() {
  Outcome out;
  for (const auto& name : scenario_names()) {
    auto adaptive = base_run(name, Locality::Low, 100000);
    auto naive = adaptive;
    naive.engine.mode = EngineMode::NaiveInstrumentation;
    const auto a = verify_scenario(adaptive);
    const auto n = verify_scenario(naive);
    const double oa = instrumentation_per_packet(a.optimized);
    const double on = instrumentation_per_packet(n.optimized);
    const bool nets = a.optimized.mean_cost() <= a.baseline.mean_cost();
    out.pass = out.pass && a.identical && n.identical && on > oa && (nets || name == "nat");
    out.detail += name + " naive " + num(on) + " adaptive " + num(oa) + " cost " + num(a.optimized.mean_cost()) +
                  "/" + num(a.baseline.mean_cost()) + "; ";
  }
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto trace = gen_trace(Locality::High, 100000, seed);
    std::map<Key, std::uint64_t> exact;
    for (const auto& p : trace) ++exact[flow_key(p)];
    std::vector<std::pair<Key, std::uint64_t>> ranked(exact.begin(), exact.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    std::mt19937_64 rng(seed);
    std::vector<SiteCache> caches(1, SiteCache(SamplingPolicy{}.cache_capacity));
    for (const auto& p : trace) caches[0].record(flow_key(p), rng, 0.1);
    SamplingPolicy pol;
    pol.rule = HeavyHitterRule::TopK;
    pol.top_k = 5;
    const auto got = heavy_hitters(snapshot_and_reset(1, caches, 0), pol);
    std::size_t common = 0;
    for (const auto& k : got) {
      for (std::size_t j = 0; j < 5 && j < ranked.size(); ++j) common += ranked[j].first == k ? 1 : 0;
    }
    worst = std::min(worst, static_cast<double>(common) / 5.0);
  }
  out.pass = out.pass && worst >= 0.8;
  out.detail += "heavy-hitter precision (worst of 20 seeds) " + num(worst);
  return out;
}

// 6. Turning off optimization of the connection tracker removes any NAT
// degradation.
Outcome nat_disable() {
  Outcome out;
  for (auto profile : {Locality::Low, Locality::None}) {
    auto on = base_run("nat", profile, 100000);
    auto off = on;
    off.engine.passes.disabled_tables.insert("conntrack");
    off.engine.passes.sampling.disabled_tables.insert("conntrack");
    const auto enabled = costs(on);
    const auto disabled = costs(off);
    const double ratio_on = enabled.optimized / enabled.baseline;
    const double ratio_off = disabled.optimized / disabled.baseline;
    out.pass = out.pass && ratio_off <= 1.02 && disabled.optimized <= enabled.optimized;
    out.detail += std::string(locality_name(profile)) + ": enabled " + num(ratio_on, 3) + "x, conntrack disabled " +
                  num(ratio_off, 3) + "x baseline; ";
  }
  return out;
}

// Lookups into `table` left in the specialized blocks.
std::size_t lookups_into(const Program& p, TableRef table) {
  std::size_t n = 0;
  for (const auto& b : p.blocks) {
    if (b.frozen) continue;
    for (const auto& i : b.code) {
      const auto* lk = std::get_if<TableLookup>(&i);
      n += lk != nullptr && lk->table == table ? 1 : 0;
    }
  }
  return n;
}

// 7. Pass-level checks.
Outcome pass_units() {
  std::vector<std::string> failed;
  std::size_t checked = 0;
  std::vector<std::vector<std::string>> logs;

  // Dead code elimination on every scenario artifact.
  for (const auto& name : scenario_names()) {
    const Scenario s = build_scenario(name);
    const auto a = analyze(s.program);
    TableSet t = scenario_tables(s);
    apply_marks(a, t);
    PassConfig cfg;
    cfg.disabled_passes.insert(std::string(pass::kDce));
    Program p = run_pipeline(s.program, a, t, {}, cfg, 1).program;
    const std::size_t before = static_instruction_count(p);
    dead_code_elimination(p);
    Program again = p;
    const bool ok = static_instruction_count(p) <= before && dead_code_elimination(again) == 0 && again == p;
    if (!ok) failed.push_back("dce on " + name);
    ++checked;
  }

  // Inlined 16-bit key table against the reference lookup, whole domain.
  {
    const Program p = parse_program(R"(program ports version=0 provenance=original
table ports kind=exact key=dst_port:16 value=vlan:12
entry start
start:
  %0 = load dst_port
  %1 = lookup ports [%0] @1
  br %1, hit, miss
hit:
  %2 = fieldof %1, 0
  set vlan, %2
  ret tx
miss:
  ret drop
)");
    TableSet t = make_tables(p);
    for (u128 port : {0, 22, 53, 80, 443, 8080, 65535}) fill(t[0], {exact_row({port}, {Value::make(12, port % 4096)})});
    const auto a = analyze(p);
    apply_marks(a, t);
    const auto art = run_pipeline(p, a, t, {}, PassConfig{}, 1);
    bool ok = lookups_into(art.program, 0) == 0;
    TableSet r1 = t;
    TableSet r2 = t;
    for (u128 port = 0; port < 65536 && ok; ++port) {
      Packet pkt;
      pkt.dst_port = static_cast<std::uint16_t>(port);
      ok = run_original(p, r1, pkt).action == run_artifact(art, r2, a, pkt).action;
    }
    if (!ok) failed.push_back("inline over 2^16 ports");
    ++checked;
  }

  // Uniform /24 table turned exact, 10^4 random addresses against brute force.
  {
    const Program p = parse_program(R"(program fib version=0 provenance=original
table fib kind=lpm key=dst_ip:32 value=hop:32
entry start
start:
  %0 = load dst_ip
  %1 = lookup fib [%0] @1
  br %1, hit, miss
hit:
  %2 = fieldof %1, 0
  set dst_mac, %2
  ret tx
miss:
  ret drop
)");
    TableSet t = make_tables(p);
    std::mt19937_64 rng(7);
    std::map<std::uint32_t, std::uint32_t> truth;
    while (truth.size() < 1000) {
      const auto prefix = static_cast<std::uint32_t>(0x0a000000u | (rng() & 0x00ffff00u));
      if (truth.emplace(prefix, static_cast<std::uint32_t>(truth.size() + 1)).second) {
        fill(t[0], {lpm_row(prefix, 24, {v32(truth.size())})});
      }
    }
    const auto a = analyze(p);
    apply_marks(a, t);
    const auto art = run_pipeline(p, a, t, {}, PassConfig{}, 1);
    bool ok = log_contains(art.pass_log, "kind=lpm-exact length=24") && lookups_into(art.program, 0) == 0;
    TableSet r = t;
    std::vector<std::uint32_t> prefixes;
    for (const auto& [k, v] : truth) prefixes.push_back(k);
    for (int i = 0; i < 10000 && ok; ++i) {
      Packet pkt;
      pkt.dst_ip = i % 2 == 0 ? prefixes[rng() % prefixes.size()] | static_cast<std::uint32_t>(rng() & 0xff)
                              : static_cast<std::uint32_t>(rng());
      const auto it = truth.find(pkt.dst_ip & 0xffffff00u);
      const auto got = run_artifact(art, r, a, pkt).action;
      ok = it == truth.end() ? got.verdict == Verdict::Drop
                             : got.verdict == Verdict::Tx && got.packet.dst_mac == it->second;
    }
    if (!ok) failed.push_back("lpm to exact");
    ++checked;
  }

  // Branch injection audit over live runs of every scenario.
  std::size_t injections = 0;
  for (const auto& name : scenario_names()) {
    const Scenario s = build_scenario(name);
    const auto a = analyze(s.program);
    for (auto profile : {Locality::High, Locality::Low, Locality::None}) {
      const auto r = run_scenario(base_run(name, profile, 40000));
      for (const auto& log : r.pass_logs) {
        for (const auto& line : log) {
          if (line.rfind("branch-injection", 0) != 0) continue;
          ++injections;
          for (TableRef t = 0; t < s.program.tables.size(); ++t) {
            if (a.is_rw(t) && line.find(" table=" + s.program.tables[t].name + " ") != std::string::npos) {
              failed.push_back("branch injection on " + s.program.tables[t].name);
            }
          }
        }
      }
    }
  }
  // The same TCP-only rules fire on a read-only ACL, and not once it is written.
  {
    const Program ro = build_scenario("firewall").program;
    TableSet t = make_tables(ro);
    fill(t[0], rulegen_wildcard(100, 0.0, 6, true));
    const auto a = analyze(ro);
    apply_marks(a, t);
    const auto art = run_pipeline(ro, a, t, {}, PassConfig{}, 1);
    if (!log_contains(art.pass_log, "branch-injection site=1 table=acl field=proto")) {
      failed.push_back("no injection on a read-only tcp acl");
    }
    ++checked;
  }
  {
    std::string text = print_program(build_scenario("firewall").program);
    const std::string allow = "allow:\n";
    text.replace(text.find(allow), allow.size(), "allow:\n  update acl [%0, %1, %2, %3, %4] [%6] @2\n");
    const Program p = parse_program(text);
    TableSet t = make_tables(p);
    fill(t[0], rulegen_wildcard(100, 0.0, 6, true));
    const auto a = analyze(p);
    apply_marks(a, t);
    const auto art = run_pipeline(p, a, t, {}, PassConfig{}, 1);
    if (!a.is_rw(0) || log_contains(art.pass_log, "branch-injection")) failed.push_back("rw acl injected");
    ++checked;
  }
  Outcome out;
  out.pass = failed.empty();
  out.detail = std::to_string(checked) + " structural checks, " + std::to_string(injections) +
               " injections audited" + (failed.empty() ? "" : ", failed: " + failed.front());
  return out;
}

std::set<std::string> hot_keys(const std::vector<std::string>& log) {
  std::set<std::string> out;
  for (const auto& line : log) {
    if (line.find("mode=fastpath") == std::string::npos) continue;
    const auto at = line.find(" keys=[");
    if (at == std::string::npos) continue;
    out.insert(line.substr(line.find("site="), line.find(' ', line.find("site=")) - line.find("site=")) + " " +
               line.substr(at + 7, line.find(']', at) - at - 7));
  }
  return out;
}

// 8. The segmented schedule: cost recovers after each High segment starts and
// the heavy-hitter set follows the traffic.
Outcome adaptation() {
  auto run = base_run("router", Locality::None, 0);
  run.schedule = adaptation_schedule(10000, 1);
  const auto r = run_scenario(run);
  const std::size_t period = run.engine.period;
  const std::size_t window = run.window;

  // Window index containing packet `seq`, and the compile count when each
  // window closed.
  std::vector<std::uint64_t> compiles_by_window;
  std::uint64_t total = 0;
  for (const auto& w : r.windows) compiles_by_window.push_back(total += w.recompiles);

  Outcome out;
  std::vector<std::set<std::string>> hh;
  for (std::size_t s = 0; s < run.schedule.size(); ++s) {
    if (run.schedule[s].profile != Locality::High) continue;
    const std::size_t start = r.boundaries[s];
    const std::size_t end = start + run.schedule[s].packets;
    const double at_start = r.windows[start / window].mean_cost;
    const double before = start == 0 ? at_start : r.windows[start / window - 1].mean_cost;
    const std::size_t settled = (start + 2 * period) / window;
    const double after = r.windows[settled].mean_cost;
    out.pass = out.pass && after < at_start;
    out.detail += "segment@" + std::to_string(start) + " " + num(before) + " -> " + num(at_start) + " -> " +
                  num(after) + " within 2 periods; ";
    // Heavy hitters of the last compile swapped in during this segment.
    const std::uint64_t k = compiles_by_window[(end - 1) / window];
    if (k == 0 || k > r.pass_logs.size()) return {false, "no compile during a High segment"};
    hh.push_back(hot_keys(r.pass_logs[k - 1]));
  }
  out.pass = out.pass && hh.size() == 2 && !hh[0].empty() && hh[0] != hh[1];
  out.detail += "heavy-hitter sets " + std::string(hh.size() == 2 && hh[0] != hh[1] ? "differ" : "do not differ");
  return out;
}

// 9. Same config and seed, same bytes.
Outcome determinism() {
  std::size_t runs = 0;
  for (const auto& name : scenario_names()) {
    auto run = base_run(name, Locality::Low, 50000, 3);
    run.engine.workers = 2;
    run.engine.keep_packet_log = true;
    const auto a = run_scenario(run);
    const auto b = run_scenario(run);
    if (format_windows(a.windows) != format_windows(b.windows)) return {false, name + ": window CSV differs"};
    if (format_pass_logs(a.pass_logs) != format_pass_logs(b.pass_logs)) return {false, name + ": pass log differs"};
    if (format_packet_log(a.packet_log) != format_packet_log(b.packet_log)) {
      return {false, name + ": packet log differs"};
    }
    ++runs;
  }
  auto sched = base_run("katran_lb", Locality::None, 0);
  sched.schedule = adaptation_schedule(4000, 2);
  const auto a = run_scenario(sched);
  const auto b = run_scenario(sched);
  if (format_windows(a.windows) != format_windows(b.windows) || format_pass_logs(a.pass_logs) != format_pass_logs(b.pass_logs)) {
    return {false, "segmented run differs"};
  }
  return {true, std::to_string(runs + 1) + " repeated runs byte-identical"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"equivalence across scenarios, profiles and seeds", equivalence_matrix},
      {"guard consistency", guard_consistency},
      {"atomic swap", atomic_swap},
      {"router optimization ordering", router_ordering},
      {"instrumentation overhead", instrumentation_overhead},
      {"nat with conntrack optimization disabled", nat_disable},
      {"pass correctness", pass_units},
      {"dynamic adaptation", adaptation},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("C%zu %s %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
