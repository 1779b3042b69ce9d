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

#include "morpheus/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>

#include "morpheus/ir_text.hpp"

namespace morpheus {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string packet_text(const Packet& p) {
  return std::string("proto=") + u128_to_string(proto_number(p.proto)) + " src=" + format_ipv4(p.src_ip) + ":" +
         std::to_string(p.src_port) + " dst=" + format_ipv4(p.dst_ip) + ":" + std::to_string(p.dst_port) +
         " vlan=" + std::to_string(p.vlan) + " len=" + std::to_string(p.payload_len);
}

std::string action_text(const Action& a) {
  std::string out(verdict_name(a.verdict));
  if (a.verdict != Verdict::Drop) out += " [" + packet_text(a.packet) + "]";
  return out;
}

class WindowAccumulator {
 public:
  explicit WindowAccumulator(std::size_t size) : size_(size) {}

  void add(const ExecResult& r, std::uint64_t recompiles_total) {
    ++packets_;
    cost_ += r.cost.total();
    if (r.specialized) ++spec_;
    if (r.guard_fallback) ++fallbacks_;
    last_recompiles_ = recompiles_total;
    if (packets_ == size_) flush();
  }

  std::vector<WindowStats> finish() {
    if (packets_ != 0) flush();
    return std::move(out_);
  }

 private:
  void flush() {
    WindowStats w;
    w.window = out_.size();
    w.packets = packets_;
    w.mean_cost = static_cast<double>(cost_) / static_cast<double>(packets_);
    w.spec_hit_fraction = static_cast<double>(spec_) / static_cast<double>(packets_);
    w.recompiles = last_recompiles_ - recompiles_at_start_;
    w.guard_fallbacks = fallbacks_;
    out_.push_back(w);
    recompiles_at_start_ = last_recompiles_;
    packets_ = cost_ = spec_ = fallbacks_ = 0;
  }

  std::size_t size_;
  std::uint64_t packets_ = 0;
  std::uint64_t cost_ = 0;
  std::uint64_t spec_ = 0;
  std::uint64_t fallbacks_ = 0;
  std::uint64_t last_recompiles_ = 0;
  std::uint64_t recompiles_at_start_ = 0;
  std::vector<WindowStats> out_;
};

void deliver(Engine& e, const std::vector<ScheduledUpdate>& updates, std::size_t& next, std::uint64_t seq) {
  while (next < updates.size() && updates[next].seq <= seq) {
    e.control_update(updates[next].table, updates[next].mutation);
    ++next;
  }
}

}  // namespace

void RunConfig::check() const {
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), scenario) == names.end()) {
    throw Error("unknown scenario '" + scenario + "'");
  }
  if (window == 0) throw Error("reporting window must be at least 1 packet");
  engine.check();
}

Workload make_workload(const RunConfig& cfg) {
  cfg.check();
  Workload w;
  w.scenario = build_scenario(cfg.scenario);
  if (cfg.schedule.empty()) {
    w.trace = gen_trace(cfg.profile, cfg.packets, cfg.seed, w.scenario.flows);
    w.boundaries = {0};
  } else {
    auto seg = dynamic_schedule(cfg.schedule, w.scenario.flows);
    w.trace = std::move(seg.packets);
    w.boundaries = std::move(seg.boundaries);
  }
  if (cfg.control_updates) w.updates = control_schedule(w.scenario, w.trace.size(), cfg.seed);
  return w;
}

std::string format_windows(const std::vector<WindowStats>& windows) {
  std::string out = "window,packets,mean_cost,spec_hit_fraction,recompiles,guard_fallbacks\n";
  for (const auto& w : windows) {
    out += std::to_string(w.window) + "," + std::to_string(w.packets) + "," + fixed(w.mean_cost, 4) + "," +
           fixed(w.spec_hit_fraction, 4) + "," + std::to_string(w.recompiles) + "," +
           std::to_string(w.guard_fallbacks) + "\n";
  }
  return out;
}

std::string format_pass_logs(const std::vector<std::vector<std::string>>& logs) {
  std::string out;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    out += "# compile " + std::to_string(i + 1) + "\n" + format_pass_log(logs[i]);
  }
  return out;
}

RunResult run_scenario(const RunConfig& cfg) {
  Workload w = make_workload(cfg);
  Engine engine(w.scenario.program, scenario_tables(w.scenario), cfg.engine);
  WindowAccumulator acc(cfg.window);
  std::size_t next = 0;
  for (std::size_t i = 0; i < w.trace.size(); ++i) {
    deliver(engine, w.updates, next, i);
    const ExecResult r = engine.process(w.trace[i]);
    acc.add(r, engine.report().recompiles);
  }
  engine.finish_pending();
  RunResult out;
  out.windows = acc.finish();
  out.report = engine.report();
  out.pass_logs = engine.pass_logs();
  out.packet_log = engine.packet_log();
  out.boundaries = w.boundaries;
  return out;
}

VerifyResult verify_scenario(const RunConfig& cfg) {
  Workload w = make_workload(cfg);
  EngineConfig opt_cfg = cfg.engine;
  if (opt_cfg.mode == EngineMode::Baseline) opt_cfg.mode = EngineMode::Morpheus;
  EngineConfig base_cfg = cfg.engine;
  base_cfg.mode = EngineMode::Baseline;
  base_cfg.shadow_check = false;
  Engine optimized(w.scenario.program, scenario_tables(w.scenario), opt_cfg);
  Engine baseline(w.scenario.program, scenario_tables(w.scenario), base_cfg);

  VerifyResult out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < w.trace.size(); ++i) {
    deliver(optimized, w.updates, next, i);
    const ExecResult mine = optimized.process(w.trace[i]);
    for (const auto& u : optimized.take_applied()) baseline.control_update(u.table, u.mutation);
    const ExecResult ref = baseline.process(w.trace[i]);
    ++out.packets;
    if (!(mine.action == ref.action)) {
      out.identical = false;
      Divergence d;
      d.seq = i;
      d.packet = w.trace[i];
      d.baseline = ref.action;
      d.optimized = mine.action;
      d.version = optimized.version();
      if (!optimized.pass_logs().empty()) d.pass_log = optimized.pass_logs().back();
      out.divergence = std::move(d);
      break;
    }
  }
  optimized.finish_pending();
  out.baseline = baseline.report();
  out.optimized = optimized.report();
  out.pass_logs = optimized.pass_logs();
  return out;
}

std::string format_divergence(const Divergence& d) {
  std::string out = "divergence at seq " + std::to_string(d.seq) + "\n";
  out += "  packet:    " + packet_text(d.packet) + "\n";
  out += "  baseline:  " + action_text(d.baseline) + "\n";
  out += "  optimized: " + action_text(d.optimized) + "\n";
  out += "  version:   " + std::to_string(d.version) + "\n";
  out += "  pass log:\n";
  for (const auto& line : d.pass_log) out += "    " + line + "\n";
  return out;
}

std::vector<MatrixCell> full_matrix(std::size_t seeds, std::uint64_t first_seed) {
  std::vector<MatrixCell> cells;
  for (const auto& s : scenario_names()) {
    for (auto l : {Locality::High, Locality::Low, Locality::None}) {
      for (std::size_t k = 0; k < seeds; ++k) cells.push_back(MatrixCell{s, l, first_seed + k});
    }
  }
  return cells;
}

namespace {

MatrixOutcome verify_cell(const MatrixCell& cell, const RunConfig& base) {
  MatrixOutcome o;
  o.cell = cell;
  try {
    RunConfig cfg = base;
    cfg.scenario = cell.scenario;
    cfg.profile = cell.profile;
    cfg.seed = cell.seed;
    cfg.engine.seed = cell.seed;
    const VerifyResult r = verify_scenario(cfg);
    o.identical = r.identical;
    o.packets = r.packets;
    o.baseline_mean = r.baseline.mean_cost();
    o.optimized_mean = r.optimized.mean_cost();
    o.recompiles = r.optimized.recompiles;
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  return o;
}

}  // namespace

std::vector<MatrixOutcome> verify_matrix_serial(const std::vector<MatrixCell>& cells, const RunConfig& base) {
  std::vector<MatrixOutcome> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(verify_cell(c, base));
  return out;
}

std::vector<MatrixOutcome> verify_matrix_parallel(const std::vector<MatrixCell>& cells, const RunConfig& base) {
  std::vector<MatrixOutcome> out(cells.size());
  const auto n = static_cast<std::int64_t>(cells.size());
  // Cells are independent; verify_cell never throws.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = verify_cell(cells[static_cast<std::size_t>(i)], base);
  return out;
}

std::string inspect_scenario(const std::string& name, const EngineConfig& cfg, std::size_t warmup,
                             std::uint64_t seed, bool dump_program) {
  const Scenario s = build_scenario(name);
  EngineConfig ec = cfg;
  if (ec.mode == EngineMode::Baseline) ec.mode = EngineMode::Morpheus;
  ec.period = std::max<std::uint64_t>(1, warmup / 4);
  ec.compile_latency = std::min<std::uint64_t>(ec.compile_latency, ec.period / 2);
  Engine engine(s.program, scenario_tables(s), ec);

  std::string out = "scenario " + s.name + "\n\n" + format_analysis(s.program, engine.analysis()) + "\n";
  out += "instrumentation plan:";
  const auto plan = plan_instrumentation(s.program, engine.analysis(), engine.tables(), ec.passes.sampling);
  for (SiteId site : plan) out += " @" + std::to_string(site);
  out += plan.empty() ? " (none)\n" : "\n";

  for (const auto& p : gen_trace(Locality::High, warmup, seed, s.flows)) engine.process(p);
  engine.finish_pending();
  const bool ok = engine.compile_now();
  out += "\ncompile after " + std::to_string(warmup) + " high-locality packets: " + (ok ? "ok" : "failed") + "\n";
  if (const auto* art = engine.artifact()) {
    std::size_t program_guards = 0;
    std::size_t site_guards = 0;
    out += "guards:\n";
    for (const auto& g : art->guards) {
      if (g.scope == GuardScope::ProgramLevel) {
        ++program_guards;
        out += "  guard " + std::to_string(g.id) + " program expected=" + std::to_string(g.expected_version) + "\n";
      } else {
        ++site_guards;
        out += "  guard " + std::to_string(g.id) + " site=@" + std::to_string(g.site) +
               " table=" + s.program.tables[g.table].name + " expected=" + std::to_string(g.expected_version) + "\n";
      }
    }
    out += "guard summary: program=" + std::to_string(program_guards) + " site=" + std::to_string(site_guards) + "\n";
    out += "instrumented sites:";
    for (SiteId site : art->instrumented_sites) out += " @" + std::to_string(site);
    out += "\npass log:\n" + format_pass_log(art->pass_log);
    out += "static instructions: original=" + std::to_string(static_instruction_count(s.program)) +
           " optimized=" + std::to_string(static_instruction_count(art->program)) + "\n";
    if (dump_program) out += "\n" + print_program(art->program);
  }
  return out;
}

}  // namespace morpheus
