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

// morpheus-mini: run, verify and inspect the self-specializing engine.
//
// Exit codes: 0 success, 1 verify found a divergence, 2 configuration error.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "morpheus/harness.hpp"

namespace {

using namespace morpheus;

struct Options {
  std::string scenario = "router";
  std::string profile = "high";
  std::string schedule_file;
  std::size_t packets = 100000;
  std::optional<std::uint64_t> seed;
  std::string mode = "morpheus";
  std::optional<double> sampling;
  std::optional<std::uint64_t> period;
  std::vector<std::string> disabled_passes;
  std::vector<std::string> disabled_tables;
  std::string config_file;
  std::string out;
  std::string pass_log_out;
  std::string packet_log_out;
  std::size_t window = 5000;
  std::size_t workers = 1;
  std::optional<std::uint64_t> compile_latency;
  bool shadow = false;
  bool inject_fault = false;
  bool no_updates = false;
  std::size_t warmup = 20000;
  std::string export_dir;
  bool dump_program = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("MORPHEUS_MINI_SEED"); env != nullptr && *env != '\0') {
    try {
      return static_cast<std::uint64_t>(parse_u128(env));
    } catch (const Error&) {
      throw Error(std::string("MORPHEUS_MINI_SEED is not a number: ") + env);
    }
  }
  return 1;
}

EngineConfig engine_config(const Options& o, std::uint64_t seed) {
  EngineConfig cfg;
  if (!o.config_file.empty()) cfg = parse_engine_config(read_file(o.config_file), cfg);
  auto mode = engine_mode_from_name(o.mode);
  if (!mode) throw Error("unknown mode '" + o.mode + "' (baseline, morpheus, naive-instrumentation)");
  cfg.mode = *mode;
  cfg.seed = seed;
  cfg.workers = o.workers;
  if (o.sampling) cfg.passes.sampling.probability = *o.sampling;
  if (o.period) cfg.period = *o.period;
  if (o.compile_latency) cfg.compile_latency = *o.compile_latency;
  for (const auto& p : o.disabled_passes) cfg.passes.disabled_passes.insert(p);
  for (const auto& t : o.disabled_tables) {
    cfg.passes.disabled_tables.insert(t);
    cfg.passes.sampling.disabled_tables.insert(t);
  }
  cfg.shadow_check = o.shadow;
  cfg.passes.inject_fault = o.inject_fault;
  cfg.keep_packet_log = !o.packet_log_out.empty();
  cfg.check();
  return cfg;
}

RunConfig run_config(const Options& o) {
  RunConfig rc;
  rc.seed = resolve_seed(o);
  rc.scenario = o.scenario;
  auto prof = locality_from_name(o.profile);
  if (!prof) throw Error("unknown profile '" + o.profile + "' (high, low, none)");
  rc.profile = *prof;
  rc.packets = o.packets;
  if (!o.schedule_file.empty()) rc.schedule = parse_schedule(read_file(o.schedule_file), rc.seed);
  rc.engine = engine_config(o, rc.seed);
  rc.window = o.window;
  rc.control_updates = !o.no_updates;
  rc.check();
  return rc;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--scenario", o.scenario, "router, l2switch, firewall, nat or katran_lb");
  cmd->add_option("--seed", o.seed, "trace and sampling seed (default: MORPHEUS_MINI_SEED or 1)");
  cmd->add_option("--mode", o.mode, "baseline, morpheus or naive-instrumentation");
  cmd->add_option("--sampling", o.sampling, "instrumentation sampling probability");
  cmd->add_option("--period", o.period, "packets between periodic recompiles");
  cmd->add_option("--compile-latency", o.compile_latency, "packets between compile start and swap");
  cmd->add_option("--disable-pass", o.disabled_passes, "pass to skip (repeatable)");
  cmd->add_option("--disable-table-opt", o.disabled_tables, "table left unoptimized (repeatable)");
  cmd->add_option("--config", o.config_file, "JSON engine settings");
  cmd->add_option("--workers", o.workers, "logical worker count");
}

void add_traffic(CLI::App* cmd, Options& o) {
  cmd->add_option("--profile", o.profile, "traffic locality: high, low or none");
  cmd->add_option("--schedule", o.schedule_file, "segment file: profile,packets[,seed] per line");
  cmd->add_option("--packets", o.packets, "trace length");
  cmd->add_option("--window", o.window, "packets per reporting window");
  cmd->add_flag("--no-updates", o.no_updates, "skip the scenario's control-plane updates");
  cmd->add_flag("--shadow-check", o.shadow, "compare specialized results with live tables");
  cmd->add_option("--pass-log", o.pass_log_out, "write every compile's pass log here");
  cmd->add_option("--packet-log", o.packet_log_out, "write seq,version,cost,action here");
}

int cmd_run(const Options& o) {
  const RunConfig rc = run_config(o);
  const RunResult r = run_scenario(rc);
  write_output(o.out, format_windows(r.windows));
  if (!o.pass_log_out.empty()) write_output(o.pass_log_out, format_pass_logs(r.pass_logs));
  if (!o.packet_log_out.empty()) write_output(o.packet_log_out, format_packet_log(r.packet_log));
  std::cerr << rc.scenario << ": " << r.report.packets << " packets, mean cost " << r.report.mean_cost()
            << ", specialized " << r.report.spec_hit_fraction() << ", recompiles " << r.report.recompiles
            << ", guard fallbacks " << r.report.guard_fallbacks << "\n";
  return 0;
}

int cmd_verify(const Options& o) {
  const RunConfig rc = run_config(o);
  const VerifyResult r = verify_scenario(rc);
  std::ostringstream report;
  report << "scenario " << rc.scenario << ": " << r.packets << " packets, baseline mean " << r.baseline.mean_cost()
         << ", optimized mean " << r.optimized.mean_cost() << ", recompiles " << r.optimized.recompiles << "\n";
  if (r.identical) {
    report << "actions identical\n";
  } else {
    report << format_divergence(*r.divergence);
  }
  write_output(o.out, report.str());
  if (!o.pass_log_out.empty()) write_output(o.pass_log_out, format_pass_logs(r.pass_logs));
  return r.identical ? 0 : 1;
}

int cmd_inspect(const Options& o) {
  const std::uint64_t seed = resolve_seed(o);
  const EngineConfig cfg = engine_config(o, seed);
  write_output(o.out, inspect_scenario(o.scenario, cfg, o.warmup, seed, o.dump_program));
  if (!o.export_dir.empty()) {
    const Scenario s = build_scenario(o.scenario);
    export_scenario(s, adaptation_schedule(5000, seed), o.export_dir);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morpheus-mini: runtime specialization of packet-processing programs"};
  app.require_subcommand(1);
  Options o;

  auto* run = app.add_subcommand("run", "run a scenario and print windowed cost metrics");
  add_common(run, o);
  add_traffic(run, o);
  run->add_option("--out", o.out, "metrics CSV path (default stdout)");

  auto* verify = app.add_subcommand("verify", "check actions against a never-optimizing engine");
  add_common(verify, o);
  add_traffic(verify, o);
  verify->add_option("--out", o.out, "report path (default stdout)");
  verify->add_flag("--inject-fault", o.inject_fault, "corrupt inlined hits (test fixture)");

  auto* inspect = app.add_subcommand("inspect", "print analysis, guards and pass log for a scenario");
  add_common(inspect, o);
  inspect->add_option("--warmup", o.warmup, "high-locality packets before the inspected compile");
  inspect->add_option("--out", o.out, "report path (default stdout)");
  inspect->add_option("--export", o.export_dir, "also write program, rules and manifest here");
  inspect->add_flag("--dump-program", o.dump_program, "print the optimized program");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(o);
    if (verify->parsed()) return cmd_verify(o);
    if (inspect->parsed()) return cmd_inspect(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
