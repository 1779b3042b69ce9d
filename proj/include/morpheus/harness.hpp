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

// Scenario runs, lockstep equivalence checks and inspection reports shared by
// the command-line tool, the tests and the benchmarks.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morpheus/engine.hpp"
#include "morpheus/workload.hpp"

namespace morpheus {

struct RunConfig {
  std::string scenario = "router";
  Locality profile = Locality::High;
  /// When non-empty, replaces `profile` and `packets`.
  std::vector<Segment> schedule;
  std::size_t packets = 100000;
  std::uint64_t seed = 1;
  EngineConfig engine;
  std::size_t window = 5000;
  bool control_updates = true;

  /// Throws Error on an unknown scenario, zero window or bad engine settings.
  void check() const;
};

struct Workload {
  Scenario scenario;
  std::vector<Packet> trace;
  std::vector<std::size_t> boundaries;
  std::vector<ScheduledUpdate> updates;
};

Workload make_workload(const RunConfig& cfg);

struct WindowStats {
  std::size_t window = 0;
  std::uint64_t packets = 0;
  double mean_cost = 0;
  double spec_hit_fraction = 0;
  std::uint64_t recompiles = 0;       // within the window
  std::uint64_t guard_fallbacks = 0;  // within the window
};

/// CSV "window,packets,mean_cost,spec_hit_fraction,recompiles,guard_fallbacks".
std::string format_windows(const std::vector<WindowStats>& windows);

struct RunResult {
  std::vector<WindowStats> windows;
  CostReport report;
  std::vector<std::vector<std::string>> pass_logs;
  std::vector<PacketLogEntry> packet_log;
  std::vector<std::size_t> boundaries;
};

RunResult run_scenario(const RunConfig& cfg);

/// All pass logs, each prefixed by "# compile N".
std::string format_pass_logs(const std::vector<std::vector<std::string>>& logs);

struct Divergence {
  std::uint64_t seq = 0;
  Packet packet;
  Action baseline;
  Action optimized;
  std::uint64_t version = 0;
  std::vector<std::string> pass_log;
};

struct VerifyResult {
  bool identical = true;
  std::uint64_t packets = 0;
  std::optional<Divergence> divergence;
  CostReport baseline;
  CostReport optimized;
  std::vector<std::vector<std::string>> pass_logs;
};

/// Runs a never-optimizing engine and the configured engine side by side on
/// the same trace and update schedule. Control updates reach the baseline
/// when the optimizing engine actually applies them.
VerifyResult verify_scenario(const RunConfig& cfg);

std::string format_divergence(const Divergence& d);

struct MatrixCell {
  std::string scenario;
  Locality profile = Locality::None;
  std::uint64_t seed = 0;
};

struct MatrixOutcome {
  MatrixCell cell;
  bool identical = false;
  std::uint64_t packets = 0;
  double baseline_mean = 0;
  double optimized_mean = 0;
  std::uint64_t recompiles = 0;
  std::string error;

  friend bool operator==(const MatrixOutcome& a, const MatrixOutcome& b) {
    return a.cell.scenario == b.cell.scenario && a.cell.profile == b.cell.profile && a.cell.seed == b.cell.seed &&
           a.identical == b.identical && a.packets == b.packets && a.baseline_mean == b.baseline_mean &&
           a.optimized_mean == b.optimized_mean && a.recompiles == b.recompiles && a.error == b.error;
  }
};

/// Every scenario x profile x seed in [first_seed, first_seed + seeds).
std::vector<MatrixCell> full_matrix(std::size_t seeds, std::uint64_t first_seed = 1);

/// Verifies every cell with `base` as the template config. The serial and
/// OpenMP versions return identical outcomes in cell order.
std::vector<MatrixOutcome> verify_matrix_serial(const std::vector<MatrixCell>& cells, const RunConfig& base);
std::vector<MatrixOutcome> verify_matrix_parallel(const std::vector<MatrixCell>& cells, const RunConfig& base);

/// Analysis report, instrumentation plan, and the guards and pass log of a
/// compile after a high-locality warm-up of `warmup` packets.
std::string inspect_scenario(const std::string& name, const EngineConfig& cfg, std::size_t warmup = 20000,
                             std::uint64_t seed = 1, bool dump_program = false);

}  // namespace morpheus
