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

// The execution engine: runs packets under the current program version,
// owns the live tables, guards and control-plane queue, and drives the
// periodic compile/swap cycle.
//
// Time is the packet sequence number. A compile started before packet s
// works on a snapshot taken at s and its artifact is swapped in before
// packet s + compile_latency. Control-plane updates that arrive in between
// are queued and applied right after the swap.

#pragma once

#include <cstdint>
#include <future>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "morpheus/analysis.hpp"
#include "morpheus/interpreter.hpp"
#include "morpheus/optimizer.hpp"

namespace morpheus {

enum class EngineMode : std::uint8_t { Baseline, Morpheus, NaiveInstrumentation };
enum class CompileTrigger : std::uint8_t { Periodic, Event, Both };

std::string_view engine_mode_name(EngineMode m);
std::optional<EngineMode> engine_mode_from_name(std::string_view name);
std::string_view trigger_name(CompileTrigger t);
std::optional<CompileTrigger> trigger_from_name(std::string_view name);

struct EngineConfig {
  EngineMode mode = EngineMode::Morpheus;
  std::size_t workers = 1;
  /// Packets between periodic compiles.
  std::uint64_t period = 50000;
  /// Packets between compile start and swap.
  std::uint64_t compile_latency = 1000;
  CompileTrigger trigger = CompileTrigger::Both;
  PassConfig passes;
  bool shadow_check = false;
  bool keep_packet_log = false;
  /// Seeds the per-worker sampling generators.
  std::uint64_t seed = 1;

  /// Throws Error on zero workers/period or an invalid pass config.
  void check() const;
};

/// Overlays settings from a JSON object onto `base`. Recognized keys:
/// mode, workers, period, compile_latency, trigger, shadow_check, seed,
/// sampling {probability, cache_capacity, rule, top_k, cumulative_fraction},
/// small_table_threshold, fast_path_max_entries, hot_cache_max_entries,
/// branch_injection_max_values, disabled_passes, disabled_tables, cost {...}.
/// Unknown keys are an Error.
EngineConfig parse_engine_config(std::string_view json_text, EngineConfig base = {});

struct CostReport {
  std::uint64_t packets = 0;
  CostBreakdown breakdown;
  std::uint64_t specialized_packets = 0;
  std::uint64_t guard_fallbacks = 0;
  std::uint64_t recompiles = 0;
  std::uint64_t failed_compiles = 0;
  std::uint64_t stale = 0;

  std::uint64_t total() const { return breakdown.total(); }
  double mean_cost() const { return packets == 0 ? 0.0 : static_cast<double>(total()) / static_cast<double>(packets); }
  double spec_hit_fraction() const {
    return packets == 0 ? 0.0 : static_cast<double>(specialized_packets) / static_cast<double>(packets);
  }
};

struct PacketLogEntry {
  std::uint64_t seq = 0;
  std::uint64_t version = 0;
  std::uint64_t cost = 0;
  Verdict verdict = Verdict::Drop;
  std::size_t worker = 0;
};

/// CSV "seq,version,cost,action" with a header row.
std::string format_packet_log(const std::vector<PacketLogEntry>& log);

struct AppliedUpdate {
  TableRef table = 0;
  Mutation mutation;
};

enum class UpdateStatus : std::uint8_t { Applied, Queued };

class Engine {
 public:
  /// `tables` holds the initial rules, indexed like `original.tables`.
  Engine(Program original, TableSet tables, EngineConfig cfg);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Runs the next packet (sequence number = packets seen so far), first
  /// performing any due swap or compile start.
  ExecResult process(const Packet& pkt);

  /// Applies now, or queues while a compile is in flight. Throws Error on a
  /// schema mismatch (checked before queueing).
  UpdateStatus control_update(TableRef table, const Mutation& m);
  UpdateStatus control_update(std::string_view table, const Mutation& m);

  /// Compiles against the current state and swaps immediately, waiting for
  /// any in-flight compile first. Returns false if the pipeline failed.
  bool compile_now();
  /// Waits for an in-flight compile and swaps it in.
  void finish_pending();

  /// Control updates applied since the last call, in application order.
  std::vector<AppliedUpdate> take_applied();

  const Program& original() const { return original_; }
  const Program& current() const { return artifact_ ? artifact_->program : original_; }
  const OptimizedArtifact* artifact() const { return artifact_.get(); }
  std::uint64_t version() const { return current().version; }
  const AnalysisResult& analysis() const { return analysis_; }
  const TableSet& tables() const { return tables_; }
  const EngineConfig& config() const { return cfg_; }
  const CostReport& report() const { return report_; }
  const std::vector<PacketLogEntry>& packet_log() const { return packet_log_; }
  /// Pass logs of every swapped-in artifact, in order.
  const std::vector<std::vector<std::string>>& pass_logs() const { return pass_logs_; }
  /// Heatmaps handed to the most recent compile.
  const HeatmapSet& last_heatmaps() const { return last_heatmaps_; }
  bool compiling() const { return pending_.has_value(); }
  std::uint64_t packets_seen() const { return seq_; }

 private:
  struct Pending {
    std::future<OptimizedArtifact> result;
    std::uint64_t ready_at = 0;
  };

  bool optimizing() const { return cfg_.mode != EngineMode::Baseline; }
  void maybe_swap();
  void maybe_start_compile();
  void start_compile();
  void swap_in(std::future<OptimizedArtifact>& fut);
  void apply_update(TableRef table, const Mutation& m);
  bool guard_alive(GuardId g) const;
  bool record_sample(std::size_t worker, SiteId site, const Key& key);
  HeatmapSet drain_heatmaps();

  Program original_;
  TableSet tables_;
  EngineConfig cfg_;
  AnalysisResult analysis_;
  std::unique_ptr<OptimizedArtifact> artifact_;
  std::optional<Pending> pending_;
  std::vector<AppliedUpdate> queue_;
  std::vector<AppliedUpdate> applied_;
  bool program_guard_alive_ = false;
  bool event_pending_ = false;
  std::uint64_t seq_ = 0;
  std::uint64_t compiles_started_ = 0;
  // caches_[worker][i] belongs to instrumented site sites_[i].
  std::vector<SiteId> cache_sites_;
  std::vector<std::vector<SiteCache>> caches_;
  std::vector<std::mt19937_64> rngs_;
  CostReport report_;
  std::vector<PacketLogEntry> packet_log_;
  std::vector<std::vector<std::string>> pass_logs_;
  HeatmapSet last_heatmaps_;
};

}  // namespace morpheus
