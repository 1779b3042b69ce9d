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

// The specialization pipeline.
//
// run_pipeline rewrites a copy of the original program (the specialized path),
// then insert_guards prepends a program-level guard whose fallback is a frozen,
// verbatim copy of the original blocks. Per-site rewrites are stacked in front
// of the lookup they replace:
//
//   pre -> instr -> branch-inject -> site guard -> fast path -> hot cache -> lookup -> cont
//
// Known lookup outcomes are materialized with MakeResult and, for read-only
// tables, the continuation is cloned per outcome so constant propagation can
// fold the hit test and the field reads.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "morpheus/analysis.hpp"
#include "morpheus/cost_model.hpp"
#include "morpheus/instrumentation.hpp"
#include "morpheus/tables.hpp"

namespace morpheus {

namespace pass {
inline constexpr std::string_view kTableElimination = "table-elimination";
inline constexpr std::string_view kDsSpecialization = "ds-specialization";
inline constexpr std::string_view kJit = "jit";
inline constexpr std::string_view kBranchInjection = "branch-injection";
inline constexpr std::string_view kInstrumentation = "instrumentation";
inline constexpr std::string_view kConstantPropagation = "constant-propagation";
inline constexpr std::string_view kDce = "dce";
}  // namespace pass

/// All pass names in pipeline order.
const std::vector<std::string>& pass_names();

struct PassConfig {
  std::set<std::string> disabled_passes;
  /// Tables left alone by every pass (no elimination, inlining, folding or
  /// instrumentation).
  std::set<std::string> disabled_tables;
  std::size_t small_table_threshold = 16;
  std::size_t fast_path_max_entries = 8;
  std::size_t branch_injection_max_values = 3;
  std::size_t hot_cache_max_entries = 64;
  SamplingPolicy sampling;
  /// Instrument every read site, whatever its size (p is set by the caller).
  bool naive_instrumentation = false;
  /// Test hook: corrupt the first value of every inlined hit.
  bool inject_fault = false;
  CostModel cost;

  bool enabled(std::string_view pass) const { return disabled_passes.count(std::string(pass)) == 0; }
  bool table_enabled(const std::string& table) const { return disabled_tables.count(table) == 0; }
  /// Throws Error on unknown pass names or zero thresholds.
  void check() const;
};

enum class GuardScope : std::uint8_t { ProgramLevel, Site };

struct GuardSpec {
  GuardId id = 0;
  GuardScope scope = GuardScope::ProgramLevel;
  SiteId site = 0;
  TableRef table = 0;
  /// Site guards: the table generation the fast path was built from.
  /// Program-level guard: the sum of read-only table generations.
  std::uint64_t expected_version = 0;

  friend bool operator==(const GuardSpec&, const GuardSpec&) = default;
};

/// How a synthesized table relates to the table it stands in for.
///   Complete: same answer as the origin for every key that reaches it.
///   PositiveOnly: hits are the origin's answer; misses fall through.
enum class ShadowRole : std::uint8_t { Complete, PositiveOnly };

struct SynthTable {
  TableRef ref = 0;     // index in the optimized program's table list
  TableRef origin = 0;  // original table it was derived from
  ShadowRole role = ShadowRole::Complete;
  TableState state;
};

struct OptimizedArtifact {
  Program program;
  std::vector<GuardSpec> guards;
  std::vector<std::uint64_t> table_generations_at_compile;  // by original TableRef
  std::vector<SynthTable> synthesized;
  std::vector<std::string> pass_log;
  std::vector<SiteId> instrumented_sites;
};

/// Raised when a pass leaves the program invalid. The caller keeps running
/// the previous version.
class PassError : public Error {
 public:
  using Error::Error;
};

/// `tables` is the compile-time snapshot, indexed like `original.tables`,
/// with RO/RW marks applied. Throws PassError if any pass output fails
/// validation.
OptimizedArtifact run_pipeline(const Program& original, const AnalysisResult& analysis, const TableSet& tables,
                               const HeatmapSet& heatmaps, const PassConfig& cfg, std::uint64_t new_version);

/// Sparse conditional constant propagation over the block DAG. Folds Alu on
/// constants, field reads of materialized results and of fields that are
/// constant across a read-only table, and branches/switches on constants.
/// Frozen blocks are left untouched. Returns the number of folded instructions.
std::size_t constant_propagation(Program& p, const TableSet& tables, const std::set<std::string>& disabled_tables);

/// Removes unreachable blocks and unused pure definitions, folds branches with
/// identical targets, threads empty jump blocks and merges single-predecessor
/// jump chains, to a fixpoint. Frozen blocks are left untouched. Returns the
/// number of removed instructions.
std::size_t dead_code_elimination(Program& p);

/// Wraps a specialized program: a new entry block holds the program-level
/// guard, the specialized blocks get a "spec." prefix and the original blocks
/// are appended frozen as the fallback.
Program insert_guards(const Program& specialized, const Program& original);

/// Structural check: every opaque result and synthesized lookup derived from
/// a read-write table is dominated by a site guard on that table.
bool guards_complete(const OptimizedArtifact& art, const AnalysisResult& analysis);

/// One line per entry.
std::string format_pass_log(const std::vector<std::string>& log);

}  // namespace morpheus
