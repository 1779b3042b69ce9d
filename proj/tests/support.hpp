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

// Helpers shared by the unit tests.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "morpheus/analysis.hpp"
#include "morpheus/interpreter.hpp"
#include "morpheus/ir_text.hpp"
#include "morpheus/optimizer.hpp"
#include "morpheus/validate.hpp"
#include "morpheus/workload.hpp"

namespace morpheus::test {

inline TableEntry exact_row(Key key, Record value) { return TableEntry{std::move(key), {}, 0, 0, std::move(value)}; }

inline TableEntry lpm_row(std::uint32_t prefix, unsigned len, Record value) {
  return TableEntry{Key{prefix}, {}, len, 0, std::move(value)};
}

inline Mutation insert(TableEntry e) { return Mutation{MutationOp::Insert, std::move(e)}; }

inline Value v32(u128 x) { return Value::make(32, x); }
inline Value v16(u128 x) { return Value::make(16, x); }
inline Value v1(u128 x) { return Value::make(1, x); }

inline void fill(TableState& t, const std::vector<TableEntry>& rows) {
  for (const auto& r : rows) t.mutate(insert(r));
}

/// Tables of `p` with marks from the analysis applied.
inline TableSet marked_tables(const Program& p, TableSet tables) {
  apply_marks(analyze(p), tables);
  return tables;
}

/// Runs one packet of an original program.
inline ExecResult run_original(const Program& p, TableSet& tables, const Packet& pkt) {
  static const CostModel cost;
  ExecEnv env;
  env.cost = &cost;
  env.tables = &tables;
  return execute(p, pkt, env);
}

/// Runs one packet of an artifact, deciding guards from live generations the
/// way the engine does.
inline ExecResult run_artifact(const OptimizedArtifact& art, TableSet& tables, const AnalysisResult& a,
                               const Packet& pkt, bool shadow = false) {
  static const CostModel cost;
  ExecEnv env;
  env.cost = &cost;
  env.tables = &tables;
  env.synthesized = &art.synthesized;
  env.shadow_check = shadow;
  env.guard_alive = [&](GuardId g) {
    for (const auto& spec : art.guards) {
      if (spec.id != g) continue;
      if (spec.scope == GuardScope::Site) return tables[spec.table].generation() == spec.expected_version;
      std::uint64_t sum = 0;
      for (TableRef t = 0; t < tables.size(); ++t) {
        if (!a.is_rw(t)) sum += tables[t].generation();
      }
      return sum == spec.expected_version;
    }
    return false;
  };
  env.record = [](SiteId, const Key&) { return false; };
  return execute(art.program, pkt, env);
}

/// Heatmaps with exact counts for one site.
inline HeatmapSet exact_heatmap(SiteId site, const std::vector<Key>& accesses) {
  Heatmap h;
  h.site = site;
  for (const auto& k : accesses) ++h.counts[k];
  h.total_sampled = accesses.size();
  return HeatmapSet{{site, h}};
}

inline bool log_contains(const std::vector<std::string>& log, const std::string& needle) {
  for (const auto& line : log) {
    if (line.find(needle) != std::string::npos) return true;
  }
  return false;
}

inline std::vector<std::string> rules_of(const std::vector<Diagnostic>& d) {
  std::vector<std::string> out;
  for (const auto& x : d) out.push_back(x.rule);
  return out;
}

inline Packet random_packet(std::mt19937_64& rng) {
  Packet p;
  const auto r = rng();
  p.proto = (r & 3) == 0 ? Proto::Udp : ((r & 3) == 1 ? Proto::Other : Proto::Tcp);
  p.src_ip = static_cast<std::uint32_t>(rng());
  p.dst_ip = static_cast<std::uint32_t>(rng());
  p.src_port = static_cast<std::uint16_t>(rng());
  p.dst_port = static_cast<std::uint16_t>(rng());
  p.src_mac = rng() & 0xffffffffffffULL;
  p.dst_mac = rng() & 0xffffffffffffULL;
  p.vlan = static_cast<std::uint16_t>(rng() & 0xfff);
  p.payload_len = static_cast<std::uint16_t>(64 + rng() % 1400);
  return p;
}

}  // namespace morpheus::test
