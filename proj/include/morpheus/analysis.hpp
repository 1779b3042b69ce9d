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

// Table access analysis: sites, RO/RW marks, lookup/update pairing and
// stateless/stateful regions.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "morpheus/ir.hpp"
#include "morpheus/tables.hpp"

namespace morpheus {

enum class AccessKind : std::uint8_t { Read, Write };

struct AccessSite {
  SiteId site = 0;
  TableRef table = 0;
  AccessKind kind = AccessKind::Read;
  BlockId block = 0;
  std::size_t index = 0;
  /// "<block label>:<instruction index>", unique per site.
  std::string context;

  friend bool operator==(const AccessSite&, const AccessSite&) = default;
};

enum class Region : std::uint8_t { Stateless, Stateful };

struct AnalysisResult {
  std::vector<AccessSite> sites;
  std::vector<RwMark> table_marks;                     // by TableRef
  std::vector<std::pair<SiteId, SiteId>> pairs;        // (read site, write site)
  std::vector<Region> region_marks;                    // by BlockId

  const AccessSite* find_site(SiteId s) const;
  bool is_rw(TableRef t) const { return t < table_marks.size() && table_marks[t] == RwMark::RW; }

  friend bool operator==(const AnalysisResult&, const AnalysisResult&) = default;
};

/// Sites in block order, then instruction order.
std::vector<AccessSite> find_access_sites(const Program& p);
std::vector<RwMark> classify_tables(const Program& p, const std::vector<AccessSite>& sites);
/// Same-table pairs where the read's result reaches the write either through
/// register def-use chains or through a branch the write is control dependent on.
std::vector<std::pair<SiteId, SiteId>> match_lookups_to_updates(const Program& p,
                                                                 const std::vector<AccessSite>& sites);
std::vector<Region> classify_regions(const Program& p, const std::vector<AccessSite>& sites,
                                     const std::vector<RwMark>& marks);

AnalysisResult analyze(const Program& p);

/// Copies the marks onto table states (tables indexed like p.tables).
void apply_marks(const AnalysisResult& a, TableSet& tables);

/// dom[b][d] is true when d dominates b. Unreachable blocks dominate nothing
/// and are dominated by nothing but themselves.
std::vector<std::vector<bool>> dominators(const Program& p);
/// pdom[b][d] is true when d post-dominates b.
std::vector<std::vector<bool>> post_dominators(const Program& p);

/// Stable, human-readable dump: table marks, sites, pairs, regions.
std::string format_analysis(const Program& p, const AnalysisResult& a);

}  // namespace morpheus
