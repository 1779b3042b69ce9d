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

#include "morpheus/analysis.hpp"

#include <algorithm>

namespace morpheus {

namespace {

using BitRows = std::vector<std::vector<bool>>;

std::vector<BlockId> block_successors(const Program& p, BlockId b) {
  std::vector<BlockId> out;
  if (const auto* term = p.blocks[b].terminator()) {
    for (BlockId s : successors(*term)) {
      if (s < p.blocks.size() && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
  }
  return out;
}

/// Registers transitively derived from `root` through def-use edges,
/// ignoring program order.
std::vector<bool> derived_registers(const Program& p, Reg root, Reg nregs) {
  std::vector<std::vector<Reg>> edges(nregs);
  for (const auto& block : p.blocks) {
    for (const auto& inst : block.code) {
      auto d = defined_reg(inst);
      if (!d) continue;
      std::vector<Reg> uses = used_regs(inst);
      if (const auto* fo = std::get_if<FieldOf>(&inst)) uses.push_back(fo->result);
      for (Reg u : uses) edges[u].push_back(*d);
    }
  }
  std::vector<bool> seen(nregs, false);
  std::vector<Reg> work{root};
  seen[root] = true;
  while (!work.empty()) {
    Reg r = work.back();
    work.pop_back();
    for (Reg d : edges[r]) {
      if (!seen[d]) {
        seen[d] = true;
        work.push_back(d);
      }
    }
  }
  return seen;
}

}  // namespace

const AccessSite* AnalysisResult::find_site(SiteId s) const {
  for (const auto& site : sites) {
    if (site.site == s) return &site;
  }
  return nullptr;
}

std::vector<AccessSite> find_access_sites(const Program& p) {
  std::vector<AccessSite> out;
  for (BlockId b = 0; b < p.blocks.size(); ++b) {
    const auto& code = p.blocks[b].code;
    for (std::size_t i = 0; i < code.size(); ++i) {
      const std::string context = p.blocks[b].label + ":" + std::to_string(i);
      if (const auto* lk = std::get_if<TableLookup>(&code[i])) {
        out.push_back(AccessSite{lk->site, lk->table, AccessKind::Read, b, i, context});
      } else if (const auto* up = std::get_if<TableUpdate>(&code[i])) {
        out.push_back(AccessSite{up->site, up->table, AccessKind::Write, b, i, context});
      }
    }
  }
  return out;
}

std::vector<RwMark> classify_tables(const Program& p, const std::vector<AccessSite>& sites) {
  // A lookup result flowing into a write implies a write site on the written
  // table, so write sites alone decide the mark.
  std::vector<RwMark> marks(p.tables.size(), RwMark::RO);
  for (const auto& s : sites) {
    if (s.kind == AccessKind::Write && s.table < marks.size()) marks[s.table] = RwMark::RW;
  }
  return marks;
}

BitRows dominators(const Program& p) {
  const std::size_t n = p.blocks.size();
  BitRows dom(n, std::vector<bool>(n, false));
  for (std::size_t b = 0; b < n; ++b) dom[b][b] = true;
  const auto order = topological_order(p);
  if (!order) return dom;
  const auto preds = predecessors(p);
  std::vector<bool> reachable(n, false);
  for (BlockId b : *order) reachable[b] = true;
  for (BlockId b : *order) {
    if (b == p.entry) continue;
    std::vector<bool> acc(n, true);
    bool any = false;
    for (BlockId q : preds[b]) {
      if (!reachable[q]) continue;
      any = true;
      for (std::size_t d = 0; d < n; ++d) acc[d] = acc[d] && dom[q][d];
    }
    if (!any) continue;
    acc[b] = true;
    dom[b] = std::move(acc);
  }
  return dom;
}

BitRows post_dominators(const Program& p) {
  const std::size_t n = p.blocks.size();
  BitRows pdom(n, std::vector<bool>(n, false));
  for (std::size_t b = 0; b < n; ++b) pdom[b][b] = true;
  const auto order = topological_order(p);
  if (!order) return pdom;
  for (auto it = order->rbegin(); it != order->rend(); ++it) {
    const BlockId b = *it;
    const auto succ = block_successors(p, b);
    if (succ.empty()) continue;
    std::vector<bool> acc(n, true);
    for (BlockId s : succ) {
      for (std::size_t d = 0; d < n; ++d) acc[d] = acc[d] && pdom[s][d];
    }
    acc[b] = true;
    pdom[b] = std::move(acc);
  }
  return pdom;
}

std::vector<std::pair<SiteId, SiteId>> match_lookups_to_updates(const Program& p,
                                                                 const std::vector<AccessSite>& sites) {
  std::vector<std::pair<SiteId, SiteId>> out;
  const auto order = topological_order(p);
  if (!order) return out;
  const std::size_t n = p.blocks.size();
  const Reg nregs = p.register_count();
  const auto pdom = post_dominators(p);

  // below[b][x]: x is reachable from b through at least one edge.
  BitRows below(n, std::vector<bool>(n, false));
  for (auto it = order->rbegin(); it != order->rend(); ++it) {
    for (BlockId s : block_successors(p, *it)) {
      below[*it][s] = true;
      for (std::size_t x = 0; x < n; ++x) {
        if (below[s][x]) below[*it][x] = true;
      }
    }
  }

  for (const auto& r : sites) {
    if (r.kind != AccessKind::Read) continue;
    const Reg root = std::get<TableLookup>(p.blocks[r.block].code[r.index]).dst;
    const auto tainted = derived_registers(p, root, nregs);
    // Blocks whose exit decision depends on the read.
    std::vector<bool> deciding(n, false);
    for (BlockId b = 0; b < n; ++b) {
      const auto* term = p.blocks[b].terminator();
      if (term == nullptr) continue;
      for (Reg u : used_regs(*term)) {
        if (u < nregs && tainted[u]) deciding[b] = true;
      }
    }
    for (const auto& w : sites) {
      if (w.kind != AccessKind::Write || w.table != r.table) continue;
      const auto& up = std::get<TableUpdate>(p.blocks[w.block].code[w.index]);
      bool paired = false;
      for (Reg u : used_regs(up)) paired = paired || (u < nregs && tainted[u]);
      for (BlockId b = 0; b < n && !paired; ++b) {
        // Control dependent: reachable from b without post-dominating it.
        paired = deciding[b] && below[b][w.block] && !pdom[b][w.block];
      }
      if (paired) out.emplace_back(r.site, w.site);
    }
  }
  return out;
}

std::vector<Region> classify_regions(const Program& p, const std::vector<AccessSite>& sites,
                                     const std::vector<RwMark>& marks) {
  const std::size_t n = p.blocks.size();
  std::vector<bool> has_rw(n, false);
  for (const auto& s : sites) {
    if (s.table < marks.size() && marks[s.table] == RwMark::RW) has_rw[s.block] = true;
  }
  const auto dom = dominators(p);
  std::vector<Region> out(n, Region::Stateless);
  for (BlockId b = 0; b < n; ++b) {
    for (BlockId d = 0; d < n; ++d) {
      if (has_rw[d] && dom[b][d]) out[b] = Region::Stateful;
    }
  }
  return out;
}

AnalysisResult analyze(const Program& p) {
  AnalysisResult a;
  a.sites = find_access_sites(p);
  a.table_marks = classify_tables(p, a.sites);
  a.pairs = match_lookups_to_updates(p, a.sites);
  a.region_marks = classify_regions(p, a.sites, a.table_marks);
  return a;
}

void apply_marks(const AnalysisResult& a, TableSet& tables) {
  for (std::size_t t = 0; t < tables.size() && t < a.table_marks.size(); ++t) tables[t].rw_mark = a.table_marks[t];
}

std::string format_analysis(const Program& p, const AnalysisResult& a) {
  std::string out = "tables:\n";
  for (std::size_t t = 0; t < p.tables.size(); ++t) {
    out += "  " + p.tables[t].name + " " + std::string(rw_mark_name(a.table_marks[t])) + "\n";
  }
  out += "sites:\n";
  for (const auto& s : a.sites) {
    out += "  @" + std::to_string(s.site) + " " + p.tables[s.table].name +
           (s.kind == AccessKind::Read ? " read " : " write ") + s.context + "\n";
  }
  out += "pairs:\n";
  for (const auto& [r, w] : a.pairs) {
    out += "  @" + std::to_string(r) + " -> @" + std::to_string(w) + " " + p.tables[a.find_site(r)->table].name + "\n";
  }
  out += "regions:\n";
  for (BlockId b = 0; b < p.blocks.size(); ++b) {
    out += "  " + p.blocks[b].label + (a.region_marks[b] == Region::Stateful ? " stateful" : " stateless") + "\n";
  }
  return out;
}

}  // namespace morpheus
