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

#include "morpheus/validate.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include "morpheus/ir_text.hpp"

namespace morpheus {

namespace {

enum class RegKind : std::uint8_t { Scalar, Result, Conflict };

struct RegInfo {
  bool defined = false;
  RegKind kind = RegKind::Scalar;
  std::size_t arity = 0;
  bool hit_known = false;
};

using RegState = std::vector<RegInfo>;

RegState merge(const RegState& a, const RegState& b) {
  RegState out(a.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (!a[r].defined || !b[r].defined) continue;
    out[r].defined = true;
    out[r].kind = a[r].kind == b[r].kind ? a[r].kind : RegKind::Conflict;
    out[r].arity = std::min(a[r].arity, b[r].arity);
    out[r].hit_known = a[r].hit_known && b[r].hit_known;
  }
  return out;
}

class Validator {
 public:
  explicit Validator(const Program& p) : p_(p) {}

  std::vector<Diagnostic> run() {
    check_tables();
    if (p_.entry >= p_.blocks.size()) report(kNoBlock, 0, "unknown entry", "entry block does not exist");
    bool targets_ok = true;
    for (BlockId b = 0; b < p_.blocks.size(); ++b) targets_ok &= check_structure(b);
    if (p_.provenance == Provenance::Original) check_sites();
    const bool acyclic = check_cycles();
    if (acyclic && targets_ok && p_.entry < p_.blocks.size()) check_registers();
    return std::move(diags_);
  }

 private:
  void report(BlockId b, std::size_t i, std::string rule, std::string detail) {
    diags_.push_back(Diagnostic{b, i, std::move(rule), std::move(detail)});
  }

  bool table_ok(TableRef t) const { return t < p_.tables.size(); }

  void check_tables() {
    for (const auto& t : p_.tables) {
      if (t.key.empty() || t.key.size() > kMaxFields || t.value.size() > kMaxFields) {
        report(kNoBlock, 0, "table schema", t.name + ": key/value field count out of range");
      }
      if (t.kind == TableKind::Lpm && (t.key.size() != 1 || t.key[0].width != 32)) {
        report(kNoBlock, 0, "table schema", t.name + ": lpm key must be one 32-bit field");
      }
      if (!t.key_mask.empty() && (t.kind != TableKind::Exact || t.key_mask.size() != t.key.size())) {
        report(kNoBlock, 0, "table schema", t.name + ": key mask needs an exact table and one mask per key field");
      }
    }
  }

  bool check_structure(BlockId b) {
    const auto& code = p_.blocks[b].code;
    bool targets_ok = true;
    if (code.empty() || !is_terminator(code.back())) {
      report(b, code.size(), "missing terminator", "block does not end in a terminator");
    }
    for (std::size_t i = 0; i < code.size(); ++i) {
      const auto& inst = code[i];
      if (is_terminator(inst)) {
        if (i + 1 != code.size()) report(b, i, "terminator not last", "terminator followed by more instructions");
        for (BlockId s : successors(inst)) {
          if (s >= p_.blocks.size()) {
            report(b, i, "unknown block", "jump target does not exist");
            targets_ok = false;
          }
        }
      }
      if (p_.provenance == Provenance::Original && is_optimizer_only(inst)) {
        report(b, i, "optimizer-only instruction", print_instruction(p_, inst));
      }
      check_table_refs(b, i, inst);
    }
    return targets_ok;
  }

  void check_table_refs(BlockId b, std::size_t i, const Instruction& inst) {
    if (const auto* lk = std::get_if<TableLookup>(&inst)) {
      if (!table_ok(lk->table)) return report(b, i, "unknown table", "lookup names an undeclared table");
      if (lk->keys.size() != p_.tables[lk->table].key.size()) report(b, i, "key arity", p_.tables[lk->table].name);
    } else if (const auto* up = std::get_if<TableUpdate>(&inst)) {
      if (!table_ok(up->table)) return report(b, i, "unknown table", "update names an undeclared table");
      if (up->keys.size() != p_.tables[up->table].key.size()) report(b, i, "key arity", p_.tables[up->table].name);
      if (up->values.size() != p_.tables[up->table].value.size()) {
        report(b, i, "value arity", p_.tables[up->table].name);
      }
    } else if (const auto* mr = std::get_if<MakeResult>(&inst)) {
      if (mr->origin) {
        if (!table_ok(*mr->origin)) return report(b, i, "unknown table", "result origin is undeclared");
        const auto& decl = p_.tables[*mr->origin];
        if (mr->origin_keys.size() != decl.key.size()) report(b, i, "key arity", decl.name);
        if (mr->hit && mr->values.size() != decl.value.size()) report(b, i, "value arity", decl.name);
      }
    } else if (const auto* sw = std::get_if<Switch>(&inst)) {
      for (const auto& arm : sw->arms) {
        if (arm.value.size() != sw->keys.size() || arm.mask.size() != sw->keys.size()) {
          report(b, i, "switch arity", "arm width differs from key count");
        }
      }
    }
  }

  void check_sites() {
    std::set<SiteId> seen;
    for (BlockId b = 0; b < p_.blocks.size(); ++b) {
      const auto& code = p_.blocks[b].code;
      for (std::size_t i = 0; i < code.size(); ++i) {
        std::optional<SiteId> site;
        if (const auto* lk = std::get_if<TableLookup>(&code[i])) site = lk->site;
        if (const auto* up = std::get_if<TableUpdate>(&code[i])) site = up->site;
        if (site && !seen.insert(*site).second) report(b, i, "duplicate site", "@" + std::to_string(*site));
      }
    }
  }

  bool check_cycles() {
    // Kahn's algorithm over every block, reachable or not.
    const auto preds = predecessors(p_);
    std::vector<std::size_t> indegree(p_.blocks.size());
    for (BlockId b = 0; b < p_.blocks.size(); ++b) indegree[b] = preds[b].size();
    std::vector<BlockId> ready;
    for (BlockId b = 0; b < p_.blocks.size(); ++b) {
      if (indegree[b] == 0) ready.push_back(b);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
      BlockId b = ready.back();
      ready.pop_back();
      ++visited;
      const auto* term = p_.blocks[b].terminator();
      if (term == nullptr) continue;
      std::vector<BlockId> succ = successors(*term);
      std::sort(succ.begin(), succ.end());
      succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
      for (BlockId s : succ) {
        if (s < p_.blocks.size() && --indegree[s] == 0) ready.push_back(s);
      }
    }
    if (visited != p_.blocks.size()) {
      for (BlockId b = 0; b < p_.blocks.size(); ++b) {
        if (indegree[b] != 0) {
          report(b, 0, "cycle", "block " + p_.blocks[b].label + " lies on a cycle");
          break;
        }
      }
      return false;
    }
    return true;
  }

  void use_scalar(const RegState& s, BlockId b, std::size_t i, Reg r) {
    if (r >= s.size() || !s[r].defined) {
      report(b, i, "undefined register", "%" + std::to_string(r));
    } else if (s[r].kind != RegKind::Scalar) {
      report(b, i, "register kind", "%" + std::to_string(r) + " is not a scalar");
    }
  }

  void transfer(RegState& s, BlockId b, std::size_t i, const Instruction& inst) {
    const auto def_scalar = [&s](Reg r) { s[r] = RegInfo{true, RegKind::Scalar, 0, false}; };
    if (const auto* fo = std::get_if<FieldOf>(&inst)) {
      const Reg r = fo->result;
      if (!s[r].defined) {
        report(b, i, "undefined register", "%" + std::to_string(r));
      } else if (s[r].kind != RegKind::Result) {
        report(b, i, "register kind", "%" + std::to_string(r) + " is not a lookup result");
      } else {
        if (!s[r].hit_known) report(b, i, "possible miss dereference", "%" + std::to_string(r));
        if (fo->index >= s[r].arity) report(b, i, "field index", std::to_string(fo->index));
      }
      def_scalar(fo->dst);
      return;
    }
    if (const auto* br = std::get_if<Branch>(&inst)) {
      if (!s[br->cond].defined) {
        report(b, i, "undefined register", "%" + std::to_string(br->cond));
      } else if (s[br->cond].kind == RegKind::Conflict) {
        report(b, i, "register kind", "%" + std::to_string(br->cond) + " has path-dependent kind");
      }
      return;
    }
    for (Reg r : used_regs(inst)) use_scalar(s, b, i, r);
    if (const auto* lk = std::get_if<TableLookup>(&inst)) {
      s[lk->dst] = RegInfo{true, RegKind::Result, table_ok(lk->table) ? p_.tables[lk->table].value.size() : 0, false};
    } else if (const auto* mr = std::get_if<MakeResult>(&inst)) {
      std::size_t arity = mr->values.size();
      if (!mr->hit) arity = mr->origin && table_ok(*mr->origin) ? p_.tables[*mr->origin].value.size() : 0;
      s[mr->dst] = RegInfo{true, RegKind::Result, arity, mr->hit};
    } else if (auto d = defined_reg(inst)) {
      def_scalar(*d);
    }
  }

  void check_registers() {
    const auto order = topological_order(p_);
    if (!order) return;
    const std::size_t nregs = p_.register_count();
    std::vector<std::optional<RegState>> in(p_.blocks.size());
    in[p_.entry] = RegState(nregs);
    auto flow = [&in](BlockId to, const RegState& st) {
      in[to] = in[to] ? merge(*in[to], st) : st;
    };
    for (BlockId b : *order) {
      if (!in[b]) continue;
      RegState s = *in[b];
      const auto& code = p_.blocks[b].code;
      for (std::size_t i = 0; i < code.size(); ++i) transfer(s, b, i, code[i]);
      const auto* term = p_.blocks[b].terminator();
      if (term == nullptr) continue;
      if (const auto* br = std::get_if<Branch>(term);
          br != nullptr && s[br->cond].defined && s[br->cond].kind == RegKind::Result) {
        RegState hit = s;
        hit[br->cond].hit_known = true;
        flow(br->then_block, hit);
        flow(br->else_block, s);
        continue;
      }
      for (BlockId succ : successors(*term)) flow(succ, s);
    }
  }

  const Program& p_;
  std::vector<Diagnostic> diags_;
};

}  // namespace

std::string to_string(const Diagnostic& d, const Program& p) {
  std::string where = d.block < p.blocks.size() ? p.blocks[d.block].label + ":" + std::to_string(d.index) : "program";
  return where + ": " + d.rule + (d.detail.empty() ? "" : " (" + d.detail + ")");
}

std::vector<Diagnostic> validate(const Program& p) { return Validator(p).run(); }

}  // namespace morpheus
