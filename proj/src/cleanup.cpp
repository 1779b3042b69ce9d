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

// Constant propagation, dead-code elimination and guard insertion.

#include <algorithm>
#include <map>
#include <set>

#include "morpheus/optimizer.hpp"

namespace morpheus {

namespace {

// ---- constant propagation lattice ----

struct LVal {
  enum class Kind : std::uint8_t { Undef, Const, Result, Lookup, Over };
  Kind kind = Kind::Undef;
  Value value;       // Const
  bool hit = false;  // Result
  Record rec;        // Result
  TableRef table = 0;  // Lookup

  friend bool operator==(const LVal& a, const LVal& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Const:
        return a.value == b.value;
      case Kind::Result:
        return a.hit == b.hit && a.rec == b.rec;
      case Kind::Lookup:
        return a.table == b.table;
      default:
        return true;
    }
  }
};

LVal over() { return LVal{LVal::Kind::Over, {}, false, {}, 0}; }

LVal constant(Value v) {
  LVal l;
  l.kind = LVal::Kind::Const;
  l.value = v;
  return l;
}

LVal meet(const LVal& a, const LVal& b) {
  if (a.kind == LVal::Kind::Undef) return b;
  if (b.kind == LVal::Kind::Undef) return a;
  return a == b ? a : over();
}

bool switch_arm_matches(const SwitchArm& arm, const std::vector<u128>& keys) {
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if ((keys[i] & arm.mask[i]) != arm.value[i]) return false;
  }
  return true;
}

class ConstProp {
 public:
  ConstProp(Program& p, const TableSet& tables, const std::set<std::string>& disabled)
      : p_(p), tables_(tables), disabled_(disabled) {}

  std::size_t run() {
    const auto order = topological_order(p_);
    if (!order) return 0;
    const Reg nregs = p_.register_count();
    std::vector<std::optional<std::vector<LVal>>> in(p_.blocks.size());
    in[p_.entry] = std::vector<LVal>(nregs);
    for (BlockId b : *order) {
      if (!in[b]) continue;
      std::vector<LVal> st = *in[b];
      Block& block = p_.blocks[b];
      const bool rewrite = !block.frozen;
      for (auto& inst : block.code) transfer(st, inst, rewrite);
      if (block.code.empty() || !is_terminator(block.code.back())) continue;
      auto decided = decide(st, block.code.back());
      if (decided && rewrite && !std::holds_alternative<Jump>(block.code.back())) {
        block.code.back() = Jump{*decided};
        ++folded_;
      }
      std::vector<BlockId> targets = decided ? std::vector<BlockId>{*decided} : successors(block.code.back());
      for (BlockId s : targets) {
        if (s >= p_.blocks.size()) continue;
        if (!in[s]) {
          in[s] = st;
        } else {
          for (Reg r = 0; r < nregs; ++r) (*in[s])[r] = meet((*in[s])[r], st[r]);
        }
      }
    }
    return folded_;
  }

 private:
  std::optional<Value> constant_field(TableRef t, std::uint32_t index) {
    if (t >= tables_.size()) return std::nullopt;
    const auto& table = tables_[t];
    if (table.rw_mark != RwMark::RO || disabled_.count(table.name()) != 0) return std::nullopt;
    if (index >= table.decl().value.size()) return std::nullopt;
    auto key = std::make_pair(t, index);
    auto it = field_cache_.find(key);
    if (it == field_cache_.end()) {
      auto dom = table.field_domain(table.decl().value[index].name);
      std::optional<Value> v;
      if (dom.constant()) v = Value{static_cast<std::uint8_t>(dom.width), *dom.values.begin()};
      it = field_cache_.emplace(key, v).first;
    }
    return it->second;
  }

  void transfer(std::vector<LVal>& st, Instruction& inst, bool rewrite) {
    if (auto* c = std::get_if<Const>(&inst)) {
      st[c->dst] = constant(c->value);
    } else if (auto* alu = std::get_if<Alu>(&inst)) {
      const LVal& a = st[alu->lhs];
      const LVal& b = st[alu->rhs];
      if (a.kind == LVal::Kind::Const && b.kind == LVal::Kind::Const) {
        const Value v = eval_alu(alu->op, a.value, b.value);
        const Reg dst = alu->dst;
        if (rewrite) {
          inst = Const{dst, v};
          ++folded_;
        }
        st[dst] = constant(v);
      } else {
        st[alu->dst] = over();
      }
    } else if (auto* fo = std::get_if<FieldOf>(&inst)) {
      const LVal& r = st[fo->result];
      std::optional<Value> v;
      if (r.kind == LVal::Kind::Result && r.hit && fo->index < r.rec.size()) v = r.rec[fo->index];
      if (r.kind == LVal::Kind::Lookup) v = constant_field(r.table, fo->index);
      const Reg dst = fo->dst;
      if (v) {
        if (rewrite) {
          inst = Const{dst, *v};
          ++folded_;
        }
        st[dst] = constant(*v);
      } else {
        st[dst] = over();
      }
    } else if (auto* lk = std::get_if<TableLookup>(&inst)) {
      LVal l;
      l.kind = LVal::Kind::Lookup;
      l.table = lk->table;
      st[lk->dst] = l;
    } else if (auto* mr = std::get_if<MakeResult>(&inst)) {
      if (mr->opaque) {
        st[mr->dst] = over();
      } else {
        LVal l;
        l.kind = LVal::Kind::Result;
        l.hit = mr->hit;
        l.rec = mr->values;
        st[mr->dst] = l;
      }
    } else if (auto d = defined_reg(inst)) {
      st[*d] = over();
    }
  }

  std::optional<BlockId> decide(const std::vector<LVal>& st, const Instruction& term) const {
    if (const auto* br = std::get_if<Branch>(&term)) {
      const LVal& c = st[br->cond];
      if (c.kind == LVal::Kind::Const) return c.value.bits != 0 ? br->then_block : br->else_block;
      if (c.kind == LVal::Kind::Result) return c.hit ? br->then_block : br->else_block;
      return std::nullopt;
    }
    if (const auto* sw = std::get_if<Switch>(&term)) {
      std::vector<u128> keys;
      for (Reg k : sw->keys) {
        if (st[k].kind != LVal::Kind::Const) return std::nullopt;
        keys.push_back(st[k].value.bits);
      }
      for (const auto& arm : sw->arms) {
        if (switch_arm_matches(arm, keys)) return arm.target;
      }
      return sw->default_target;
    }
    if (const auto* j = std::get_if<Jump>(&term)) return j->target;
    return std::nullopt;
  }

  Program& p_;
  const TableSet& tables_;
  const std::set<std::string>& disabled_;
  std::map<std::pair<TableRef, std::uint32_t>, std::optional<Value>> field_cache_;
  std::size_t folded_ = 0;
};

// ---- dead-code elimination ----

void remap_targets(Program& p, const std::vector<BlockId>& remap) {
  for (auto& block : p.blocks) {
    if (block.code.empty()) continue;
    for_each_target(block.code.back(), [&remap](BlockId& t) {
      if (t < remap.size()) t = remap[t];
    });
  }
  if (p.entry < remap.size()) p.entry = remap[p.entry];
}

std::vector<bool> reachable_blocks(const Program& p) {
  std::vector<bool> seen(p.blocks.size(), false);
  if (p.entry >= p.blocks.size()) return seen;
  std::vector<BlockId> work{p.entry};
  seen[p.entry] = true;
  while (!work.empty()) {
    BlockId b = work.back();
    work.pop_back();
    const auto* term = p.blocks[b].terminator();
    if (term == nullptr) continue;
    for (BlockId s : successors(*term)) {
      if (s < p.blocks.size() && !seen[s]) {
        seen[s] = true;
        work.push_back(s);
      }
    }
  }
  return seen;
}

std::size_t remove_unreachable(Program& p) {
  const auto seen = reachable_blocks(p);
  std::vector<BlockId> remap(p.blocks.size(), kNoBlock);
  std::vector<Block> kept;
  std::size_t removed = 0;
  for (BlockId b = 0; b < p.blocks.size(); ++b) {
    if (seen[b] || p.blocks[b].frozen) {
      remap[b] = static_cast<BlockId>(kept.size());
      kept.push_back(std::move(p.blocks[b]));
    } else {
      removed += p.blocks[b].code.size() + 1;  // +1 so empty blocks still count as progress
    }
  }
  if (removed == 0) {
    p.blocks = std::move(kept);
    return 0;
  }
  p.blocks = std::move(kept);
  remap_targets(p, remap);
  return removed;
}

bool fold_trivial_terminators(Program& p) {
  bool changed = false;
  for (auto& block : p.blocks) {
    if (block.frozen || block.code.empty()) continue;
    auto& term = block.code.back();
    std::optional<BlockId> only;
    if (const auto* br = std::get_if<Branch>(&term); br != nullptr && br->then_block == br->else_block) {
      only = br->then_block;
    } else if (const auto* sw = std::get_if<Switch>(&term)) {
      bool same = true;
      for (const auto& arm : sw->arms) same = same && arm.target == sw->default_target;
      if (same) only = sw->default_target;
    }
    if (only) {
      term = Jump{*only};
      changed = true;
    }
  }
  return changed;
}

bool thread_jumps(Program& p) {
  bool changed = false;
  for (BlockId x = 0; x < p.blocks.size(); ++x) {
    const auto& bx = p.blocks[x];
    if (bx.frozen || x == p.entry || bx.code.size() != 1) continue;
    const auto* j = std::get_if<Jump>(&bx.code[0]);
    if (j == nullptr || j->target == x) continue;
    const BlockId target = j->target;
    for (auto& block : p.blocks) {
      if (block.frozen || block.code.empty()) continue;
      for_each_target(block.code.back(), [&](BlockId& t) {
        if (t == x) {
          t = target;
          changed = true;
        }
      });
    }
  }
  return changed;
}

std::size_t remove_dead_definitions(Program& p) {
  const auto order = topological_order(p);
  if (!order) return 0;
  const Reg nregs = p.register_count();
  std::vector<std::vector<bool>> live_in(p.blocks.size(), std::vector<bool>(nregs, false));
  std::size_t removed = 0;
  for (auto it = order->rbegin(); it != order->rend(); ++it) {
    Block& block = p.blocks[*it];
    std::vector<bool> live(nregs, false);
    if (const auto* term = block.terminator()) {
      for (BlockId s : successors(*term)) {
        if (s >= p.blocks.size()) continue;
        for (Reg r = 0; r < nregs; ++r) live[r] = live[r] || live_in[s][r];
      }
    }
    std::vector<bool> drop(block.code.size(), false);
    for (std::size_t i = block.code.size(); i-- > 0;) {
      const auto& inst = block.code[i];
      auto d = defined_reg(inst);
      if (d && !live[*d] && !has_side_effects(inst) && !block.frozen) {
        drop[i] = true;
        continue;
      }
      if (d) live[*d] = false;
      for (Reg u : used_regs(inst)) live[u] = true;
    }
    if (std::find(drop.begin(), drop.end(), true) != drop.end()) {
      std::vector<Instruction> kept;
      for (std::size_t i = 0; i < block.code.size(); ++i) {
        if (drop[i]) {
          ++removed;
        } else {
          kept.push_back(std::move(block.code[i]));
        }
      }
      block.code = std::move(kept);
    }
    live_in[*it] = std::move(live);
  }
  return removed;
}

std::size_t merge_jump_chains(Program& p) {
  std::size_t merged = 0;
  bool again = true;
  while (again) {
    again = false;
    const auto preds = predecessors(p);
    for (BlockId b = 0; b < p.blocks.size() && !again; ++b) {
      Block& pb = p.blocks[b];
      if (pb.frozen || pb.code.empty()) continue;
      const auto* j = std::get_if<Jump>(&pb.code.back());
      if (j == nullptr) continue;
      const BlockId x = j->target;
      if (x == b || x == p.entry || x >= p.blocks.size() || p.blocks[x].frozen) continue;
      if (preds[x].size() != 1 || preds[x][0] != b) continue;
      pb.code.pop_back();
      auto& xcode = p.blocks[x].code;
      pb.code.insert(pb.code.end(), std::make_move_iterator(xcode.begin()), std::make_move_iterator(xcode.end()));
      // Leave x as an unreachable stub; remove_unreachable drops it.
      xcode.clear();
      xcode.push_back(Return{Verdict::Drop});
      ++merged;
      again = true;
    }
  }
  return merged;
}

std::string unique_label(std::set<std::string>& used, std::string label) {
  if (used.insert(label).second) return label;
  for (int i = 1;; ++i) {
    std::string candidate = label + "." + std::to_string(i);
    if (used.insert(candidate).second) return candidate;
  }
}

}  // namespace

std::size_t constant_propagation(Program& p, const TableSet& tables, const std::set<std::string>& disabled_tables) {
  return ConstProp(p, tables, disabled_tables).run();
}

std::size_t dead_code_elimination(Program& p) {
  std::size_t removed = 0;
  while (true) {
    const std::size_t before = static_instruction_count(p);
    bool changed = fold_trivial_terminators(p);
    changed |= thread_jumps(p);
    changed |= remove_unreachable(p) != 0;
    remove_dead_definitions(p);
    changed |= merge_jump_chains(p) != 0;
    changed |= remove_unreachable(p) != 0;
    const std::size_t after = static_instruction_count(p);
    removed += before - after;
    if (!changed && before == after) break;
  }
  return removed;
}

Program insert_guards(const Program& specialized, const Program& original) {
  Program out;
  out.name = specialized.name;
  out.tables = specialized.tables;
  out.version = specialized.version;
  out.provenance = Provenance::Optimized;
  std::set<std::string> used;
  for (const auto& b : original.blocks) used.insert(b.label);

  const auto spec_n = static_cast<BlockId>(specialized.blocks.size());
  const BlockId spec_base = 1;
  const BlockId orig_base = spec_base + spec_n;

  Block entry;
  entry.label = unique_label(used, "guard.entry");
  entry.code.push_back(GuardCheck{0, spec_base + specialized.entry, orig_base + original.entry});
  out.blocks.push_back(std::move(entry));

  for (const auto& b : specialized.blocks) {
    Block nb = b;
    nb.label = unique_label(used, "spec." + b.label);
    nb.frozen = false;
    if (!nb.code.empty()) {
      for_each_target(nb.code.back(), [spec_base](BlockId& t) {
        if (t != kNoBlock) t += spec_base;
      });
    }
    out.blocks.push_back(std::move(nb));
  }
  for (const auto& b : original.blocks) {
    Block nb = b;
    nb.frozen = true;
    if (!nb.code.empty()) {
      for_each_target(nb.code.back(), [orig_base](BlockId& t) {
        if (t != kNoBlock) t += orig_base;
      });
    }
    out.blocks.push_back(std::move(nb));
  }
  out.entry = 0;
  return out;
}

}  // namespace morpheus
