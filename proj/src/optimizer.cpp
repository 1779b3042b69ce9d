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

#include "morpheus/optimizer.hpp"

#include <algorithm>
#include <map>

#include "morpheus/batch.hpp"
#include "morpheus/ir_text.hpp"
#include "morpheus/validate.hpp"

namespace morpheus {

namespace {

enum class DsKind : std::uint8_t { None, LpmExact, WildcardPre };

struct SiteInfo {
  SiteId site = 0;
  TableRef table = 0;
  Reg dst = 0;
  std::vector<Reg> keys;
  BlockId pre = kNoBlock;     // ends in "jmp front"
  BlockId lookup = kNoBlock;  // the live lookup; always a valid fallback
  BlockId cont = kNoBlock;    // code after the lookup
  BlockId front = kNoBlock;   // first block of the per-site chain
  BlockId guard = kNoBlock;   // site guard block, if any
  bool eliminated = false;
  bool inlined = false;
  DsKind ds = DsKind::None;
  std::optional<std::size_t> pre_table;  // index into synthesized
  std::optional<std::size_t> residual;   // index into synthesized
};

bool touches_tables_or_guards(const Instruction& inst) {
  return std::holds_alternative<TableLookup>(inst) || std::holds_alternative<TableUpdate>(inst) ||
         is_optimizer_only(inst);
}

Key full_masks(const TableDecl& decl) {
  Key m;
  for (const auto& f : decl.key) m.push_back(width_mask(f.width));
  return m;
}

std::string keys_text(const std::vector<Key>& keys) {
  std::string out = "[";
  for (std::size_t i = 0; i < keys.size(); ++i) out += (i ? " " : "") + to_string(keys[i]);
  return out + "]";
}

class Rewriter {
 public:
  Rewriter(const Program& original, const AnalysisResult& analysis, const TableSet& tables,
           const HeatmapSet& heatmaps, const PassConfig& cfg)
      : orig_(original), a_(analysis), tables_(tables), heat_(heatmaps), cfg_(cfg), w_(original) {
    w_.provenance = Provenance::Optimized;
    for (const auto& b : w_.blocks) labels_.insert(b.label);
    for (const auto& s : a_.sites) {
      if (s.kind == AccessKind::Read) read_sites_.push_back(s.site);
    }
  }

  Program& program() { return w_; }
  std::vector<std::string>& log() { return log_; }
  std::vector<SynthTable>& synthesized() { return synth_; }
  std::vector<GuardSpec>& site_guards() { return guards_; }
  std::vector<SiteId>& instrumented() { return instrumented_; }

  void table_elimination() {
    for (SiteId sid : read_sites_) {
      const TableRef t = site_table(sid);
      if (is_rw(t) || !opt_enabled(t) || !tables_[t].empty()) continue;
      SiteInfo& s = isolate(sid);
      const BlockId arm = known_arm(s.site, false, {}, false, "elim");
      set_front(site(sid), arm);
      site(sid).eliminated = true;
      log_.push_back("table-elimination site=" + std::to_string(sid) + " table=" + name(t));
    }
  }

  void ds_specialization() {
    for (SiteId sid : read_sites_) {
      const TableRef t = site_table(sid);
      if (!opt_enabled(t) || is_eliminated(sid)) continue;
      const auto& table = tables_[t];
      if (table.kind() == TableKind::Lpm) {
        auto len = table.uniform_prefix_length();
        if (!len || cfg_.cost.exact_lookup >= cfg_.cost.lookup(table, 1)) continue;
        specialize_lpm(sid, *len);
      } else if (table.kind() == TableKind::Wildcard) {
        specialize_wildcard(sid);
      }
    }
  }

  void jit() {
    for (SiteId sid : read_sites_) {
      const TableRef t = site_table(sid);
      if (!opt_enabled(t) || is_eliminated(sid)) continue;
      const auto& table = tables_[t];
      const bool small = table.size() <= cfg_.small_table_threshold;
      if (small && !is_rw(t)) {
        inline_all(sid);
      } else if (small) {
        guarded_inline(sid);
      } else {
        fast_path(sid);
      }
    }
  }

  void branch_injection() {
    for (SiteId sid : read_sites_) {
      const TableRef t = site_table(sid);
      if (is_rw(t) || !opt_enabled(t) || is_eliminated(sid) || is_inlined(sid)) continue;
      const auto& table = tables_[t];
      if (table.kind() == TableKind::Lpm || table.empty()) continue;
      const auto& decl = table.decl();
      for (std::size_t f = 0; f < decl.key.size(); ++f) {
        const auto dom = table.field_domain(decl.key[f].name);
        if (!dom.fully_specified || dom.values.empty() || dom.values.size() > cfg_.branch_injection_max_values) {
          continue;
        }
        SiteInfo& s = isolate(sid);
        const Reg key_reg = s.keys[f];
        const BlockId next = s.front;
        const BlockId miss = known_arm(sid, false, {}, false, "bi");
        Switch sw{{key_reg}, {}, miss};
        std::string values;
        for (u128 v : dom.values) {
          sw.arms.push_back(SwitchArm{Key{v}, Key{width_mask(dom.width)}, next});
          values += (values.empty() ? "" : " ") + u128_to_string(v);
        }
        const BlockId blk = add_block(label_of(site(sid).pre) + ".bi" + std::to_string(sid), {std::move(sw)});
        set_front(site(sid), blk);
        log_.push_back("branch-injection site=" + std::to_string(sid) + " table=" + name(t) +
                       " field=" + decl.key[f].name + " values=[" + values + "]");
        break;
      }
    }
  }

  void instrumentation() {
    std::vector<SiteId> plan;
    if (cfg_.naive_instrumentation) {
      plan = read_sites_;
    } else {
      plan = plan_instrumentation(orig_, a_, tables_, cfg_.sampling);
    }
    for (SiteId sid : plan) {
      const TableRef t = site_table(sid);
      if (!opt_enabled(t)) continue;
      SiteInfo& s = isolate(sid);
      const BlockId blk = add_block(label_of(s.pre) + ".in" + std::to_string(sid),
                                    {InstrRecord{sid, s.keys}, Jump{s.front}});
      set_front(site(sid), blk);
      instrumented_.push_back(sid);
      log_.push_back("instrumentation site=" + std::to_string(sid) + " table=" + name(t));
    }
  }

 private:
  // ---- bookkeeping ----

  const std::string& name(TableRef t) const { return orig_.tables[t].name; }
  bool is_rw(TableRef t) const { return a_.is_rw(t) || tables_[t].rw_mark == RwMark::RW; }
  bool opt_enabled(TableRef t) const { return cfg_.table_enabled(name(t)); }
  TableRef site_table(SiteId sid) const { return a_.find_site(sid)->table; }
  bool is_eliminated(SiteId sid) const {
    auto it = sites_.find(sid);
    return it != sites_.end() && it->second.eliminated;
  }
  bool is_inlined(SiteId sid) const {
    auto it = sites_.find(sid);
    return it != sites_.end() && it->second.inlined;
  }
  SiteInfo& site(SiteId sid) { return sites_.at(sid); }
  const std::string& label_of(BlockId b) const { return w_.blocks[b].label; }

  std::string fresh_label(const std::string& base) {
    if (labels_.insert(base).second) return base;
    for (int i = 1;; ++i) {
      std::string candidate = base + "." + std::to_string(i);
      if (labels_.insert(candidate).second) return candidate;
    }
  }

  BlockId add_block(const std::string& label, std::vector<Instruction> code) {
    Block b;
    b.label = fresh_label(label);
    b.code = std::move(code);
    w_.blocks.push_back(std::move(b));
    return static_cast<BlockId>(w_.blocks.size() - 1);
  }

  /// Splits the lookup for `sid` into its own block on first use.
  SiteInfo& isolate(SiteId sid) {
    if (auto it = sites_.find(sid); it != sites_.end()) return it->second;
    for (BlockId b = 0; b < w_.blocks.size(); ++b) {
      auto& code = w_.blocks[b].code;
      for (std::size_t i = 0; i < code.size(); ++i) {
        const auto* lk = std::get_if<TableLookup>(&code[i]);
        if (lk == nullptr || lk->site != sid) continue;
        SiteInfo s;
        s.site = sid;
        s.table = lk->table;
        s.dst = lk->dst;
        s.keys = lk->keys;
        const std::string base = w_.blocks[b].label;
        std::vector<Instruction> tail(std::make_move_iterator(code.begin() + static_cast<std::ptrdiff_t>(i) + 1),
                                      std::make_move_iterator(code.end()));
        Instruction lookup = code[i];
        code.resize(i);
        const BlockId cont = add_block(base + ".ct" + std::to_string(sid), std::move(tail));
        const BlockId lk_block = add_block(base + ".lk" + std::to_string(sid), {std::move(lookup), Jump{cont}});
        w_.blocks[b].code.push_back(Jump{lk_block});
        // Sites already split out of this block now continue from `cont`.
        for (auto& [other, info] : sites_) {
          if (info.pre == b) info.pre = cont;
        }
        s.pre = b;
        s.lookup = lk_block;
        s.cont = cont;
        s.front = lk_block;
        return sites_.emplace(sid, std::move(s)).first->second;
      }
    }
    throw PassError("no lookup for site @" + std::to_string(sid));
  }

  void set_front(SiteInfo& s, BlockId blk) {
    auto& term = w_.blocks[s.pre].code.back();
    std::get<Jump>(term).target = blk;
    s.front = blk;
  }

  /// Where a new stage goes when it must sit behind the site guard.
  BlockId after_guard(const SiteInfo& s) const {
    return s.guard == kNoBlock ? s.front : std::get<GuardCheck>(w_.blocks[s.guard].code.back()).ok;
  }

  void insert_behind_guard(SiteInfo& s, BlockId blk) {
    if (s.guard == kNoBlock) {
      set_front(s, blk);
    } else {
      std::get<GuardCheck>(w_.blocks[s.guard].code.back()).ok = blk;
    }
  }

  /// Adds the site guard in front of `ok` (read-write tables only).
  void add_site_guard(SiteId sid, BlockId ok) {
    SiteInfo& s = site(sid);
    const auto gid = static_cast<GuardId>(guards_.size() + 1);
    const BlockId g = add_block(label_of(s.pre) + ".gd" + std::to_string(sid), {GuardCheck{gid, ok, s.lookup}});
    SiteInfo& s2 = site(sid);
    set_front(s2, g);
    s2.guard = g;
    guards_.push_back(GuardSpec{gid, GuardScope::Site, sid, s2.table, tables_[s2.table].generation()});
  }

  bool clonable(BlockId b) const {
    if (b >= w_.blocks.size() || w_.blocks[b].frozen) return false;
    for (const auto& inst : w_.blocks[b].code) {
      if (touches_tables_or_guards(inst)) return false;
    }
    for (const auto& [sid, info] : sites_) {
      if (info.pre == b) return false;
    }
    return true;
  }

  BlockId clone_block(BlockId b, const std::string& tag) {
    Block copy = w_.blocks[b];
    return add_block(copy.label + "." + tag, std::move(copy.code));
  }

  /// A block that materializes a known outcome of the site's lookup and
  /// continues after it. Read-only outcomes get a private copy of the
  /// continuation (and of the hit target) so they can be folded.
  BlockId known_arm(SiteId sid, bool hit, Record values, bool opaque, const std::string& tag) {
    const SiteInfo s = site(sid);
    if (cfg_.inject_fault && hit && !values.empty()) {
      values[0] = Value::truncated(values[0].width, values[0].bits ^ 1);
    }
    BlockId target = s.cont;
    const std::string arm_tag = tag + std::to_string(arm_counter_++);
    if (!opaque && clonable(s.cont)) {
      target = clone_block(s.cont, arm_tag);
      if (hit) {
        auto* br = std::get_if<Branch>(&w_.blocks[target].code.back());
        if (br != nullptr && br->cond == s.dst && br->then_block != s.cont && clonable(br->then_block)) {
          const BlockId then_copy = clone_block(br->then_block, arm_tag);
          std::get<Branch>(w_.blocks[target].code.back()).then_block = then_copy;
        }
      }
    }
    MakeResult mr{s.dst, hit, values, opaque, s.table, s.keys};
    return add_block(label_of(s.pre) + "." + arm_tag, {std::move(mr), Jump{target}});
  }

  // ---- cost estimates ----

  std::uint64_t origin_cost(TableRef t, const Key& key) const {
    std::uint32_t examined = 1;
    tables_[t].lookup(key, &examined);
    return cfg_.cost.lookup(tables_[t], examined);
  }

  /// Cost of whatever currently answers the site when no fast path matches.
  std::uint64_t fallback_cost(const SiteInfo& s, const Key& key) const {
    switch (s.ds) {
      case DsKind::LpmExact:
        return cfg_.cost.exact_lookup;
      case DsKind::WildcardPre: {
        const auto& pre = synth_[*s.pre_table].state;
        if (pre.lookup(key) != nullptr) return cfg_.cost.exact_lookup + cfg_.cost.branch;
        if (!s.residual) return cfg_.cost.exact_lookup + cfg_.cost.branch + cfg_.cost.base;
        const auto& res = synth_[*s.residual].state;
        std::uint32_t examined = 1;
        res.lookup(key, &examined);
        return cfg_.cost.exact_lookup + cfg_.cost.branch + cfg_.cost.lookup(res, examined);
      }
      case DsKind::None:
        break;
    }
    return origin_cost(s.table, key);
  }

  // ---- data-structure specialization ----

  std::size_t add_synth(TableDecl decl, TableRef origin, ShadowRole role, const std::vector<TableEntry>& entries) {
    TableState state(decl);
    for (const auto& e : entries) state.mutate(Mutation{MutationOp::Insert, e});
    state.rw_mark = RwMark::RO;
    const auto ref = static_cast<TableRef>(w_.tables.size());
    w_.tables.push_back(std::move(decl));
    synth_.push_back(SynthTable{ref, origin, role, std::move(state)});
    return synth_.size() - 1;
  }

  void specialize_lpm(SiteId sid, unsigned len) {
    SiteInfo& s0 = isolate(sid);
    const TableRef t = s0.table;
    const auto& table = tables_[t];
    TableDecl decl = table.decl();
    decl.name = name(t) + ".exact" + std::to_string(sid);
    decl.kind = TableKind::Exact;
    decl.capacity = 0;
    decl.key_mask = {lpm_mask(len)};
    std::vector<TableEntry> rows;
    for (const auto& e : table.entries()) rows.push_back(TableEntry{e.key, {}, 0, 0, e.value});
    const std::size_t idx = add_synth(decl, t, ShadowRole::Complete, rows);
    SiteInfo& s = site(sid);
    const BlockId blk = add_block(label_of(s.pre) + ".ds" + std::to_string(sid),
                                  {TableLookup{s.dst, synth_[idx].ref, s.keys, sid}, Jump{s.cont}});
    SiteInfo& s2 = site(sid);
    s2.ds = DsKind::LpmExact;
    if (is_rw(t)) {
      add_site_guard(sid, blk);
    } else {
      set_front(s2, blk);
    }
    log_.push_back("ds-specialization site=" + std::to_string(sid) + " table=" + name(t) +
                   " kind=lpm-exact length=" + std::to_string(len) + " entries=" + std::to_string(rows.size()));
  }

  void specialize_wildcard(SiteId sid) {
    const TableRef t = site_table(sid);
    const auto& table = tables_[t];
    const auto& decl = table.decl();
    const Key full = full_masks(decl);
    std::vector<TableEntry> exact_rows;
    std::vector<TableEntry> residual_rows;
    for (const auto& e : table.entries()) {
      if (e.mask == full) {
        exact_rows.push_back(e);
      } else {
        residual_rows.push_back(e);
      }
    }
    if (exact_rows.empty()) return;

    // Pre-table values are the full reference answer for each exact tuple.
    std::vector<Key> tuples;
    for (const auto& e : exact_rows) tuples.push_back(e.key);
    const auto answers = lookup_batch(table, tuples);
    std::map<Key, TableEntry> pre_rows;
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      pre_rows.emplace(tuples[i], TableEntry{tuples[i], {}, 0, 0, *answers.values[i]});
    }

    TableState pre_state([&] {
      TableDecl d = decl;
      d.kind = TableKind::Exact;
      return d;
    }());
    for (const auto& [k, e] : pre_rows) pre_state.mutate(Mutation{MutationOp::Insert, e});
    TableState res_state(decl);
    for (const auto& e : residual_rows) res_state.mutate(Mutation{MutationOp::Insert, e});

    // Expected cost over observed keys, or over one probe per rule.
    std::vector<std::pair<Key, double>> probes;
    if (auto h = heat_.find(sid); h != heat_.end() && !h->second.counts.empty()) {
      for (const auto& [k, c] : h->second.counts) probes.emplace_back(k, static_cast<double>(c));
    } else {
      for (const auto& e : table.entries()) probes.emplace_back(e.key, 1.0);
    }
    double before = 0;
    double after = 0;
    double weight = 0;
    for (const auto& [k, w] : probes) {
      before += w * static_cast<double>(origin_cost(t, k));
      double c = static_cast<double>(cfg_.cost.exact_lookup + cfg_.cost.branch);
      if (pre_state.lookup(k) == nullptr) {
        std::uint32_t examined = 1;
        res_state.lookup(k, &examined);
        c += residual_rows.empty() ? static_cast<double>(cfg_.cost.base)
                                   : static_cast<double>(cfg_.cost.lookup(res_state, examined));
      }
      after += w * c;
      weight += w;
    }
    if (weight == 0 || after >= before) return;

    isolate(sid);
    TableDecl pre_decl = decl;
    pre_decl.name = name(t) + ".pre" + std::to_string(sid);
    pre_decl.kind = TableKind::Exact;
    pre_decl.capacity = 0;
    std::vector<TableEntry> pre_list;
    for (const auto& [k, e] : pre_rows) pre_list.push_back(e);
    const std::size_t pre_idx = add_synth(pre_decl, t, ShadowRole::PositiveOnly, pre_list);

    std::optional<std::size_t> res_idx;
    std::vector<Instruction> res_code;
    SiteInfo& s = site(sid);
    if (!residual_rows.empty()) {
      TableDecl res_decl = decl;
      res_decl.name = name(t) + ".residual" + std::to_string(sid);
      res_decl.capacity = 0;
      res_idx = add_synth(res_decl, t, ShadowRole::Complete, residual_rows);
      res_code.push_back(TableLookup{s.dst, synth_[*res_idx].ref, s.keys, sid});
    } else {
      res_code.push_back(MakeResult{s.dst, false, {}, false, t, s.keys});
    }
    res_code.push_back(Jump{s.cont});
    const BlockId res_blk = add_block(label_of(s.pre) + ".res" + std::to_string(sid), std::move(res_code));
    SiteInfo& s1 = site(sid);
    const BlockId pre_blk =
        add_block(label_of(s1.pre) + ".pre" + std::to_string(sid),
                  {TableLookup{s1.dst, synth_[pre_idx].ref, s1.keys, sid}, Branch{s1.dst, s1.cont, res_blk}});
    SiteInfo& s2 = site(sid);
    s2.ds = DsKind::WildcardPre;
    s2.pre_table = pre_idx;
    s2.residual = res_idx;
    if (is_rw(t)) {
      add_site_guard(sid, pre_blk);
    } else {
      set_front(s2, pre_blk);
    }
    log_.push_back("ds-specialization site=" + std::to_string(sid) + " table=" + name(t) +
                   " kind=wildcard-pretable exact=" + std::to_string(pre_list.size()) +
                   " residual=" + std::to_string(residual_rows.size()));
  }

  // ---- JIT ----

  struct ArmSpec {
    Key value;
    Key mask;
    bool hit = false;
    Record rec;
  };

  BlockId build_switch(SiteId sid, const std::vector<ArmSpec>& arms, bool opaque, BlockId default_target,
                       const std::string& tag) {
    Switch sw{site(sid).keys, {}, default_target};
    for (const auto& a : arms) {
      const BlockId arm = known_arm(sid, a.hit, a.rec, opaque, tag);
      sw.arms.push_back(SwitchArm{a.value, a.mask, arm});
    }
    return add_block(label_of(site(sid).pre) + "." + tag + std::to_string(sid), {std::move(sw)});
  }

  std::vector<ArmSpec> entry_arms(const TableState& table) const {
    std::vector<ArmSpec> arms;
    const Key full = full_masks(table.decl());
    for (const auto& e : table.entries()) {
      ArmSpec a;
      a.hit = true;
      a.rec = e.value;
      switch (table.kind()) {
        case TableKind::Exact:
          a.value = e.key;
          a.mask = table.decl().key_mask.empty() ? full : Key{};
          if (!table.decl().key_mask.empty()) {
            for (u128 m : table.decl().key_mask) a.mask.push_back(m);
          }
          break;
        case TableKind::Lpm:
          a.value = e.key;
          a.mask = Key{lpm_mask(e.prefix_len)};
          break;
        case TableKind::Wildcard:
          a.value = e.key;
          a.mask = e.mask;
          break;
      }
      arms.push_back(std::move(a));
    }
    return arms;
  }

  void inline_all(SiteId sid) {
    isolate(sid);
    const TableRef t = site(sid).table;
    const auto arms = entry_arms(tables_[t]);
    const BlockId miss = known_arm(sid, false, {}, false, "im");
    const BlockId sw = build_switch(sid, arms, false, miss, "il");
    SiteInfo& s = site(sid);
    set_front(s, sw);
    s.inlined = true;
    log_.push_back("jit site=" + std::to_string(sid) + " table=" + name(t) +
                   " mode=inline entries=" + std::to_string(arms.size()));
  }

  void guarded_inline(SiteId sid) {
    const TableRef t = site_table(sid);
    const auto& table = tables_[t];
    const std::size_t n = table.size();
    const std::uint64_t worst = cfg_.cost.guard + cfg_.cost.inline_compare * n;
    if (n == 0 || worst >= cfg_.cost.lookup(table, static_cast<std::uint32_t>(n))) return;
    isolate(sid);
    const auto arms = entry_arms(table);
    const BlockId next = after_guard(site(sid));
    const BlockId sw = build_switch(sid, arms, true, next, "gi");
    if (site(sid).guard == kNoBlock) {
      add_site_guard(sid, sw);
    } else {
      insert_behind_guard(site(sid), sw);
    }
    log_.push_back("jit site=" + std::to_string(sid) + " table=" + name(t) +
                   " mode=guarded-inline entries=" + std::to_string(n));
  }

  void fast_path(SiteId sid) {
    auto hm = heat_.find(sid);
    if (hm == heat_.end() || hm->second.total_sampled == 0 || hm->second.counts.empty()) return;
    const Heatmap& h = hm->second;
    const TableRef t = site_table(sid);
    const auto& table = tables_[t];
    const bool rw = is_rw(t);
    const auto hitters = heavy_hitters(h, cfg_.sampling);
    if (hitters.empty()) return;
    for (const auto& k : hitters) {
      if (k.size() != table.decl().key.size()) return;  // heatmap from another schema
    }
    SiteInfo probe_info = sites_.count(sid) != 0 ? site(sid) : SiteInfo{};
    if (sites_.count(sid) == 0) probe_info.table = t;

    // Compile-time oracle: the true answer for every heavy-hitter key.
    const auto answers = lookup_batch(table, hitters);
    const double total = static_cast<double>(h.total_sampled);
    std::vector<double> share(hitters.size());
    std::vector<double> cost(hitters.size());
    for (std::size_t i = 0; i < hitters.size(); ++i) {
      share[i] = static_cast<double>(h.counts.at(hitters[i])) / total;
      cost[i] = static_cast<double>(fallback_cost(probe_info, hitters[i]));
    }
    // Traffic outside the hitter list, including evicted samples, pays the
    // average fallback cost.
    double all_cost = 0;
    double all_mass = 0;
    for (const auto& [k, c] : h.counts) {
      const double w = static_cast<double>(c);
      const double kc = static_cast<double>(fallback_cost(probe_info, k));
      all_cost += w * kc;
      all_mass += w;
    }
    const double avg = all_mass > 0 ? all_cost / all_mass : 0;
    double hitter_mass = 0;
    for (double s : share) hitter_mass += s;
    const double outside = std::max(0.0, 1.0 - hitter_mass);

    const bool hot_allowed = table.kind() != TableKind::Exact && cfg_.hot_cache_max_entries > 0;
    const std::size_t cap = std::min(cfg_.fast_path_max_entries, hitters.size());
    const double cmp = static_cast<double>(cfg_.cost.inline_compare);
    const double hot_probe = static_cast<double>(cfg_.cost.exact_lookup + cfg_.cost.branch);
    const double resident_rate = static_cast<double>(h.resident_hits) / total;
    std::size_t answered = 0;
    for (const auto* v : answers.values) answered += v != nullptr ? 1 : 0;
    const double hit_ratio = static_cast<double>(answered) / static_cast<double>(hitters.size());

    double best = outside * avg;
    for (std::size_t i = 0; i < hitters.size(); ++i) best += share[i] * cost[i];
    std::size_t best_n = 0;
    bool best_hot = false;
    for (std::size_t n = 0; n <= cap; ++n) {
      for (int hot = 0; hot <= (hot_allowed ? 1 : 0); ++hot) {
        if (n == 0 && hot == 0) continue;
        double e = rw ? static_cast<double>(cfg_.cost.guard) : 0.0;
        double covered = 0;
        for (std::size_t i = 0; i < n; ++i) {
          e += share[i] * cmp * static_cast<double>(i + 1);
          covered += share[i];
        }
        e += (1.0 - covered) * cmp * static_cast<double>(n);
        if (hot) e += (1.0 - covered) * hot_probe;
        std::size_t hot_taken = 0;
        double hot_mass = 0;
        double rest = 0;
        for (std::size_t i = n; i < hitters.size(); ++i) {
          const bool in_hot = hot && answers.values[i] != nullptr && hot_taken < cfg_.hot_cache_max_entries;
          if (in_hot) {
            ++hot_taken;
            hot_mass += share[i];
            continue;
          }
          rest += share[i] * cost[i];
        }
        rest += outside * avg;
        // Counts undercount keys that cycle through a thrashing cache; the
        // resident-hit rate is the better coverage estimate then.
        const double resident_cover = std::clamp(resident_rate * hit_ratio - covered, 0.0, 1.0 - covered);
        if (hot && resident_cover > hot_mass) {
          rest = (1.0 - covered - resident_cover) * avg;
        }
        e += rest;
        if (e + 1e-9 < best) {
          best = e;
          best_n = n;
          best_hot = hot != 0;
        }
      }
    }
    if (best_n == 0 && !best_hot) return;

    isolate(sid);
    std::vector<Key> hot_keys;
    BlockId next = after_guard(site(sid));
    if (best_hot) {
      std::vector<TableEntry> rows;
      for (std::size_t i = best_n; i < hitters.size() && rows.size() < cfg_.hot_cache_max_entries; ++i) {
        if (answers.values[i] == nullptr) continue;
        rows.push_back(TableEntry{hitters[i], {}, 0, 0, *answers.values[i]});
        hot_keys.push_back(hitters[i]);
      }
      TableDecl decl = table.decl();
      decl.name = name(t) + ".hot" + std::to_string(sid);
      decl.kind = TableKind::Exact;
      decl.capacity = 0;
      decl.key_mask.clear();
      if (cfg_.inject_fault) {
        for (auto& r : rows) {
          if (!r.value.empty()) r.value[0] = Value::truncated(r.value[0].width, r.value[0].bits ^ 1);
        }
      }
      const std::size_t idx = add_synth(decl, t, ShadowRole::PositiveOnly, rows);
      SiteInfo& s = site(sid);
      const BlockId hc = add_block(label_of(s.pre) + ".hc" + std::to_string(sid),
                                   {TableLookup{s.dst, synth_[idx].ref, s.keys, sid}, Branch{s.dst, s.cont, next}});
      if (rw && site(sid).guard == kNoBlock) {
        add_site_guard(sid, hc);
      } else {
        insert_behind_guard(site(sid), hc);
      }
      next = hc;
    }
    std::vector<Key> chain_keys;
    if (best_n > 0) {
      std::vector<ArmSpec> arms;
      const Key full = full_masks(table.decl());
      for (std::size_t i = 0; i < best_n; ++i) {
        ArmSpec a;
        a.value = hitters[i];
        a.mask = full;
        a.hit = answers.values[i] != nullptr;
        if (a.hit) a.rec = *answers.values[i];
        arms.push_back(std::move(a));
        chain_keys.push_back(hitters[i]);
      }
      const BlockId sw = build_switch(sid, arms, rw, next, "fp");
      if (rw && site(sid).guard == kNoBlock) {
        add_site_guard(sid, sw);
      } else {
        insert_behind_guard(site(sid), sw);
      }
    }
    log_.push_back("jit site=" + std::to_string(sid) + " table=" + name(t) + " mode=fastpath entries=" +
                   std::to_string(best_n) + " hot=" + std::to_string(hot_keys.size()) + " keys=" +
                   keys_text(chain_keys) + " hot_keys=" + keys_text(hot_keys));
  }

  const Program& orig_;
  const AnalysisResult& a_;
  const TableSet& tables_;
  const HeatmapSet& heat_;
  const PassConfig& cfg_;
  Program w_;
  std::set<std::string> labels_;
  std::vector<SiteId> read_sites_;
  std::map<SiteId, SiteInfo> sites_;
  std::vector<SynthTable> synth_;
  std::vector<GuardSpec> guards_;
  std::vector<SiteId> instrumented_;
  std::vector<std::string> log_;
  std::size_t arm_counter_ = 0;
};

void check_valid(const Program& p, std::string_view after) {
  auto diags = validate(p);
  if (diags.empty()) return;
  throw PassError("invalid program after " + std::string(after) + ": " + to_string(diags.front(), p));
}

}  // namespace

const std::vector<std::string>& pass_names() {
  static const std::vector<std::string> kNames{
      std::string(pass::kTableElimination), std::string(pass::kDsSpecialization),
      std::string(pass::kJit),              std::string(pass::kBranchInjection),
      std::string(pass::kInstrumentation),  std::string(pass::kConstantPropagation),
      std::string(pass::kDce)};
  return kNames;
}

void PassConfig::check() const {
  for (const auto& p : disabled_passes) {
    const auto& names = pass_names();
    if (std::find(names.begin(), names.end(), p) == names.end()) throw Error("unknown pass '" + p + "'");
  }
  if (small_table_threshold == 0 || fast_path_max_entries == 0 || branch_injection_max_values == 0) {
    throw Error("pass thresholds must be at least 1");
  }
  sampling.check();
  cost.check();
}

OptimizedArtifact run_pipeline(const Program& original, const AnalysisResult& analysis, const TableSet& tables,
                               const HeatmapSet& heatmaps, const PassConfig& cfg, std::uint64_t new_version) {
  cfg.check();
  if (original.provenance != Provenance::Original) throw PassError("pipeline input must be an original program");
  if (tables.size() != original.tables.size()) throw PassError("table snapshot does not match the program");
  if (new_version <= original.version) throw PassError("artifact version must exceed the original's");

  Rewriter rw(original, analysis, tables, heatmaps, cfg);
  Program& w = rw.program();
  w.version = new_version;

  const std::vector<std::pair<std::string_view, void (Rewriter::*)()>> rewrites{
      {pass::kTableElimination, &Rewriter::table_elimination},
      {pass::kDsSpecialization, &Rewriter::ds_specialization},
      {pass::kJit, &Rewriter::jit},
      {pass::kBranchInjection, &Rewriter::branch_injection},
      {pass::kInstrumentation, &Rewriter::instrumentation},
  };
  for (const auto& [name, fn] : rewrites) {
    if (!cfg.enabled(name)) continue;
    (rw.*fn)();
    check_valid(w, name);
  }
  if (cfg.enabled(pass::kConstantPropagation)) {
    const std::size_t folded = constant_propagation(w, tables, cfg.disabled_tables);
    rw.log().push_back("constant-propagation folded=" + std::to_string(folded));
    check_valid(w, pass::kConstantPropagation);
  }
  if (cfg.enabled(pass::kDce)) {
    const std::size_t removed = dead_code_elimination(w);
    rw.log().push_back("dce removed=" + std::to_string(removed));
    check_valid(w, pass::kDce);
  }

  OptimizedArtifact art;
  art.program = insert_guards(w, original);
  art.program.version = new_version;
  check_valid(art.program, "guard insertion");

  std::uint64_t ro_generations = 0;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    art.table_generations_at_compile.push_back(tables[t].generation());
    if (!analysis.is_rw(static_cast<TableRef>(t))) ro_generations += tables[t].generation();
  }
  art.guards.push_back(GuardSpec{0, GuardScope::ProgramLevel, 0, 0, ro_generations});
  for (const auto& g : rw.site_guards()) art.guards.push_back(g);
  art.synthesized = std::move(rw.synthesized());
  art.instrumented_sites = std::move(rw.instrumented());
  art.pass_log = std::move(rw.log());
  art.pass_log.push_back("guards program=1 site=" + std::to_string(art.guards.size() - 1));
  return art;
}

bool guards_complete(const OptimizedArtifact& art, const AnalysisResult& analysis) {
  const Program& p = art.program;
  const auto dom = dominators(p);
  std::map<GuardId, TableRef> site_guard_table;
  for (const auto& g : art.guards) {
    if (g.scope == GuardScope::Site) site_guard_table[g.id] = g.table;
  }
  std::map<TableRef, std::vector<BlockId>> guard_blocks;
  for (BlockId b = 0; b < p.blocks.size(); ++b) {
    if (const auto* term = p.blocks[b].terminator()) {
      if (const auto* gc = std::get_if<GuardCheck>(term)) {
        auto it = site_guard_table.find(gc->guard);
        if (it != site_guard_table.end()) guard_blocks[it->second].push_back(b);
      }
    }
  }
  std::map<TableRef, TableRef> synth_origin;
  for (const auto& s : art.synthesized) synth_origin[s.ref] = s.origin;
  auto guarded = [&](BlockId b, TableRef origin) {
    for (BlockId g : guard_blocks[origin]) {
      if (g != b && dom[b][g]) return true;
    }
    return false;
  };
  for (BlockId b = 0; b < p.blocks.size(); ++b) {
    if (p.blocks[b].frozen) continue;
    for (const auto& inst : p.blocks[b].code) {
      std::optional<TableRef> origin;
      if (const auto* mr = std::get_if<MakeResult>(&inst); mr != nullptr && mr->origin) {
        if (analysis.is_rw(*mr->origin)) origin = mr->origin;
      } else if (const auto* lk = std::get_if<TableLookup>(&inst)) {
        auto it = synth_origin.find(lk->table);
        if (it != synth_origin.end() && analysis.is_rw(it->second)) origin = it->second;
      }
      if (origin && !guarded(b, *origin)) return false;
    }
  }
  return true;
}

std::string format_pass_log(const std::vector<std::string>& log) {
  std::string out;
  for (const auto& line : log) out += line + "\n";
  return out;
}

}  // namespace morpheus
