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

#include "morpheus/interpreter.hpp"

namespace morpheus {

namespace {

struct Slot {
  enum class Kind : std::uint8_t { Unset, Scalar, Result } kind = Kind::Unset;
  Value scalar;
  bool hit = false;
  Record values;
};

class Machine {
 public:
  Machine(const Program& p, const Packet& pkt, ExecEnv& env)
      : p_(p), env_(env), regs_(p.register_count()) {
    out_.action.packet = pkt;
    if (env_.cost == nullptr || env_.tables == nullptr) throw Error("interpreter needs a cost model and tables");
  }

  ExecResult run() {
    BlockId b = p_.entry;
    // Acyclic programs terminate; the bound guards against malformed input.
    std::size_t steps = 0;
    const std::size_t limit = p_.blocks.size() + 1;
    while (true) {
      if (b >= p_.blocks.size()) throw Error("jump to unknown block");
      if (++steps > limit) throw Error("block revisited; program has a cycle");
      const auto next = run_block(p_.blocks[b]);
      if (!next) return std::move(out_);
      b = *next;
    }
  }

 private:
  const Slot& reg(Reg r) const {
    if (r >= regs_.size() || regs_[r].kind == Slot::Kind::Unset) {
      throw Error("read of undefined register %" + std::to_string(r));
    }
    return regs_[r];
  }

  const Value& scalar(Reg r) const {
    const Slot& s = reg(r);
    if (s.kind != Slot::Kind::Scalar) throw Error("register %" + std::to_string(r) + " is not a scalar");
    return s.scalar;
  }

  Key key_of(const std::vector<Reg>& regs) const {
    Key k;
    for (Reg r : regs) k.push_back(scalar(r).bits);
    return k;
  }

  void set_scalar(Reg r, Value v) {
    Slot& s = regs_.at(r);
    s.kind = Slot::Kind::Scalar;
    s.scalar = v;
  }

  void set_result(Reg r, const Record* rec) {
    Slot& s = regs_.at(r);
    s.kind = Slot::Kind::Result;
    s.hit = rec != nullptr;
    s.values = rec != nullptr ? *rec : Record{};
  }

  void charge(CostCategory c, std::uint64_t units) { out_.cost.add(c, units); }

  const SynthTable* synth(TableRef t) const {
    if (env_.synthesized == nullptr) return nullptr;
    for (const auto& s : *env_.synthesized) {
      if (s.ref == t) return &s;
    }
    return nullptr;
  }

  /// Shadow check of an answer claimed for `origin` at `key`.
  void shadow(TableRef origin, const Key& key, const Record* claimed, bool positive_only) {
    if (!env_.shadow_check || origin >= env_.tables->size()) return;
    if (positive_only && claimed == nullptr) return;
    const Record* live = (*env_.tables)[origin].lookup(key);
    const bool same = (live == nullptr) == (claimed == nullptr) && (live == nullptr || *live == *claimed);
    if (!same) ++out_.stale;
  }

  std::optional<BlockId> run_block(const Block& blk) {
    const CostModel& cm = *env_.cost;
    for (const auto& inst : blk.code) {
      ++out_.instructions;
      if (const auto* i = std::get_if<LoadField>(&inst)) {
        charge(CostCategory::Instruction, cm.base);
        set_scalar(i->dst, get_field(out_.action.packet, i->field));
      } else if (const auto* i = std::get_if<Const>(&inst)) {
        charge(CostCategory::Instruction, cm.base);
        set_scalar(i->dst, i->value);
      } else if (const auto* i = std::get_if<Alu>(&inst)) {
        charge(CostCategory::Instruction, cm.base);
        set_scalar(i->dst, eval_alu(i->op, scalar(i->lhs), scalar(i->rhs)));
      } else if (const auto* i = std::get_if<SetField>(&inst)) {
        charge(CostCategory::Instruction, cm.base);
        set_field(out_.action.packet, i->field, scalar(i->src));
      } else if (const auto* i = std::get_if<TableLookup>(&inst)) {
        lookup(*i);
      } else if (const auto* i = std::get_if<TableUpdate>(&inst)) {
        update(*i);
      } else if (const auto* i = std::get_if<FieldOf>(&inst)) {
        charge(CostCategory::Instruction, cm.field_of);
        const Slot& s = reg(i->result);
        if (s.kind != Slot::Kind::Result) throw Error("field read from a non-result register");
        if (!s.hit) throw Error("field read from a lookup miss");
        if (i->index >= s.values.size()) throw Error("field index out of range");
        set_scalar(i->dst, s.values[i->index]);
      } else if (const auto* i = std::get_if<MakeResult>(&inst)) {
        charge(CostCategory::Instruction, cm.base);
        set_result(i->dst, i->hit ? &i->values : nullptr);
        if (i->origin) shadow(*i->origin, key_of(i->origin_keys), i->hit ? &i->values : nullptr, false);
      } else if (const auto* i = std::get_if<InstrRecord>(&inst)) {
        charge(CostCategory::Instrumentation, cm.instr_coin);
        if (env_.record && env_.record(i->site, key_of(i->keys))) {
          charge(CostCategory::Instrumentation, cm.instr_sample);
        }
      } else if (const auto* i = std::get_if<Branch>(&inst)) {
        charge(CostCategory::Branch, cm.branch);
        const Slot& s = reg(i->cond);
        const bool taken = s.kind == Slot::Kind::Result ? s.hit : s.scalar.bits != 0;
        return taken ? i->then_block : i->else_block;
      } else if (const auto* i = std::get_if<Jump>(&inst)) {
        charge(CostCategory::Instruction, cm.base);
        return i->target;
      } else if (const auto* i = std::get_if<Return>(&inst)) {
        charge(CostCategory::Instruction, cm.base);
        out_.action.verdict = i->verdict;
        return std::nullopt;
      } else if (const auto* i = std::get_if<GuardCheck>(&inst)) {
        charge(CostCategory::Guard, cm.guard);
        const bool alive = !env_.guard_alive || env_.guard_alive(i->guard);
        if (i->guard == 0) out_.specialized = alive;
        if (!alive) out_.guard_fallback = true;
        return alive ? i->ok : i->fallback;
      } else if (const auto* i = std::get_if<Switch>(&inst)) {
        const Key k = key_of(i->keys);
        std::size_t tested = 0;
        BlockId target = i->default_target;
        for (const auto& arm : i->arms) {
          ++tested;
          bool match = true;
          for (std::size_t f = 0; f < k.size() && match; ++f) match = (k[f] & arm.mask[f]) == arm.value[f];
          if (match) {
            target = arm.target;
            break;
          }
        }
        charge(CostCategory::Branch, cm.switch_cost(tested));
        return target;
      }
    }
    throw Error("block '" + blk.label + "' has no terminator");
  }

  void lookup(const TableLookup& i) {
    const Key key = key_of(i.keys);
    std::uint32_t examined = 1;
    if (i.table < env_.tables->size()) {
      const TableState& t = (*env_.tables)[i.table];
      const Record* rec = t.lookup(key, &examined);
      charge(CostCategory::Lookup, env_.cost->lookup(t, examined));
      set_result(i.dst, rec);
      return;
    }
    const SynthTable* s = synth(i.table);
    if (s == nullptr) throw Error("lookup in unknown table #" + std::to_string(i.table));
    const Record* rec = s->state.lookup(key, &examined);
    charge(CostCategory::Lookup, env_.cost->lookup(s->state, examined));
    set_result(i.dst, rec);
    shadow(s->origin, key, rec, s->role == ShadowRole::PositiveOnly);
  }

  void update(const TableUpdate& i) {
    if (i.table >= env_.tables->size()) throw Error("update of a synthesized table");
    charge(CostCategory::Update, env_.cost->update);
    TableState& t = (*env_.tables)[i.table];
    const auto& decl = t.decl();
    TableEntry e;
    e.key = key_of(i.keys);
    if (decl.kind == TableKind::Lpm) e.prefix_len = 32;
    if (decl.kind == TableKind::Wildcard) {
      for (const auto& f : decl.key) e.mask.push_back(width_mask(f.width));
    }
    if (i.values.size() != decl.value.size()) throw Error("update value arity mismatch");
    for (std::size_t v = 0; v < i.values.size(); ++v) {
      e.value.push_back(Value::truncated(decl.value[v].width, scalar(i.values[v]).bits));
    }
    t.mutate(Mutation{MutationOp::Insert, e});
    if (env_.on_update) env_.on_update(i.table);
  }

  const Program& p_;
  ExecEnv& env_;
  std::vector<Slot> regs_;
  ExecResult out_;
};

}  // namespace

ExecResult execute(const Program& p, const Packet& pkt, ExecEnv& env) { return Machine(p, pkt, env).run(); }

}  // namespace morpheus
