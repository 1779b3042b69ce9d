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

// Register-based, basic-block IR for packet-processing programs.
//
// A program is a DAG of blocks; each block ends in exactly one terminator.
// Registers are mutable virtual registers (not SSA); a register holds either
// a scalar Value or a lookup result (hit flag plus value record).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "morpheus/packet.hpp"
#include "morpheus/value.hpp"

namespace morpheus {

using Reg = std::uint32_t;
using BlockId = std::uint32_t;
using SiteId = std::uint32_t;
using GuardId = std::uint32_t;
using TableRef = std::uint32_t;  // index into Program::tables

inline constexpr BlockId kNoBlock = 0xffffffffu;

enum class TableKind : std::uint8_t { Exact, Lpm, Wildcard };

std::string_view table_kind_name(TableKind k);
std::optional<TableKind> table_kind_from_name(std::string_view name);

struct FieldSpec {
  std::string name;
  unsigned width = 32;
  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

struct TableDecl {
  std::string name;
  TableKind kind = TableKind::Exact;
  std::vector<FieldSpec> key;
  std::vector<FieldSpec> value;
  /// 0 means unbounded.
  std::size_t capacity = 0;
  /// Exact tables only: per-key-field mask applied before matching. Empty
  /// means full masks.
  std::vector<u128> key_mask;

  std::optional<std::size_t> key_index(std::string_view field) const;
  std::optional<std::size_t> value_index(std::string_view field) const;

  friend bool operator==(const TableDecl&, const TableDecl&) = default;
};

enum class AluOp : std::uint8_t { Add, Sub, And, Or, Xor, Shl, Shr, Eq, Ne, Lt };

std::string_view alu_op_name(AluOp op);
std::optional<AluOp> alu_op_from_name(std::string_view name);
/// Result widths: comparisons yield 1 bit, everything else the wider operand.
Value eval_alu(AluOp op, const Value& lhs, const Value& rhs);

struct LoadField {
  Reg dst;
  Field field;
  friend bool operator==(const LoadField&, const LoadField&) = default;
};

struct Const {
  Reg dst;
  Value value;
  friend bool operator==(const Const&, const Const&) = default;
};

struct Alu {
  Reg dst;
  AluOp op;
  Reg lhs;
  Reg rhs;
  friend bool operator==(const Alu&, const Alu&) = default;
};

struct SetField {
  Field field;
  Reg src;
  friend bool operator==(const SetField&, const SetField&) = default;
};

struct TableLookup {
  Reg dst;
  TableRef table;
  std::vector<Reg> keys;
  SiteId site;
  friend bool operator==(const TableLookup&, const TableLookup&) = default;
};

struct TableUpdate {
  TableRef table;
  std::vector<Reg> keys;
  std::vector<Reg> values;
  SiteId site;
  friend bool operator==(const TableUpdate&, const TableUpdate&) = default;
};

struct FieldOf {
  Reg dst;
  Reg result;
  std::uint32_t index;
  friend bool operator==(const FieldOf&, const FieldOf&) = default;
};

/// Optimizer-only: materializes a lookup result computed at compile time.
/// `opaque` results are never folded by constant propagation (RW fast paths).
/// `origin` names the table whose live lookup the result stands for, so a
/// shadow check can compare against it.
struct MakeResult {
  Reg dst;
  bool hit = false;
  Record values;
  bool opaque = false;
  std::optional<TableRef> origin;
  std::vector<Reg> origin_keys;
  friend bool operator==(const MakeResult&, const MakeResult&) = default;
};

/// Optimizer-only: sampled access recording for one lookup site.
struct InstrRecord {
  SiteId site;
  std::vector<Reg> keys;
  friend bool operator==(const InstrRecord&, const InstrRecord&) = default;
};

struct Branch {
  Reg cond;  // scalar: nonzero; lookup result: hit
  BlockId then_block;
  BlockId else_block;
  friend bool operator==(const Branch&, const Branch&) = default;
};

struct Jump {
  BlockId target;
  friend bool operator==(const Jump&, const Jump&) = default;
};

struct Return {
  Verdict verdict;
  friend bool operator==(const Return&, const Return&) = default;
};

/// Optimizer-only.
struct GuardCheck {
  GuardId guard;
  BlockId ok;
  BlockId fallback;
  friend bool operator==(const GuardCheck&, const GuardCheck&) = default;
};

struct SwitchArm {
  Key value;
  Key mask;
  BlockId target;
  friend bool operator==(const SwitchArm&, const SwitchArm&) = default;
};

/// Optimizer-only: an inlined if/else-if chain. Arms are tested in order; an
/// arm matches when (key[i] & mask[i]) == value[i] for every key register.
struct Switch {
  std::vector<Reg> keys;
  std::vector<SwitchArm> arms;
  BlockId default_target;
  friend bool operator==(const Switch&, const Switch&) = default;
};

using Instruction = std::variant<LoadField, Const, Alu, SetField, TableLookup, TableUpdate, FieldOf, MakeResult,
                                 InstrRecord, Branch, Jump, Return, GuardCheck, Switch>;

bool is_terminator(const Instruction& inst);
bool is_optimizer_only(const Instruction& inst);
/// Instructions that may not be removed even when their result is unused.
bool has_side_effects(const Instruction& inst);
std::optional<Reg> defined_reg(const Instruction& inst);
std::vector<Reg> used_regs(const Instruction& inst);
std::vector<BlockId> successors(const Instruction& term);
/// Applies fn to every block-id slot of a terminator.
template <typename F>
void for_each_target(Instruction& inst, F&& fn) {
  if (auto* b = std::get_if<Branch>(&inst)) {
    fn(b->then_block);
    fn(b->else_block);
  } else if (auto* j = std::get_if<Jump>(&inst)) {
    fn(j->target);
  } else if (auto* g = std::get_if<GuardCheck>(&inst)) {
    fn(g->ok);
    fn(g->fallback);
  } else if (auto* s = std::get_if<Switch>(&inst)) {
    for (auto& arm : s->arms) fn(arm.target);
    fn(s->default_target);
  }
}

struct Block {
  std::string label;
  std::vector<Instruction> code;
  /// Frozen blocks (the original fallback body of an optimized program) are
  /// never touched by optimization passes.
  bool frozen = false;

  const Instruction* terminator() const {
    return code.empty() || !is_terminator(code.back()) ? nullptr : &code.back();
  }
  friend bool operator==(const Block&, const Block&) = default;
};

enum class Provenance : std::uint8_t { Original, Optimized };

struct Program {
  std::string name;
  std::vector<TableDecl> tables;
  std::vector<Block> blocks;
  BlockId entry = 0;
  std::uint64_t version = 0;
  Provenance provenance = Provenance::Original;

  std::optional<TableRef> find_table(std::string_view name) const;
  std::optional<BlockId> find_block(std::string_view label) const;
  /// One past the highest register id mentioned anywhere.
  Reg register_count() const;

  friend bool operator==(const Program&, const Program&) = default;
};

std::size_t static_instruction_count(const Program& p);

/// Structural copy with a strictly larger version. Throws Error otherwise.
Program clone_with_version(const Program& p, std::uint64_t new_version, Provenance provenance);

std::vector<std::vector<BlockId>> predecessors(const Program& p);
/// Blocks reachable from the entry, in topological order. Returns nullopt when
/// a cycle is reachable.
std::optional<std::vector<BlockId>> topological_order(const Program& p);

}  // namespace morpheus
