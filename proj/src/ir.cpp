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

#include "morpheus/ir.hpp"

#include <algorithm>
#include <array>

namespace morpheus {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::array<std::string_view, 10> kAluNames{"add", "sub", "and", "or", "xor",
                                                     "shl", "shr", "eq",  "ne", "lt"};

}  // namespace

std::string_view table_kind_name(TableKind k) {
  switch (k) {
    case TableKind::Exact:
      return "exact";
    case TableKind::Lpm:
      return "lpm";
    case TableKind::Wildcard:
      break;
  }
  return "wildcard";
}

std::optional<TableKind> table_kind_from_name(std::string_view name) {
  if (name == "exact") return TableKind::Exact;
  if (name == "lpm") return TableKind::Lpm;
  if (name == "wildcard") return TableKind::Wildcard;
  return std::nullopt;
}

std::optional<std::size_t> TableDecl::key_index(std::string_view field) const {
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (key[i].name == field) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> TableDecl::value_index(std::string_view field) const {
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i].name == field) return i;
  }
  return std::nullopt;
}

std::string_view alu_op_name(AluOp op) { return kAluNames[static_cast<std::size_t>(op)]; }

std::optional<AluOp> alu_op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kAluNames.size(); ++i) {
    if (kAluNames[i] == name) return static_cast<AluOp>(i);
  }
  return std::nullopt;
}

Value eval_alu(AluOp op, const Value& lhs, const Value& rhs) {
  const unsigned width = std::max(lhs.width, rhs.width);
  const u128 a = lhs.bits;
  const u128 b = rhs.bits;
  switch (op) {
    case AluOp::Add:
      return Value::truncated(width, a + b);
    case AluOp::Sub:
      return Value::truncated(width, a - b);
    case AluOp::And:
      return Value::truncated(width, a & b);
    case AluOp::Or:
      return Value::truncated(width, a | b);
    case AluOp::Xor:
      return Value::truncated(width, a ^ b);
    case AluOp::Shl:
      return Value::truncated(width, b >= width ? 0 : a << static_cast<unsigned>(b));
    case AluOp::Shr:
      return Value::truncated(width, b >= width ? 0 : a >> static_cast<unsigned>(b));
    case AluOp::Eq:
      return Value{1, a == b ? 1u : 0u};
    case AluOp::Ne:
      return Value{1, a != b ? 1u : 0u};
    case AluOp::Lt:
      return Value{1, a < b ? 1u : 0u};
  }
  return Value{1, 0};
}

bool is_terminator(const Instruction& inst) {
  return std::holds_alternative<Branch>(inst) || std::holds_alternative<Jump>(inst) ||
         std::holds_alternative<Return>(inst) || std::holds_alternative<GuardCheck>(inst) ||
         std::holds_alternative<Switch>(inst);
}

bool is_optimizer_only(const Instruction& inst) {
  return std::holds_alternative<GuardCheck>(inst) || std::holds_alternative<InstrRecord>(inst) ||
         std::holds_alternative<MakeResult>(inst) || std::holds_alternative<Switch>(inst);
}

bool has_side_effects(const Instruction& inst) {
  return std::holds_alternative<SetField>(inst) || std::holds_alternative<TableUpdate>(inst) ||
         std::holds_alternative<InstrRecord>(inst) || is_terminator(inst);
}

std::optional<Reg> defined_reg(const Instruction& inst) {
  return std::visit(overloaded{
                        [](const LoadField& i) -> std::optional<Reg> { return i.dst; },
                        [](const Const& i) -> std::optional<Reg> { return i.dst; },
                        [](const Alu& i) -> std::optional<Reg> { return i.dst; },
                        [](const TableLookup& i) -> std::optional<Reg> { return i.dst; },
                        [](const FieldOf& i) -> std::optional<Reg> { return i.dst; },
                        [](const MakeResult& i) -> std::optional<Reg> { return i.dst; },
                        [](const auto&) -> std::optional<Reg> { return std::nullopt; },
                    },
                    inst);
}

std::vector<Reg> used_regs(const Instruction& inst) {
  return std::visit(overloaded{
                        [](const Alu& i) { return std::vector<Reg>{i.lhs, i.rhs}; },
                        [](const SetField& i) { return std::vector<Reg>{i.src}; },
                        [](const TableLookup& i) { return i.keys; },
                        [](const TableUpdate& i) {
                          std::vector<Reg> out = i.keys;
                          out.insert(out.end(), i.values.begin(), i.values.end());
                          return out;
                        },
                        [](const FieldOf& i) { return std::vector<Reg>{i.result}; },
                        [](const MakeResult& i) { return i.origin_keys; },
                        [](const InstrRecord& i) { return i.keys; },
                        [](const Branch& i) { return std::vector<Reg>{i.cond}; },
                        [](const Switch& i) { return i.keys; },
                        [](const auto&) { return std::vector<Reg>{}; },
                    },
                    inst);
}

std::vector<BlockId> successors(const Instruction& term) {
  std::vector<BlockId> out;
  Instruction copy = term;
  for_each_target(copy, [&out](BlockId& b) { out.push_back(b); });
  return out;
}

std::optional<TableRef> Program::find_table(std::string_view table_name) const {
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (tables[i].name == table_name) return static_cast<TableRef>(i);
  }
  return std::nullopt;
}

std::optional<BlockId> Program::find_block(std::string_view label) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].label == label) return static_cast<BlockId>(i);
  }
  return std::nullopt;
}

Reg Program::register_count() const {
  Reg count = 0;
  for (const auto& block : blocks) {
    for (const auto& inst : block.code) {
      if (auto d = defined_reg(inst)) count = std::max(count, *d + 1);
      for (Reg r : used_regs(inst)) count = std::max(count, r + 1);
    }
  }
  return count;
}

std::size_t static_instruction_count(const Program& p) {
  std::size_t n = 0;
  for (const auto& block : p.blocks) n += block.code.size();
  return n;
}

Program clone_with_version(const Program& p, std::uint64_t new_version, Provenance provenance) {
  if (new_version <= p.version) {
    throw Error("version must increase: " + std::to_string(p.version) + " -> " + std::to_string(new_version));
  }
  Program out = p;
  out.version = new_version;
  out.provenance = provenance;
  return out;
}

std::vector<std::vector<BlockId>> predecessors(const Program& p) {
  std::vector<std::vector<BlockId>> preds(p.blocks.size());
  for (BlockId b = 0; b < p.blocks.size(); ++b) {
    const auto* term = p.blocks[b].terminator();
    if (term == nullptr) continue;
    for (BlockId s : successors(*term)) {
      if (s < p.blocks.size() && std::find(preds[s].begin(), preds[s].end(), b) == preds[s].end()) {
        preds[s].push_back(b);
      }
    }
  }
  return preds;
}

std::optional<std::vector<BlockId>> topological_order(const Program& p) {
  if (p.entry >= p.blocks.size()) return std::vector<BlockId>{};
  // Iterative DFS producing reverse postorder; grey nodes detect cycles.
  enum : std::uint8_t { kWhite, kGrey, kBlack };
  std::vector<std::uint8_t> color(p.blocks.size(), kWhite);
  std::vector<BlockId> postorder;
  std::vector<std::pair<BlockId, std::vector<BlockId>>> stack;
  auto succs_of = [&p](BlockId b) {
    std::vector<BlockId> out;
    if (const auto* term = p.blocks[b].terminator()) {
      for (BlockId s : successors(*term)) {
        if (s < p.blocks.size()) out.push_back(s);
      }
    }
    std::reverse(out.begin(), out.end());
    return out;
  };
  color[p.entry] = kGrey;
  stack.emplace_back(p.entry, succs_of(p.entry));
  while (!stack.empty()) {
    auto& [node, pending] = stack.back();
    if (pending.empty()) {
      color[node] = kBlack;
      postorder.push_back(node);
      stack.pop_back();
      continue;
    }
    BlockId next = pending.back();
    pending.pop_back();
    if (color[next] == kGrey) return std::nullopt;
    if (color[next] == kWhite) {
      color[next] = kGrey;
      stack.emplace_back(next, succs_of(next));
    }
  }
  std::reverse(postorder.begin(), postorder.end());
  return postorder;
}

}  // namespace morpheus
