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

// Cost-accounting interpreter for original and optimized programs.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "morpheus/cost_model.hpp"
#include "morpheus/ir.hpp"
#include "morpheus/optimizer.hpp"
#include "morpheus/tables.hpp"

namespace morpheus {

/// Everything the interpreter needs besides the program and the packet.
/// Table refs below tables.size() name live tables; higher refs name
/// `synthesized` entries (matched by SynthTable::ref).
struct ExecEnv {
  const CostModel* cost = nullptr;
  TableSet* tables = nullptr;
  const std::vector<SynthTable>* synthesized = nullptr;
  /// Whether the guard still holds. Unset: every guard holds.
  std::function<bool(GuardId)> guard_alive;
  /// Called for InstrRecord; returns whether the access was sampled.
  std::function<bool(SiteId, const Key&)> record;
  /// Called after a data-plane write was applied.
  std::function<void(TableRef)> on_update;
  /// Compare every materialized or synthesized result against the live table.
  bool shadow_check = false;
};

struct ExecResult {
  Action action;
  CostBreakdown cost;
  /// Some guard check failed on this packet.
  bool guard_fallback = false;
  /// The program-level guard held (always false for original programs).
  bool specialized = false;
  /// Shadow-check mismatches seen on this packet.
  std::uint32_t stale = 0;
  std::uint32_t instructions = 0;
};

/// Runs one packet from the entry block. Throws Error on an interpreter
/// fault (which validation is meant to exclude).
ExecResult execute(const Program& p, const Packet& pkt, ExecEnv& env);

}  // namespace morpheus
