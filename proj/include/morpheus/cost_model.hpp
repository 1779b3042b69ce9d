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

// Abstract per-instruction costs standing in for cycles. All constants are
// configurable; the defaults keep lookups well above inlined comparisons.

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "morpheus/tables.hpp"

namespace morpheus {

enum class CostCategory : std::uint8_t { Instruction, Branch, Lookup, Update, Guard, Instrumentation };
inline constexpr std::size_t kCostCategoryCount = 6;

std::string_view cost_category_name(CostCategory c);

struct CostModel {
  std::uint64_t base = 1;
  std::uint64_t branch = 1;
  std::uint64_t guard = 1;
  std::uint64_t field_of = 2;
  std::uint64_t exact_lookup = 10;
  std::uint64_t lpm_base = 8;
  std::uint64_t lpm_per_length = 3;
  std::uint64_t wildcard_per_entry = 4;
  std::uint64_t update = 12;
  std::uint64_t inline_compare = 2;
  std::uint64_t instr_coin = 1;
  std::uint64_t instr_sample = 1;

  /// Cost of one probe into `t`. `examined` is the wildcard scan length; a
  /// wildcard probe is charged for at least one entry.
  std::uint64_t lookup(const TableState& t, std::uint32_t examined) const;
  /// Switch cost when `tested` arms were compared before a decision.
  std::uint64_t switch_cost(std::size_t tested) const;

  /// Throws Error when a constant is zero or lookups are not dearer than an
  /// inlined comparison.
  void check() const;
};

/// Per-category cost accumulator.
struct CostBreakdown {
  std::array<std::uint64_t, kCostCategoryCount> by_category{};

  void add(CostCategory c, std::uint64_t units) { by_category[static_cast<std::size_t>(c)] += units; }
  std::uint64_t operator[](CostCategory c) const { return by_category[static_cast<std::size_t>(c)]; }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto v : by_category) t += v;
    return t;
  }
  CostBreakdown& operator+=(const CostBreakdown& o) {
    for (std::size_t i = 0; i < kCostCategoryCount; ++i) by_category[i] += o.by_category[i];
    return *this;
  }
};

}  // namespace morpheus
