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

#include "morpheus/cost_model.hpp"

#include <algorithm>
#include <array>

namespace morpheus {

std::string_view cost_category_name(CostCategory c) {
  static constexpr std::array<std::string_view, kCostCategoryCount> kNames{
      "instruction", "branch", "lookup", "update", "guard", "instrumentation"};
  return kNames[static_cast<std::size_t>(c)];
}

std::uint64_t CostModel::lookup(const TableState& t, std::uint32_t examined) const {
  switch (t.kind()) {
    case TableKind::Exact:
      return exact_lookup;
    case TableKind::Lpm:
      return lpm_base + lpm_per_length * t.distinct_prefix_lengths();
    case TableKind::Wildcard:
      break;
  }
  return wildcard_per_entry * std::max<std::uint32_t>(1, examined);
}

std::uint64_t CostModel::switch_cost(std::size_t tested) const {
  return std::max<std::uint64_t>(1, inline_compare * tested);
}

void CostModel::check() const {
  for (auto v : {base, branch, guard, field_of, exact_lookup, lpm_base, lpm_per_length, wildcard_per_entry, update,
                 inline_compare, instr_coin, instr_sample}) {
    if (v == 0) throw Error("cost model constants must be at least 1");
  }
  if (std::min({exact_lookup, lpm_base, wildcard_per_entry}) <= inline_compare) {
    throw Error("cost model: lookups must cost more than an inlined comparison");
  }
}

}  // namespace morpheus
