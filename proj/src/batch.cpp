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

#include "morpheus/batch.hpp"

#include <omp.h>

namespace morpheus {

namespace {

constexpr std::size_t kParallelCutoff = 4096;

}  // namespace

BatchLookup lookup_batch_serial(const TableState& table, const std::vector<Key>& keys) {
  BatchLookup out;
  out.values.resize(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::uint32_t examined = 0;
    out.values[i] = table.lookup(keys[i], &examined);
    out.examined += examined;
  }
  return out;
}

BatchLookup lookup_batch_parallel(const TableState& table, const std::vector<Key>& keys) {
  // Exceptions must not escape the parallel region, so check arity up front.
  for (const auto& k : keys) {
    if (k.size() != table.decl().key.size()) throw Error("table " + table.name() + ": key arity mismatch");
  }
  BatchLookup out;
  out.values.resize(keys.size());
  const auto n = static_cast<std::int64_t>(keys.size());
  std::uint64_t examined_total = 0;
  // Lookups only read the table; each index writes its own slot.
#pragma omp parallel for schedule(static) reduction(+ : examined_total)
  for (std::int64_t i = 0; i < n; ++i) {
    std::uint32_t examined = 0;
    out.values[static_cast<std::size_t>(i)] = table.lookup(keys[static_cast<std::size_t>(i)], &examined);
    examined_total += examined;
  }
  out.examined = examined_total;
  return out;
}

BatchLookup lookup_batch(const TableState& table, const std::vector<Key>& keys) {
  if (keys.size() >= kParallelCutoff && omp_get_max_threads() > 1) return lookup_batch_parallel(table, keys);
  return lookup_batch_serial(table, keys);
}

}  // namespace morpheus
