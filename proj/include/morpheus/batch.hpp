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

// Bulk reference lookups. The optimizer uses them to pre-compute inlined and
// synthesized table contents; tests use them as oracles over large key sweeps.
// The parallel kernel splits the key range across OpenMP threads and must
// produce exactly what the serial one does.

#pragma once

#include <cstdint>
#include <vector>

#include "morpheus/tables.hpp"

namespace morpheus {

struct BatchLookup {
  std::vector<const Record*> values;  // nullptr for a miss
  std::uint64_t examined = 0;         // summed wildcard scan length
};

BatchLookup lookup_batch_serial(const TableState& table, const std::vector<Key>& keys);
BatchLookup lookup_batch_parallel(const TableState& table, const std::vector<Key>& keys);

/// Picks the parallel kernel above a size cut-off.
BatchLookup lookup_batch(const TableState& table, const std::vector<Key>& keys);

}  // namespace morpheus
