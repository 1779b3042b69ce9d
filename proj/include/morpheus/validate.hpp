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

#pragma once

#include <string>
#include <vector>

#include "morpheus/ir.hpp"

namespace morpheus {

/// One violated rule. `block` is kNoBlock for program-wide rules (entry,
/// cycles, table schemas); `index` is the instruction position in the block.
struct Diagnostic {
  BlockId block = kNoBlock;
  std::size_t index = 0;
  std::string rule;
  std::string detail;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

std::string to_string(const Diagnostic& d, const Program& p);

/// Rules reported:
///   unknown entry, unknown block, missing terminator, terminator not last,
///   cycle, unknown table, table schema, key arity, value arity,
///   undefined register, register kind, possible miss dereference,
///   field index, switch arity, optimizer-only instruction, duplicate site.
/// Empty result iff the program is well formed.
std::vector<Diagnostic> validate(const Program& p);

}  // namespace morpheus
