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

// Line-oriented program assembly. The grammar is documented in
// docs/ir-format.md; print_program emits the canonical form and
// parse_program(print_program(p)) == p for every program.

#pragma once

#include <string>
#include <string_view>

#include "morpheus/ir.hpp"

namespace morpheus {

/// Throws Error with a "line N:" prefix on malformed input. Jump targets that
/// name no block resolve to kNoBlock so validate() can report them.
Program parse_program(std::string_view text);

std::string print_program(const Program& p);

std::string print_instruction(const Program& p, const Instruction& inst);

std::string print_table_decl(const TableDecl& decl);
TableDecl parse_table_decl(std::string_view line);

}  // namespace morpheus
