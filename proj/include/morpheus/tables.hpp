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

// Match-action tables with reference lookup semantics.
//
// Exact tables hash the (optionally masked) key. LPM tables keep one bucket per
// prefix length and probe from the longest. Wildcard tables are a linear scan
// in priority order; lower priority numbers win and ties go to the earlier
// insertion.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "morpheus/ir.hpp"

namespace morpheus {

enum class RwMark : std::uint8_t { Unknown, RO, RW };

std::string_view rw_mark_name(RwMark m);

/// One table row. Which members matter depends on the table kind:
///   exact:    key
///   lpm:      key[0] is the prefix, prefix_len its length
///   wildcard: key/mask per field, priority
struct TableEntry {
  Key key;
  Key mask;
  unsigned prefix_len = 0;
  std::uint32_t priority = 0;
  Record value;

  friend bool operator==(const TableEntry&, const TableEntry&) = default;
};

enum class MutationOp : std::uint8_t { Insert, Update, Delete };

struct Mutation {
  MutationOp op = MutationOp::Insert;
  TableEntry entry;
};

enum class MutationStatus : std::uint8_t { Applied, AbsentKey, CapacityFull };

struct MutationResult {
  std::uint64_t generation = 0;
  MutationStatus status = MutationStatus::Applied;
};

struct WildcardMatch {
  const TableEntry* entry = nullptr;  // nullptr on miss
  std::uint32_t examined = 0;
};

struct FieldDomain {
  unsigned width = 0;
  std::set<u128> values;
  /// Wildcard key fields: every rule masks the field fully. LPM key: every
  /// prefix is /32. Always true for exact keys and value fields.
  bool fully_specified = true;

  bool constant() const { return values.size() == 1; }
};

class TableState {
 public:
  explicit TableState(TableDecl decl);

  const TableDecl& decl() const { return decl_; }
  const std::string& name() const { return decl_.name; }
  TableKind kind() const { return decl_.kind; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::uint64_t generation() const { return generation_; }

  RwMark rw_mark = RwMark::Unknown;
  bool instrumentation_enabled = true;

  /// Schema-checked. Insert and Update both upsert; Delete of an absent key is
  /// a no-op reported as AbsentKey. Inserting a new key into a full table is
  /// dropped and reported as CapacityFull. The generation is bumped exactly
  /// once in every case.
  MutationResult mutate(const Mutation& m);

  /// Throws Error unless kind is Exact and the key has the schema arity.
  const Record* exact_lookup(const Key& key) const;
  const Record* lpm_lookup(std::uint32_t addr) const;
  /// Also returns the matched entry's priority through `entry`.
  WildcardMatch wildcard_lookup(const Key& fields) const;

  /// Kind-dispatching lookup used by the interpreter; `examined` receives the
  /// wildcard scan length (1 for the other kinds).
  const Record* lookup(const Key& key, std::uint32_t* examined = nullptr) const;

  /// Entries in a deterministic order: exact by key, lpm by (length desc,
  /// prefix), wildcard by priority then insertion.
  std::vector<TableEntry> entries() const;

  FieldDomain field_domain(std::string_view field) const;
  std::optional<unsigned> uniform_prefix_length() const;
  std::size_t distinct_prefix_lengths() const { return lpm_.size(); }

 private:
  Key canonical_key(const Key& key) const;
  void check_entry(const TableEntry& e, bool need_value) const;

  TableDecl decl_;
  std::uint64_t generation_ = 0;
  std::unordered_map<Key, Record, KeyHash> exact_;
  // Prefix length -> (masked prefix -> value); iterated longest first.
  std::map<unsigned, std::unordered_map<std::uint32_t, Record>, std::greater<>> lpm_;
  std::vector<TableEntry> wildcard_;
};

/// Tables of one program, indexed by TableRef.
using TableSet = std::vector<TableState>;

TableSet make_tables(const Program& p);

std::uint32_t lpm_mask(unsigned len);

/// Rule files, one row per entry:
///   exact:    key...,value...
///   lpm:      prefix/len,value...
///   wildcard: prio,field=value/mask;...,value...
/// Numbers accept decimal, 0x hex, dotted IPv4 and colon MAC forms. Blank
/// lines and lines starting with '#' are skipped. Throws Error with the line
/// number on malformed rows.
std::vector<TableEntry> parse_rules(const TableDecl& decl, std::string_view text);
std::string format_rules(const TableState& t);

}  // namespace morpheus
