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

#include "morpheus/tables.hpp"

#include <algorithm>

namespace morpheus {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(s.substr(start)));
      break;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string_view rw_mark_name(RwMark m) {
  switch (m) {
    case RwMark::RO:
      return "RO";
    case RwMark::RW:
      return "RW";
    case RwMark::Unknown:
      break;
  }
  return "unknown";
}

std::uint32_t lpm_mask(unsigned len) {
  return len == 0 ? 0u : static_cast<std::uint32_t>(0xffffffffull << (32 - len));
}

TableState::TableState(TableDecl decl) : decl_(std::move(decl)) {
  if (decl_.kind == TableKind::Lpm && (decl_.key.size() != 1 || decl_.key[0].width != 32)) {
    throw Error("table " + decl_.name + ": lpm key must be one 32-bit field");
  }
}

std::size_t TableState::size() const {
  switch (decl_.kind) {
    case TableKind::Exact:
      return exact_.size();
    case TableKind::Lpm: {
      std::size_t n = 0;
      for (const auto& [len, bucket] : lpm_) n += bucket.size();
      return n;
    }
    case TableKind::Wildcard:
      break;
  }
  return wildcard_.size();
}

Key TableState::canonical_key(const Key& key) const {
  if (decl_.key_mask.empty()) return key;
  Key out = key;
  for (std::size_t i = 0; i < out.size() && i < decl_.key_mask.size(); ++i) out[i] &= decl_.key_mask[i];
  return out;
}

void TableState::check_entry(const TableEntry& e, bool need_value) const {
  if (e.key.size() != decl_.key.size()) {
    throw Error("table " + decl_.name + ": key has " + std::to_string(e.key.size()) + " fields, schema has " +
                std::to_string(decl_.key.size()));
  }
  for (std::size_t i = 0; i < e.key.size(); ++i) {
    if (e.key[i] > width_mask(decl_.key[i].width)) {
      throw Error("table " + decl_.name + ": key field " + decl_.key[i].name + " exceeds its width");
    }
  }
  if (decl_.kind == TableKind::Wildcard && e.mask.size() != decl_.key.size()) {
    throw Error("table " + decl_.name + ": wildcard rule needs one mask per key field");
  }
  if (decl_.kind == TableKind::Lpm && e.prefix_len > 32) {
    throw Error("table " + decl_.name + ": prefix length above 32");
  }
  if (!need_value) return;
  if (e.value.size() != decl_.value.size()) {
    throw Error("table " + decl_.name + ": value has " + std::to_string(e.value.size()) + " fields, schema has " +
                std::to_string(decl_.value.size()));
  }
  for (std::size_t i = 0; i < e.value.size(); ++i) {
    if (e.value[i].width != decl_.value[i].width || e.value[i].bits > width_mask(e.value[i].width)) {
      throw Error("table " + decl_.name + ": value field " + decl_.value[i].name + " does not fit its schema");
    }
  }
}

MutationResult TableState::mutate(const Mutation& m) {
  const bool is_delete = m.op == MutationOp::Delete;
  check_entry(m.entry, !is_delete);
  MutationStatus status = MutationStatus::Applied;
  const bool full = decl_.capacity != 0 && size() >= decl_.capacity;
  switch (decl_.kind) {
    case TableKind::Exact: {
      const Key key = canonical_key(m.entry.key);
      auto it = exact_.find(key);
      if (is_delete) {
        if (it == exact_.end()) {
          status = MutationStatus::AbsentKey;
        } else {
          exact_.erase(it);
        }
      } else if (it != exact_.end()) {
        it->second = m.entry.value;
      } else if (full) {
        status = MutationStatus::CapacityFull;
      } else {
        exact_.emplace(key, m.entry.value);
      }
      break;
    }
    case TableKind::Lpm: {
      const unsigned len = m.entry.prefix_len;
      const auto prefix = static_cast<std::uint32_t>(m.entry.key[0]) & lpm_mask(len);
      auto bucket = lpm_.find(len);
      const bool present = bucket != lpm_.end() && bucket->second.count(prefix) != 0;
      if (is_delete) {
        if (!present) {
          status = MutationStatus::AbsentKey;
        } else {
          bucket->second.erase(prefix);
          if (bucket->second.empty()) lpm_.erase(bucket);
        }
      } else if (!present && full) {
        status = MutationStatus::CapacityFull;
      } else {
        lpm_[len][prefix] = m.entry.value;
      }
      break;
    }
    case TableKind::Wildcard: {
      TableEntry rule = m.entry;
      for (std::size_t i = 0; i < rule.key.size(); ++i) rule.key[i] &= rule.mask[i];
      auto same = std::find_if(wildcard_.begin(), wildcard_.end(), [&rule](const TableEntry& e) {
        return e.priority == rule.priority && e.key == rule.key && e.mask == rule.mask;
      });
      if (is_delete) {
        if (same == wildcard_.end()) {
          status = MutationStatus::AbsentKey;
        } else {
          wildcard_.erase(same);
        }
      } else if (same != wildcard_.end()) {
        same->value = rule.value;
      } else if (full) {
        status = MutationStatus::CapacityFull;
      } else {
        auto pos = std::upper_bound(wildcard_.begin(), wildcard_.end(), rule.priority,
                                    [](std::uint32_t prio, const TableEntry& e) { return prio < e.priority; });
        wildcard_.insert(pos, std::move(rule));
      }
      break;
    }
  }
  ++generation_;
  return MutationResult{generation_, status};
}

const Record* TableState::exact_lookup(const Key& key) const {
  if (decl_.kind != TableKind::Exact) throw Error("table " + decl_.name + " is not an exact table");
  if (key.size() != decl_.key.size()) throw Error("table " + decl_.name + ": key arity mismatch");
  auto it = exact_.find(canonical_key(key));
  return it == exact_.end() ? nullptr : &it->second;
}

const Record* TableState::lpm_lookup(std::uint32_t addr) const {
  if (decl_.kind != TableKind::Lpm) throw Error("table " + decl_.name + " is not an lpm table");
  for (const auto& [len, bucket] : lpm_) {
    auto it = bucket.find(addr & lpm_mask(len));
    if (it != bucket.end()) return &it->second;
  }
  return nullptr;
}

WildcardMatch TableState::wildcard_lookup(const Key& fields) const {
  if (decl_.kind != TableKind::Wildcard) throw Error("table " + decl_.name + " is not a wildcard table");
  if (fields.size() != decl_.key.size()) throw Error("table " + decl_.name + ": key arity mismatch");
  WildcardMatch out;
  for (const auto& rule : wildcard_) {
    ++out.examined;
    bool match = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if ((fields[i] & rule.mask[i]) != rule.key[i]) {
        match = false;
        break;
      }
    }
    if (match) {
      out.entry = &rule;
      return out;
    }
  }
  return out;
}

const Record* TableState::lookup(const Key& key, std::uint32_t* examined) const {
  if (examined != nullptr) *examined = 1;
  switch (decl_.kind) {
    case TableKind::Exact:
      return exact_lookup(key);
    case TableKind::Lpm:
      if (key.size() != 1) throw Error("table " + decl_.name + ": key arity mismatch");
      return lpm_lookup(static_cast<std::uint32_t>(key[0]));
    case TableKind::Wildcard:
      break;
  }
  auto m = wildcard_lookup(key);
  if (examined != nullptr) *examined = m.examined;
  return m.entry == nullptr ? nullptr : &m.entry->value;
}

std::vector<TableEntry> TableState::entries() const {
  std::vector<TableEntry> out;
  switch (decl_.kind) {
    case TableKind::Exact: {
      out.reserve(exact_.size());
      for (const auto& [key, value] : exact_) out.push_back(TableEntry{key, {}, 0, 0, value});
      std::sort(out.begin(), out.end(), [](const TableEntry& a, const TableEntry& b) { return a.key < b.key; });
      break;
    }
    case TableKind::Lpm: {
      for (const auto& [len, bucket] : lpm_) {
        const std::size_t first = out.size();
        for (const auto& [prefix, value] : bucket) out.push_back(TableEntry{Key{prefix}, {}, len, 0, value});
        std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                  [](const TableEntry& a, const TableEntry& b) { return a.key < b.key; });
      }
      break;
    }
    case TableKind::Wildcard:
      out = wildcard_;
      break;
  }
  return out;
}

FieldDomain TableState::field_domain(std::string_view field) const {
  FieldDomain dom;
  const auto all = entries();
  if (auto vi = decl_.value_index(field)) {
    dom.width = decl_.value[*vi].width;
    for (const auto& e : all) dom.values.insert(e.value[*vi].bits);
    return dom;
  }
  auto ki = decl_.key_index(field);
  if (!ki) throw Error("table " + decl_.name + " has no field '" + std::string(field) + "'");
  dom.width = decl_.key[*ki].width;
  for (const auto& e : all) {
    dom.values.insert(e.key[*ki]);
    if (decl_.kind == TableKind::Wildcard && e.mask[*ki] != width_mask(dom.width)) dom.fully_specified = false;
    if (decl_.kind == TableKind::Lpm && e.prefix_len != 32) dom.fully_specified = false;
  }
  if (decl_.kind == TableKind::Exact && !decl_.key_mask.empty() && decl_.key_mask[*ki] != width_mask(dom.width)) {
    dom.fully_specified = false;
  }
  return dom;
}

std::optional<unsigned> TableState::uniform_prefix_length() const {
  if (decl_.kind != TableKind::Lpm || lpm_.size() != 1) return std::nullopt;
  return lpm_.begin()->first;
}

TableSet make_tables(const Program& p) {
  TableSet out;
  out.reserve(p.tables.size());
  for (const auto& decl : p.tables) out.emplace_back(decl);
  return out;
}

std::vector<TableEntry> parse_rules(const TableDecl& decl, std::string_view text) {
  std::vector<TableEntry> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    try {
      auto cells = split(line, ',');
      TableEntry e;
      std::size_t first_value = 0;
      switch (decl.kind) {
        case TableKind::Exact:
          if (cells.size() != decl.key.size() + decl.value.size()) throw Error("wrong column count");
          for (std::size_t i = 0; i < decl.key.size(); ++i) e.key.push_back(parse_u128(cells[i]));
          first_value = decl.key.size();
          break;
        case TableKind::Lpm: {
          if (cells.size() != 1 + decl.value.size()) throw Error("wrong column count");
          auto slash = cells[0].find('/');
          if (slash == std::string_view::npos) throw Error("lpm key needs prefix/len");
          e.key.push_back(parse_u128(cells[0].substr(0, slash)));
          e.prefix_len = static_cast<unsigned>(parse_u128(cells[0].substr(slash + 1)));
          first_value = 1;
          break;
        }
        case TableKind::Wildcard: {
          if (cells.size() != 2 + decl.value.size()) throw Error("wrong column count");
          e.priority = static_cast<std::uint32_t>(parse_u128(cells[0]));
          e.key.resize(decl.key.size());
          e.mask.resize(decl.key.size());
          if (!cells[1].empty()) {
            for (auto term : split(cells[1], ';')) {
              auto eq = term.find('=');
              auto slash = term.find('/');
              if (eq == std::string_view::npos || slash == std::string_view::npos || slash < eq) {
                throw Error("wildcard term needs field=value/mask");
              }
              auto ki = decl.key_index(trim(term.substr(0, eq)));
              if (!ki) throw Error("unknown key field '" + std::string(term.substr(0, eq)) + "'");
              e.key[*ki] = parse_u128(term.substr(eq + 1, slash - eq - 1));
              e.mask[*ki] = parse_u128(term.substr(slash + 1));
            }
          }
          first_value = 2;
          break;
        }
      }
      for (std::size_t i = 0; i < decl.value.size(); ++i) {
        e.value.push_back(Value::make(decl.value[i].width, parse_u128(cells[first_value + i])));
      }
      out.push_back(std::move(e));
    } catch (const Error& err) {
      throw Error(decl.name + " rules line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return out;
}

std::string format_rules(const TableState& t) {
  const auto& decl = t.decl();
  std::string out;
  for (const auto& e : t.entries()) {
    std::string row;
    switch (decl.kind) {
      case TableKind::Exact:
        for (std::size_t i = 0; i < e.key.size(); ++i) row += (i ? "," : "") + u128_to_string(e.key[i]);
        break;
      case TableKind::Lpm:
        row = format_ipv4(static_cast<std::uint32_t>(e.key[0])) + "/" + std::to_string(e.prefix_len);
        break;
      case TableKind::Wildcard: {
        row = std::to_string(e.priority) + ",";
        bool first = true;
        for (std::size_t i = 0; i < e.key.size(); ++i) {
          if (e.mask[i] == 0) continue;
          row += (first ? "" : ";") + decl.key[i].name + "=" + u128_to_string(e.key[i]) + "/" +
                 u128_to_string(e.mask[i]);
          first = false;
        }
        break;
      }
    }
    for (const auto& v : e.value) row += "," + u128_to_string(v.bits);
    out += row + "\n";
  }
  return out;
}

}  // namespace morpheus
