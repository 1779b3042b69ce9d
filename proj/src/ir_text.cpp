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

#include "morpheus/ir_text.hpp"

#include <cctype>
#include <map>
#include <sstream>

namespace morpheus {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '[' || c == ']' || c == ',' || c == '(' || c == ')' || c == '=') {
      flush();
      out.emplace_back(1, c);
    } else if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      flush();
      out.emplace_back("->");
      ++i;
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

class LineParser {
 public:
  LineParser(std::vector<std::string> tokens, std::size_t line_no) : toks_(std::move(tokens)), line_(line_no) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("line " + std::to_string(line_) + ": " + msg);
  }
  bool done() const { return pos_ >= toks_.size(); }
  const std::string& peek() const {
    if (done()) fail("unexpected end of line");
    return toks_[pos_];
  }
  std::string next() {
    if (done()) fail("unexpected end of line");
    return toks_[pos_++];
  }
  void expect(std::string_view tok) {
    auto t = next();
    if (t != tok) fail("expected '" + std::string(tok) + "', got '" + t + "'");
  }
  bool accept(std::string_view tok) {
    if (!done() && toks_[pos_] == tok) {
      ++pos_;
      return true;
    }
    return false;
  }
  void end() {
    if (!done()) fail("trailing tokens starting at '" + toks_[pos_] + "'");
  }

  Reg reg() {
    auto t = next();
    if (t.size() < 2 || t[0] != '%') fail("expected register, got '" + t + "'");
    try {
      return static_cast<Reg>(std::stoul(t.substr(1)));
    } catch (const std::exception&) {
      fail("bad register '" + t + "'");
    }
  }
  std::vector<Reg> reg_list() {
    std::vector<Reg> out;
    expect("[");
    if (accept("]")) return out;
    while (true) {
      out.push_back(reg());
      if (accept("]")) break;
      expect(",");
    }
    return out;
  }
  std::uint64_t number() {
    auto t = next();
    try {
      return static_cast<std::uint64_t>(parse_u128(t));
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  SiteId site() {
    auto t = next();
    if (t.size() < 2 || t[0] != '@') fail("expected site '@N', got '" + t + "'");
    try {
      return static_cast<SiteId>(std::stoul(t.substr(1)));
    } catch (const std::exception&) {
      fail("bad site '" + t + "'");
    }
  }
  Value value() {
    auto t = next();
    try {
      return parse_value(t);
    } catch (const Error& e) {
      fail(e.what());
    }
  }

 private:
  std::vector<std::string> toks_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

struct Context {
  const std::map<std::string, BlockId, std::less<>>* labels;
  const Program* program;
};

BlockId resolve_block(const Context& ctx, const std::string& label) {
  auto it = ctx.labels->find(label);
  return it == ctx.labels->end() ? kNoBlock : it->second;
}

TableRef resolve_table(const Context& ctx, LineParser& lp, const std::string& name) {
  auto ref = ctx.program->find_table(name);
  if (!ref) lp.fail("unknown table '" + name + "'");
  return *ref;
}

Field parse_field(LineParser& lp) {
  auto name = lp.next();
  auto f = field_from_name(name);
  if (!f) lp.fail("unknown packet field '" + name + "'");
  return *f;
}

Instruction parse_instruction(const Context& ctx, LineParser& lp) {
  const std::string head = lp.peek();
  if (!head.empty() && head[0] == '%') {
    Reg dst = lp.reg();
    lp.expect("=");
    auto op = lp.next();
    if (op == "load") {
      Field f = parse_field(lp);
      lp.end();
      return LoadField{dst, f};
    }
    if (op == "const") {
      Value v = lp.value();
      lp.end();
      return Const{dst, v};
    }
    if (auto alu = alu_op_from_name(op)) {
      Reg a = lp.reg();
      lp.expect(",");
      Reg b = lp.reg();
      lp.end();
      return Alu{dst, *alu, a, b};
    }
    if (op == "lookup") {
      TableRef t = resolve_table(ctx, lp, lp.next());
      auto keys = lp.reg_list();
      SiteId s = lp.site();
      lp.end();
      return TableLookup{dst, t, std::move(keys), s};
    }
    if (op == "fieldof") {
      Reg r = lp.reg();
      lp.expect(",");
      auto idx = lp.number();
      lp.end();
      return FieldOf{dst, r, static_cast<std::uint32_t>(idx)};
    }
    if (op == "result") {
      MakeResult mr{};
      mr.dst = dst;
      auto kind = lp.next();
      if (kind == "hit") {
        mr.hit = true;
        lp.expect("[");
        if (!lp.accept("]")) {
          while (true) {
            mr.values.push_back(lp.value());
            if (lp.accept("]")) break;
            lp.expect(",");
          }
        }
      } else if (kind != "miss") {
        lp.fail("expected 'hit' or 'miss'");
      }
      if (lp.accept("opaque")) mr.opaque = true;
      if (lp.accept("origin")) {
        mr.origin = resolve_table(ctx, lp, lp.next());
        mr.origin_keys = lp.reg_list();
      }
      lp.end();
      return mr;
    }
    lp.fail("unknown operation '" + op + "'");
  }
  auto op = lp.next();
  if (op == "set") {
    Field f = parse_field(lp);
    lp.expect(",");
    Reg r = lp.reg();
    lp.end();
    return SetField{f, r};
  }
  if (op == "update") {
    TableRef t = resolve_table(ctx, lp, lp.next());
    auto keys = lp.reg_list();
    auto values = lp.reg_list();
    SiteId s = lp.site();
    lp.end();
    return TableUpdate{t, std::move(keys), std::move(values), s};
  }
  if (op == "instr") {
    SiteId s = lp.site();
    auto keys = lp.reg_list();
    lp.end();
    return InstrRecord{s, std::move(keys)};
  }
  if (op == "br") {
    Reg c = lp.reg();
    lp.expect(",");
    auto t = lp.next();
    lp.expect(",");
    auto e = lp.next();
    lp.end();
    return Branch{c, resolve_block(ctx, t), resolve_block(ctx, e)};
  }
  if (op == "jmp") {
    auto t = lp.next();
    lp.end();
    return Jump{resolve_block(ctx, t)};
  }
  if (op == "ret") {
    auto v = lp.next();
    auto verdict = verdict_from_name(v);
    if (!verdict) lp.fail("unknown verdict '" + v + "'");
    lp.end();
    return Return{*verdict};
  }
  if (op == "guard") {
    auto id = lp.number();
    lp.expect(",");
    auto ok = lp.next();
    lp.expect(",");
    auto fb = lp.next();
    lp.end();
    return GuardCheck{static_cast<GuardId>(id), resolve_block(ctx, ok), resolve_block(ctx, fb)};
  }
  if (op == "switch") {
    Switch sw{};
    sw.keys = lp.reg_list();
    lp.expect("default");
    sw.default_target = resolve_block(ctx, lp.next());
    while (!lp.done()) {
      SwitchArm arm{};
      lp.expect("(");
      while (true) {
        auto vm = lp.next();
        auto slash = vm.find('/');
        if (slash == std::string::npos) lp.fail("switch arm needs value/mask, got '" + vm + "'");
        try {
          arm.value.push_back(parse_u128(std::string_view(vm).substr(0, slash)));
          arm.mask.push_back(parse_u128(std::string_view(vm).substr(slash + 1)));
        } catch (const Error& e) {
          lp.fail(e.what());
        }
        if (lp.accept(")")) break;
        lp.expect(",");
      }
      lp.expect("->");
      arm.target = resolve_block(ctx, lp.next());
      sw.arms.push_back(std::move(arm));
    }
    return sw;
  }
  lp.fail("unknown instruction '" + op + "'");
}

std::string strip_comment(std::string_view line) {
  auto pos = line.find(';');
  return std::string(trim(pos == std::string_view::npos ? line : line.substr(0, pos)));
}

std::string reg_name(Reg r) { return "%" + std::to_string(r); }

std::string reg_list(const std::vector<Reg>& regs) {
  std::string out = "[";
  for (std::size_t i = 0; i < regs.size(); ++i) {
    if (i != 0) out += ", ";
    out += reg_name(regs[i]);
  }
  return out + "]";
}

std::string block_name(const Program& p, BlockId b) {
  return b < p.blocks.size() ? p.blocks[b].label : std::string("<unknown>");
}

std::string table_name(const Program& p, TableRef t) {
  return t < p.tables.size() ? p.tables[t].name : std::string("<unknown>");
}

std::string field_list(const std::vector<FieldSpec>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i != 0) out += ",";
    out += fields[i].name + ":" + std::to_string(fields[i].width);
  }
  return out;
}

std::vector<FieldSpec> parse_field_list(std::string_view text) {
  std::vector<FieldSpec> out;
  if (text.empty()) return out;
  for (auto item : split(text, ',')) {
    auto colon = item.find(':');
    if (colon == std::string_view::npos) throw Error("field spec needs name:width, got '" + std::string(item) + "'");
    auto width = static_cast<unsigned>(parse_u128(item.substr(colon + 1)));
    if (!is_valid_width(width)) throw Error("invalid field width in '" + std::string(item) + "'");
    out.push_back(FieldSpec{std::string(item.substr(0, colon)), width});
  }
  return out;
}

}  // namespace

std::string print_table_decl(const TableDecl& decl) {
  std::string out = "table " + decl.name + " kind=" + std::string(table_kind_name(decl.kind)) +
                    " key=" + field_list(decl.key) + " value=" + field_list(decl.value);
  if (decl.capacity != 0) out += " capacity=" + std::to_string(decl.capacity);
  if (!decl.key_mask.empty()) {
    out += " mask=";
    for (std::size_t i = 0; i < decl.key_mask.size(); ++i) {
      if (i != 0) out += ",";
      out += u128_to_string(decl.key_mask[i]);
    }
  }
  return out;
}

TableDecl parse_table_decl(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string word;
  in >> word;
  if (word != "table") throw Error("table declaration must start with 'table'");
  TableDecl decl;
  if (!(in >> decl.name)) throw Error("table declaration needs a name");
  bool have_kind = false;
  while (in >> word) {
    auto eq = word.find('=');
    if (eq == std::string::npos) throw Error("bad table attribute '" + word + "'");
    auto attr = std::string_view(word).substr(0, eq);
    auto val = std::string_view(word).substr(eq + 1);
    if (attr == "kind") {
      auto k = table_kind_from_name(val);
      if (!k) throw Error("unknown table kind '" + std::string(val) + "'");
      decl.kind = *k;
      have_kind = true;
    } else if (attr == "key") {
      decl.key = parse_field_list(val);
    } else if (attr == "value") {
      decl.value = parse_field_list(val);
    } else if (attr == "capacity") {
      decl.capacity = static_cast<std::size_t>(parse_u128(val));
    } else if (attr == "mask") {
      for (auto m : split(val, ',')) decl.key_mask.push_back(parse_u128(m));
    } else {
      throw Error("unknown table attribute '" + std::string(attr) + "'");
    }
  }
  if (!have_kind) throw Error("table '" + decl.name + "' needs kind=");
  if (decl.key.empty()) throw Error("table '" + decl.name + "' needs a key schema");
  if (decl.key.size() > kMaxFields || decl.value.size() > kMaxFields) {
    throw Error("table '" + decl.name + "' has too many fields");
  }
  return decl;
}

Program parse_program(std::string_view text) {
  Program p;
  std::vector<std::pair<std::size_t, std::string>> lines;
  {
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
      ++line_no;
      auto line = strip_comment(raw);
      if (!line.empty()) lines.emplace_back(line_no, std::move(line));
    }
  }

  // First pass: header, tables, and block labels.
  std::map<std::string, BlockId, std::less<>> labels;
  std::string entry_label;
  bool have_header = false;
  for (const auto& [line_no, line] : lines) {
    auto fail = [&, ln = line_no](const std::string& msg) {
      throw Error("line " + std::to_string(ln) + ": " + msg);
    };
    if (line.rfind("program ", 0) == 0) {
      if (have_header) fail("duplicate program header");
      have_header = true;
      std::istringstream in(line);
      std::string word;
      in >> word >> p.name;
      while (in >> word) {
        if (word.rfind("version=", 0) == 0) {
          p.version = static_cast<std::uint64_t>(parse_u128(word.substr(8)));
        } else if (word == "provenance=original") {
          p.provenance = Provenance::Original;
        } else if (word == "provenance=optimized") {
          p.provenance = Provenance::Optimized;
        } else {
          fail("unknown program attribute '" + word + "'");
        }
      }
    } else if (line.rfind("table ", 0) == 0) {
      try {
        p.tables.push_back(parse_table_decl(line));
      } catch (const Error& e) {
        fail(e.what());
      }
    } else if (line.rfind("entry ", 0) == 0) {
      entry_label = std::string(trim(std::string_view(line).substr(6)));
    } else if (line.back() == ':') {
      std::string_view body = trim(std::string_view(line).substr(0, line.size() - 1));
      Block block;
      const std::string_view frozen_tag = "[frozen]";
      if (body.size() > frozen_tag.size() && body.substr(body.size() - frozen_tag.size()) == frozen_tag) {
        block.frozen = true;
        body = trim(body.substr(0, body.size() - frozen_tag.size()));
      }
      block.label = std::string(body);
      if (block.label.empty() || block.label.find(' ') != std::string::npos) fail("bad block label");
      if (labels.count(block.label) != 0) fail("duplicate block label '" + block.label + "'");
      labels.emplace(block.label, static_cast<BlockId>(p.blocks.size()));
      p.blocks.push_back(std::move(block));
    }
  }
  if (!have_header) throw Error("missing 'program <name>' header");

  // Second pass: instructions.
  Context ctx{&labels, &p};
  BlockId current = kNoBlock;
  for (const auto& [line_no, line] : lines) {
    if (line.rfind("program ", 0) == 0 || line.rfind("table ", 0) == 0 || line.rfind("entry ", 0) == 0) continue;
    if (line.back() == ':') {
      ++current;  // blocks were numbered in order of appearance
      continue;
    }
    if (current == kNoBlock) throw Error("line " + std::to_string(line_no) + ": instruction outside a block");
    LineParser lp(tokenize(line), line_no);
    auto inst = parse_instruction(ctx, lp);
    p.blocks[current].code.push_back(std::move(inst));
  }
  if (p.blocks.empty()) throw Error("program has no blocks");
  if (entry_label.empty()) {
    p.entry = 0;
  } else {
    auto it = labels.find(entry_label);
    p.entry = it == labels.end() ? kNoBlock : it->second;
  }
  return p;
}

std::string print_instruction(const Program& p, const Instruction& inst) {
  return std::visit(
      overloaded{
          [](const LoadField& i) { return reg_name(i.dst) + " = load " + std::string(field_name(i.field)); },
          [](const Const& i) { return reg_name(i.dst) + " = const " + to_string(i.value); },
          [](const Alu& i) {
            return reg_name(i.dst) + " = " + std::string(alu_op_name(i.op)) + " " + reg_name(i.lhs) + ", " +
                   reg_name(i.rhs);
          },
          [](const SetField& i) { return "set " + std::string(field_name(i.field)) + ", " + reg_name(i.src); },
          [&p](const TableLookup& i) {
            return reg_name(i.dst) + " = lookup " + table_name(p, i.table) + " " + reg_list(i.keys) + " @" +
                   std::to_string(i.site);
          },
          [&p](const TableUpdate& i) {
            return "update " + table_name(p, i.table) + " " + reg_list(i.keys) + " " + reg_list(i.values) + " @" +
                   std::to_string(i.site);
          },
          [](const FieldOf& i) {
            return reg_name(i.dst) + " = fieldof " + reg_name(i.result) + ", " + std::to_string(i.index);
          },
          [&p](const MakeResult& i) {
            std::string out = reg_name(i.dst) + " = result ";
            if (i.hit) {
              out += "hit [";
              for (std::size_t k = 0; k < i.values.size(); ++k) {
                if (k != 0) out += ", ";
                out += to_string(i.values[k]);
              }
              out += "]";
            } else {
              out += "miss";
            }
            if (i.opaque) out += " opaque";
            if (i.origin) out += " origin " + table_name(p, *i.origin) + " " + reg_list(i.origin_keys);
            return out;
          },
          [](const InstrRecord& i) { return "instr @" + std::to_string(i.site) + " " + reg_list(i.keys); },
          [&p](const Branch& i) {
            return "br " + reg_name(i.cond) + ", " + block_name(p, i.then_block) + ", " + block_name(p, i.else_block);
          },
          [&p](const Jump& i) { return "jmp " + block_name(p, i.target); },
          [](const Return& i) { return "ret " + std::string(verdict_name(i.verdict)); },
          [&p](const GuardCheck& i) {
            return "guard " + std::to_string(i.guard) + ", " + block_name(p, i.ok) + ", " + block_name(p, i.fallback);
          },
          [&p](const Switch& i) {
            std::string out = "switch " + reg_list(i.keys) + " default " + block_name(p, i.default_target);
            for (const auto& arm : i.arms) {
              out += " (";
              for (std::size_t k = 0; k < arm.value.size(); ++k) {
                if (k != 0) out += ", ";
                out += u128_to_string(arm.value[k]) + "/" + u128_to_string(arm.mask[k]);
              }
              out += ") -> " + block_name(p, arm.target);
            }
            return out;
          },
      },
      inst);
}

std::string print_program(const Program& p) {
  std::string out = "program " + p.name + " version=" + std::to_string(p.version) + " provenance=" +
                    (p.provenance == Provenance::Original ? "original" : "optimized") + "\n";
  for (const auto& t : p.tables) out += print_table_decl(t) + "\n";
  out += "entry " + block_name(p, p.entry) + "\n";
  for (const auto& block : p.blocks) {
    out += block.label + (block.frozen ? " [frozen]:\n" : ":\n");
    for (const auto& inst : block.code) out += "  " + print_instruction(p, inst) + "\n";
  }
  return out;
}

}  // namespace morpheus
