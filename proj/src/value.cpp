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

#include "morpheus/value.hpp"

#include <cctype>

namespace morpheus {

Value Value::make(unsigned width, u128 bits) {
  if (!is_valid_width(width)) throw Error("invalid value width " + std::to_string(width));
  if ((bits & ~width_mask(width)) != 0) {
    throw Error("value " + u128_to_string(bits) + " does not fit in " + std::to_string(width) + " bits");
  }
  return Value{static_cast<std::uint8_t>(width), bits};
}

Value Value::truncated(unsigned width, u128 bits) {
  if (!is_valid_width(width)) throw Error("invalid value width " + std::to_string(width));
  return Value{static_cast<std::uint8_t>(width), bits & width_mask(width)};
}

std::string u128_to_string(u128 v) {
  if (v == 0) return "0";
  std::string out;
  while (v != 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {

u128 parse_plain(std::string_view text, unsigned base) {
  if (text.empty()) throw Error("empty number");
  u128 out = 0;
  for (char c : text) {
    unsigned digit;
    if (c >= '0' && c <= '9') {
      digit = static_cast<unsigned>(c - '0');
    } else if (base == 16 && std::isxdigit(static_cast<unsigned char>(c))) {
      digit = static_cast<unsigned>(std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
    } else {
      throw Error("bad digit in number '" + std::string(text) + "'");
    }
    if (digit >= base) throw Error("bad digit in number '" + std::string(text) + "'");
    u128 next = out * base + digit;
    if (next / base != out) throw Error("number overflows 128 bits: " + std::string(text));
    out = next;
  }
  return out;
}

template <typename F>
void split_each(std::string_view text, char sep, F&& fn) {
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    fn(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
}

}  // namespace

u128 parse_u128(std::string_view text) {
  if (text.find('.') != std::string_view::npos) {
    u128 out = 0;
    int parts = 0;
    split_each(text, '.', [&](std::string_view octet) {
      u128 v = parse_plain(octet, 10);
      if (v > 255) throw Error("bad IPv4 octet in '" + std::string(text) + "'");
      out = (out << 8) | v;
      ++parts;
    });
    if (parts != 4) throw Error("bad IPv4 address '" + std::string(text) + "'");
    return out;
  }
  if (text.find(':') != std::string_view::npos) {
    u128 out = 0;
    int parts = 0;
    split_each(text, ':', [&](std::string_view byte) {
      if (byte.size() != 2) throw Error("bad MAC address '" + std::string(text) + "'");
      out = (out << 8) | parse_plain(byte, 16);
      ++parts;
    });
    if (parts != 6) throw Error("bad MAC address '" + std::string(text) + "'");
    return out;
  }
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    return parse_plain(text.substr(2), 16);
  }
  return parse_plain(text, 10);
}

std::string to_string(const Value& v) {
  return std::to_string(v.width) + ":" + u128_to_string(v.bits);
}

Value parse_value(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error("value needs '<width>:<number>': " + std::string(text));
  auto width = parse_plain(text.substr(0, colon), 10);
  return Value::make(static_cast<unsigned>(width), parse_u128(text.substr(colon + 1)));
}

std::string to_string(const Key& k) {
  std::string out = "(";
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i != 0) out += ",";
    out += u128_to_string(k[i]);
  }
  return out + ")";
}

std::string format_ipv4(std::uint32_t addr) {
  return std::to_string(addr >> 24) + "." + std::to_string((addr >> 16) & 0xff) + "." +
         std::to_string((addr >> 8) & 0xff) + "." + std::to_string(addr & 0xff);
}

}  // namespace morpheus
