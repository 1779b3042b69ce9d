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

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

namespace morpheus {

using u128 = unsigned __int128;

/// Raised for malformed input: bad text, bad rule rows, bad configuration.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<unsigned, 7> kValueWidths{1, 12, 16, 32, 48, 64, 128};

constexpr bool is_valid_width(unsigned width) {
  return std::find(kValueWidths.begin(), kValueWidths.end(), width) != kValueWidths.end();
}

constexpr u128 width_mask(unsigned width) {
  return width >= 128 ? ~u128{0} : ((u128{1} << width) - 1);
}

/// A fixed-width unsigned value. Invariant: bits < 2^width.
struct Value {
  std::uint8_t width = 64;
  u128 bits = 0;

  /// Throws Error when the width is not one of kValueWidths or bits overflow it.
  static Value make(unsigned width, u128 bits);
  /// Masks bits down to the width instead of rejecting.
  static Value truncated(unsigned width, u128 bits);

  friend bool operator==(const Value&, const Value&) = default;
};

/// Fixed-capacity vector used for keys and value records so the interpreter
/// never allocates per lookup.
template <typename T, std::size_t N>
class InlineVec {
 public:
  InlineVec() = default;
  InlineVec(std::initializer_list<T> init) {
    for (const auto& v : init) push_back(v);
  }

  void push_back(const T& v) {
    if (size_ == N) throw Error("inline vector capacity exceeded");
    data_[size_++] = v;
  }
  void clear() { size_ = 0; }
  void resize(std::size_t n) {
    if (n > N) throw Error("inline vector capacity exceeded");
    for (std::size_t i = size_; i < n; ++i) data_[i] = T{};
    size_ = static_cast<std::uint8_t>(n);
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T* begin() { return data_.data(); }
  T* end() { return data_.data() + size_; }
  const T* begin() const { return data_.data(); }
  const T* end() const { return data_.data() + size_; }

  friend bool operator==(const InlineVec& a, const InlineVec& b) {
    return a.size_ == b.size_ && std::equal(a.begin(), a.end(), b.begin());
  }

 private:
  std::array<T, N> data_{};
  std::uint8_t size_ = 0;
};

inline constexpr std::size_t kMaxFields = 8;

/// A lookup key: one unsigned integer per key-schema field.
using Key = InlineVec<u128, kMaxFields>;
/// A table value record: one Value per value-schema field.
using Record = InlineVec<Value, kMaxFields>;

inline bool operator<(const Key& a, const Key& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ k.size();
    for (u128 v : k) {
      for (std::uint64_t half : {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(v >> 64)}) {
        h ^= half + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdULL;
      }
    }
    return static_cast<std::size_t>(h ^ (h >> 33));
  }
};

std::string u128_to_string(u128 v);

/// Accepts decimal, 0x-prefixed hex, dotted IPv4 (a.b.c.d) and colon MAC
/// (aa:bb:cc:dd:ee:ff). Throws Error on anything else.
u128 parse_u128(std::string_view text);

/// Canonical text form "<width>:<decimal>".
std::string to_string(const Value& v);
/// Parses "<width>:<number>".
Value parse_value(std::string_view text);

/// "(a,b,c)"
std::string to_string(const Key& k);

std::string format_ipv4(std::uint32_t addr);

}  // namespace morpheus
