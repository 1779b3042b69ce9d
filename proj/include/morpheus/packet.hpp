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

#include <cstdint>
#include <optional>
#include <string_view>

#include "morpheus/value.hpp"

namespace morpheus {

enum class Proto : std::uint8_t { Tcp, Udp, Other };

/// IANA protocol numbers for TCP/UDP; OTHER is carried as 0.
inline constexpr u128 kProtoTcp = 6;
inline constexpr u128 kProtoUdp = 17;
inline constexpr u128 kProtoOther = 0;

enum class Field : std::uint8_t { Proto, SrcIp, DstIp, SrcPort, DstPort, SrcMac, DstMac, Vlan, PayloadLen };
inline constexpr std::size_t kFieldCount = 9;

unsigned field_width(Field f);
std::string_view field_name(Field f);
std::optional<Field> field_from_name(std::string_view name);

u128 proto_number(Proto p);
/// 6 -> TCP, 17 -> UDP, anything else -> OTHER.
Proto proto_from_number(u128 n);

/// Pre-parsed header record. There are no raw packet buffers anywhere.
struct Packet {
  Proto proto = Proto::Tcp;
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint64_t src_mac = 0;  // 48 bits
  std::uint64_t dst_mac = 0;  // 48 bits
  std::uint16_t vlan = 0;     // 12 bits
  std::uint16_t payload_len = 0;

  friend bool operator==(const Packet&, const Packet&) = default;
};

Value get_field(const Packet& pkt, Field f);
/// Truncates to the field width; proto is normalized through proto_from_number.
void set_field(Packet& pkt, Field f, const Value& v);
bool well_formed(const Packet& pkt);
/// RSS-style flow hash over the 5-tuple; used to pin flows to logical workers.
std::uint64_t flow_hash(const Packet& pkt);

enum class Verdict : std::uint8_t { Drop, Tx, Pass };

std::string_view verdict_name(Verdict v);
std::optional<Verdict> verdict_from_name(std::string_view name);

struct Action {
  Verdict verdict = Verdict::Drop;
  Packet packet;

  /// Dropped packets compare by verdict only; TX/PASS also compare the packet.
  friend bool operator==(const Action& a, const Action& b) {
    return a.verdict == b.verdict && (a.verdict == Verdict::Drop || a.packet == b.packet);
  }
};

}  // namespace morpheus
