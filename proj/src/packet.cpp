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

#include "morpheus/packet.hpp"

#include <array>

namespace morpheus {

namespace {

struct FieldInfo {
  std::string_view name;
  unsigned width;
};

constexpr std::array<FieldInfo, kFieldCount> kFields{{
    {"proto", 16},
    {"src_ip", 32},
    {"dst_ip", 32},
    {"src_port", 16},
    {"dst_port", 16},
    {"src_mac", 48},
    {"dst_mac", 48},
    {"vlan", 12},
    {"payload_len", 16},
}};

}  // namespace

unsigned field_width(Field f) { return kFields[static_cast<std::size_t>(f)].width; }

std::string_view field_name(Field f) { return kFields[static_cast<std::size_t>(f)].name; }

std::optional<Field> field_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFields.size(); ++i) {
    if (kFields[i].name == name) return static_cast<Field>(i);
  }
  return std::nullopt;
}

u128 proto_number(Proto p) {
  switch (p) {
    case Proto::Tcp:
      return kProtoTcp;
    case Proto::Udp:
      return kProtoUdp;
    case Proto::Other:
      break;
  }
  return kProtoOther;
}

Proto proto_from_number(u128 n) {
  if (n == kProtoTcp) return Proto::Tcp;
  if (n == kProtoUdp) return Proto::Udp;
  return Proto::Other;
}

Value get_field(const Packet& pkt, Field f) {
  u128 bits = 0;
  switch (f) {
    case Field::Proto:
      bits = proto_number(pkt.proto);
      break;
    case Field::SrcIp:
      bits = pkt.src_ip;
      break;
    case Field::DstIp:
      bits = pkt.dst_ip;
      break;
    case Field::SrcPort:
      bits = pkt.src_port;
      break;
    case Field::DstPort:
      bits = pkt.dst_port;
      break;
    case Field::SrcMac:
      bits = pkt.src_mac;
      break;
    case Field::DstMac:
      bits = pkt.dst_mac;
      break;
    case Field::Vlan:
      bits = pkt.vlan;
      break;
    case Field::PayloadLen:
      bits = pkt.payload_len;
      break;
  }
  return Value{static_cast<std::uint8_t>(field_width(f)), bits};
}

void set_field(Packet& pkt, Field f, const Value& v) {
  const u128 bits = v.bits & width_mask(field_width(f));
  switch (f) {
    case Field::Proto:
      pkt.proto = proto_from_number(bits);
      break;
    case Field::SrcIp:
      pkt.src_ip = static_cast<std::uint32_t>(bits);
      break;
    case Field::DstIp:
      pkt.dst_ip = static_cast<std::uint32_t>(bits);
      break;
    case Field::SrcPort:
      pkt.src_port = static_cast<std::uint16_t>(bits);
      break;
    case Field::DstPort:
      pkt.dst_port = static_cast<std::uint16_t>(bits);
      break;
    case Field::SrcMac:
      pkt.src_mac = static_cast<std::uint64_t>(bits);
      break;
    case Field::DstMac:
      pkt.dst_mac = static_cast<std::uint64_t>(bits);
      break;
    case Field::Vlan:
      pkt.vlan = static_cast<std::uint16_t>(bits);
      break;
    case Field::PayloadLen:
      pkt.payload_len = static_cast<std::uint16_t>(bits);
      break;
  }
}

bool well_formed(const Packet& pkt) {
  return pkt.src_mac < (std::uint64_t{1} << 48) && pkt.dst_mac < (std::uint64_t{1} << 48) && pkt.vlan < 4096;
}

std::uint64_t flow_hash(const Packet& pkt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  };
  mix(static_cast<std::uint64_t>(proto_number(pkt.proto)));
  mix(pkt.src_ip);
  mix(pkt.dst_ip);
  mix(pkt.src_port);
  mix(pkt.dst_port);
  return h;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Drop:
      return "drop";
    case Verdict::Tx:
      return "tx";
    case Verdict::Pass:
      break;
  }
  return "pass";
}

std::optional<Verdict> verdict_from_name(std::string_view name) {
  if (name == "drop") return Verdict::Drop;
  if (name == "tx") return Verdict::Tx;
  if (name == "pass") return Verdict::Pass;
  return std::nullopt;
}

}  // namespace morpheus
