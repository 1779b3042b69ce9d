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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "morpheus/workload.hpp"

namespace morpheus {

namespace {

using Rng = std::mt19937_64;

std::uint64_t below(Rng& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>((static_cast<u128>(rng()) * bound) >> 64);
}

double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

std::uint32_t host_in(Rng& rng, std::uint32_t prefix, unsigned len) {
  if (len >= 32) return prefix;
  const std::uint32_t host_bits = len == 0 ? 0xffffffffu : (0xffffffffu >> len);
  std::uint32_t host = 0;
  while (host == 0 || host == host_bits) host = static_cast<std::uint32_t>(rng()) & host_bits;
  return (prefix & ~host_bits) | host;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[below(rng, v.size())];
}

using FlowKey = std::tuple<Proto, std::uint32_t, std::uint32_t, std::uint16_t, std::uint16_t>;

FlowKey flow_key(const Packet& p) { return {p.proto, p.src_ip, p.dst_ip, p.src_port, p.dst_port}; }

std::vector<std::uint64_t> flow_counts(const std::vector<Packet>& trace) {
  std::map<FlowKey, std::uint64_t> counts;
  for (const auto& p : trace) ++counts[flow_key(p)];
  std::vector<std::uint64_t> out;
  out.reserve(counts.size());
  for (const auto& [k, c] : counts) out.push_back(c);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::string mac_text(std::uint64_t mac) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (int b = 5; b >= 0; --b) {
    const auto byte = static_cast<unsigned>((mac >> (8 * b)) & 0xff);
    out += hex[byte >> 4];
    out += hex[byte & 15];
    if (b != 0) out += ':';
  }
  return out;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    out.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename F>
void for_each_line(std::string_view text, F&& fn) {
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    fn(line_no, line);
  }
}

}  // namespace

std::string_view locality_name(Locality l) {
  switch (l) {
    case Locality::High:
      return "high";
    case Locality::Low:
      return "low";
    case Locality::None:
      return "none";
  }
  return "?";
}

std::optional<Locality> locality_from_name(std::string_view name) {
  for (auto l : {Locality::High, Locality::Low, Locality::None}) {
    if (locality_name(l) == name) return l;
  }
  return std::nullopt;
}

LocalityProfile locality_profile(Locality l, std::size_t flows) {
  LocalityProfile p;
  p.kind = l;
  p.flows = flows;
  switch (l) {
    case Locality::High:
      p.hot_flows = 5;
      p.hot_share = 0.95;
      break;
    case Locality::Low:
      p.hot_flows = 50;
      p.hot_share = 0.95;
      break;
    case Locality::None:
      break;
  }
  return p;
}

std::uint64_t host_mac(std::uint32_t ip) { return 0x020000000000ULL | ip; }

std::vector<Packet> gen_flows(const FlowSpace& space, std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xf10);
  std::set<FlowKey> seen;
  std::vector<Packet> flows;
  flows.reserve(count);
  std::size_t attempts = 0;
  while (flows.size() < count) {
    if (++attempts > count * 64 + 1024) throw Error("flow space too small for the requested flow count");
    Packet p;
    p.src_ip = space.src_hosts.empty() ? host_in(rng, space.src_prefix, space.src_len) : pick(rng, space.src_hosts);
    Service svc;
    if (!space.endpoints.empty()) {
      const auto& ep = pick(rng, space.endpoints);
      p.dst_ip = ep.first;
      svc = ep.second;
    } else {
      p.dst_ip =
          space.dst_hosts.empty() ? host_in(rng, space.dst_prefix, space.dst_len) : pick(rng, space.dst_hosts);
      svc = space.services.empty() ? Service{} : pick(rng, space.services);
    }
    p.proto = proto_from_number(svc.proto);
    p.dst_port = svc.port;
    p.src_port = static_cast<std::uint16_t>(1024 + below(rng, 65536 - 1024));
    p.src_mac = host_mac(p.src_ip);
    p.dst_mac = host_mac(p.dst_ip);
    p.vlan = space.vlans.empty() ? 0 : pick(rng, space.vlans);
    p.payload_len =
        static_cast<std::uint16_t>(space.min_len + below(rng, static_cast<std::uint64_t>(space.max_len) - space.min_len + 1));
    if (!seen.insert(flow_key(p)).second) continue;
    flows.push_back(p);
  }
  return flows;
}

std::vector<Packet> gen_trace(const LocalityProfile& profile, std::size_t n, std::uint64_t seed,
                              const FlowSpace& space) {
  if (profile.flows == 0) throw Error("a trace needs at least one flow");
  if (profile.hot_flows > profile.flows) throw Error("more hot flows than flows");
  const auto flows = gen_flows(space, profile.flows, seed);
  std::vector<double> cumulative(profile.flows);
  const std::size_t cold = profile.flows - profile.hot_flows;
  const double hot_w = profile.hot_flows == 0 ? 0.0 : profile.hot_share / static_cast<double>(profile.hot_flows);
  const double cold_w = cold == 0 ? 0.0
                                  : (profile.hot_flows == 0 ? 1.0 : 1.0 - profile.hot_share) /
                                        static_cast<double>(cold);
  double acc = 0;
  for (std::size_t i = 0; i < profile.flows; ++i) {
    acc += i < profile.hot_flows ? hot_w : cold_w;
    cumulative[i] = acc;
  }
  Rng rng = make_rng(seed, 0x7ace);
  std::vector<Packet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = unit(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), profile.flows - 1);
    out.push_back(flows[idx]);
  }
  return out;
}

std::vector<Packet> gen_trace(Locality l, std::size_t n, std::uint64_t seed, const FlowSpace& space) {
  return gen_trace(locality_profile(l), n, seed, space);
}

double top_flow_share(const std::vector<Packet>& trace, std::size_t k) {
  if (trace.empty()) return 0.0;
  const auto counts = flow_counts(trace);
  std::uint64_t top = 0;
  for (std::size_t i = 0; i < k && i < counts.size(); ++i) top += counts[i];
  return static_cast<double>(top) / static_cast<double>(trace.size());
}

std::size_t distinct_flows(const std::vector<Packet>& trace) { return flow_counts(trace).size(); }

double max_flow_share(const std::vector<Packet>& trace) { return top_flow_share(trace, 1); }

SegmentedTrace dynamic_schedule(const std::vector<Segment>& segments, const FlowSpace& space) {
  SegmentedTrace out;
  for (const auto& s : segments) {
    out.boundaries.push_back(out.packets.size());
    auto part = gen_trace(s.profile, s.packets, s.seed, space);
    out.packets.insert(out.packets.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<Segment> adaptation_schedule(std::size_t unit_packets, std::uint64_t seed) {
  return {
      {Locality::None, 5 * unit_packets, seed},
      {Locality::High, 5 * unit_packets, seed + 1},
      {Locality::High, 10 * unit_packets, seed + 2},
      {Locality::Low, 5 * unit_packets, seed + 3},
  };
}

std::vector<Segment> parse_schedule(std::string_view text, std::uint64_t default_seed) {
  std::vector<Segment> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto cells = split_csv(line);
    auto fail = [&](const std::string& msg) { throw Error("schedule line " + std::to_string(line_no) + ": " + msg); };
    if (cells.size() < 2 || cells.size() > 3) fail("expected profile,packets[,seed]");
    Segment s;
    auto l = locality_from_name(cells[0]);
    if (!l) fail("unknown profile '" + std::string(cells[0]) + "'");
    s.profile = *l;
    try {
      s.packets = static_cast<std::size_t>(parse_u128(cells[1]));
      s.seed = cells.size() == 3 ? static_cast<std::uint64_t>(parse_u128(cells[2])) : default_seed + out.size();
    } catch (const Error& e) {
      fail(e.what());
    }
    out.push_back(s);
  });
  return out;
}

std::string format_schedule(const std::vector<Segment>& segments) {
  std::string out = "# profile,packets,seed\n";
  for (const auto& s : segments) {
    out += std::string(locality_name(s.profile)) + "," + std::to_string(s.packets) + "," + std::to_string(s.seed) +
           "\n";
  }
  return out;
}

TableDecl acl_decl(std::string name) {
  TableDecl d;
  d.name = std::move(name);
  d.kind = TableKind::Wildcard;
  d.key = {{"src_ip", 32}, {"dst_ip", 32}, {"src_port", 16}, {"dst_port", 16}, {"proto", 16}};
  d.value = {{"action", 1}};
  return d;
}

std::vector<TableEntry> rulegen_wildcard(std::size_t n, double exact_fraction, std::uint64_t seed, bool tcp_only) {
  if (!(exact_fraction >= 0.0 && exact_fraction <= 1.0)) throw Error("exact fraction must lie in [0,1]");
  Rng rng = make_rng(seed, 0xac1);
  const auto exact_count = static_cast<std::size_t>(std::llround(static_cast<double>(n) * exact_fraction));
  std::vector<bool> exact(n, false);
  for (std::size_t i = 0; i < exact_count; ++i) exact[i] = true;
  std::shuffle(exact.begin(), exact.end(), rng);

  const std::vector<Service> services = tcp_only ? std::vector<Service>{{kProtoTcp, 80}, {kProtoTcp, 443},
                                                                          {kProtoTcp, 22}, {kProtoTcp, 8080}}
                                                 : std::vector<Service>{{kProtoTcp, 80}, {kProtoTcp, 443},
                                                                        {kProtoUdp, 53}, {kProtoTcp, 22},
                                                                        {kProtoTcp, 8080}};
  const u128 f32 = width_mask(32);
  const u128 f16 = width_mask(16);
  std::vector<TableEntry> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TableEntry e;
    e.priority = static_cast<std::uint32_t>(10 + i);
    const Service svc = pick(rng, services);
    const u128 src = host_in(rng, 0x0a000000, 16);
    const u128 dst = 0xac100100u + 1 + below(rng, 32);
    const u128 sport = 1024 + below(rng, 65536 - 1024);
    e.key = {src, dst, sport, svc.port, svc.proto};
    if (exact[i]) {
      e.mask = {f32, f32, f16, f16, f16};
    } else {
      // Each field either fully exact or fully wild; never all exact.
      std::array<bool, 5> keep{unit(rng) < 0.3, unit(rng) < 0.6, unit(rng) < 0.1, unit(rng) < 0.6,
                               tcp_only || unit(rng) < 0.7};
      if (std::all_of(keep.begin(), keep.end(), [](bool b) { return b; })) keep[2] = false;
      const std::array<u128, 5> full{f32, f32, f16, f16, f16};
      for (std::size_t f = 0; f < 5; ++f) {
        e.mask.push_back(keep[f] ? full[f] : 0);
        if (!keep[f]) e.key[f] = 0;
      }
    }
    e.value = {Value::make(1, unit(rng) < 0.7 ? 1 : 0)};
    out.push_back(std::move(e));
  }
  return out;
}

std::string format_wildcard_rules(const std::vector<TableEntry>& rules, const TableDecl& decl) {
  TableState t(decl);
  for (const auto& r : rules) t.mutate(Mutation{MutationOp::Insert, r});
  return format_rules(t);
}

std::string format_trace(const std::vector<Packet>& trace) {
  std::string out = "seq,proto,src_ip,dst_ip,src_port,dst_port,src_mac,dst_mac,vlan,len\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& p = trace[i];
    out += std::to_string(i) + "," + u128_to_string(proto_number(p.proto)) + "," + format_ipv4(p.src_ip) + "," +
           format_ipv4(p.dst_ip) + "," + std::to_string(p.src_port) + "," + std::to_string(p.dst_port) + "," +
           mac_text(p.src_mac) + "," + mac_text(p.dst_mac) + "," + std::to_string(p.vlan) + "," +
           std::to_string(p.payload_len) + "\n";
  }
  return out;
}

std::vector<Packet> parse_trace(std::string_view csv) {
  std::vector<Packet> out;
  for_each_line(csv, [&](std::size_t line_no, std::string_view line) {
    if (line.rfind("seq,", 0) == 0) return;  // header
    auto cells = split_csv(line);
    if (cells.size() != 10) throw Error("trace line " + std::to_string(line_no) + ": expected 10 columns");
    try {
      Packet p;
      const Field order[] = {Field::Proto, Field::SrcIp,  Field::DstIp, Field::SrcPort,
                             Field::DstPort, Field::SrcMac, Field::DstMac, Field::Vlan,
                             Field::PayloadLen};
      for (std::size_t f = 0; f < 9; ++f) {
        const u128 v = parse_u128(cells[f + 1]);
        if (v > width_mask(field_width(order[f]))) throw Error("field out of range");
        set_field(p, order[f], Value::truncated(field_width(order[f]), v));
      }
      out.push_back(p);
    } catch (const Error& e) {
      throw Error("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace morpheus
