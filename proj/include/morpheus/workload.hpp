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

// Traffic traces with controlled flow locality, scenario programs with their
// rule sets, and control-plane schedules.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "morpheus/ir.hpp"
#include "morpheus/packet.hpp"
#include "morpheus/tables.hpp"

namespace morpheus {

enum class Locality : std::uint8_t { High, Low, None };

std::string_view locality_name(Locality l);
std::optional<Locality> locality_from_name(std::string_view name);

/// Popular-flow shape of a profile: the top `hot_flows` carry `hot_share`
/// of the packets, the remaining flows split the rest evenly.
struct LocalityProfile {
  Locality kind = Locality::None;
  std::size_t flows = 1000;
  std::size_t hot_flows = 0;
  double hot_share = 0.0;
};

/// High: top-5 = 95%. Low: top-50 = 95%. None: `flows` uniform.
LocalityProfile locality_profile(Locality l, std::size_t flows = 1000);

/// Where flows come from. Every list, when non-empty, is sampled uniformly
/// per flow; otherwise the address is drawn from the prefix.
struct Service {
  u128 proto = kProtoTcp;
  std::uint16_t port = 80;
};

struct FlowSpace {
  std::uint32_t src_prefix = 0x0a000000;  // 10.0.0.0/8
  unsigned src_len = 8;
  std::vector<std::uint32_t> src_hosts;
  std::uint32_t dst_prefix = 0xac100000;  // 172.16.0.0/12
  unsigned dst_len = 12;
  std::vector<std::uint32_t> dst_hosts;
  std::vector<Service> services{{kProtoTcp, 80}, {kProtoTcp, 443}, {kProtoUdp, 53}};
  /// When non-empty, (destination, service) pairs replace dst_* and services.
  std::vector<std::pair<std::uint32_t, Service>> endpoints;
  std::vector<std::uint16_t> vlans{1};
  std::uint16_t min_len = 64;
  std::uint16_t max_len = 1400;
};

/// MAC address derived from an IPv4 host address (locally administered).
std::uint64_t host_mac(std::uint32_t ip);

/// Distinct flows, deterministic in (space, count, seed).
std::vector<Packet> gen_flows(const FlowSpace& space, std::size_t count, std::uint64_t seed);

/// i.i.d. packets over the profile's flow popularity. Deterministic in
/// (profile, n, seed, space).
std::vector<Packet> gen_trace(const LocalityProfile& profile, std::size_t n, std::uint64_t seed,
                              const FlowSpace& space = {});
std::vector<Packet> gen_trace(Locality l, std::size_t n, std::uint64_t seed, const FlowSpace& space = {});

/// Share of the packets carried by the k most frequent 5-tuples.
double top_flow_share(const std::vector<Packet>& trace, std::size_t k);
std::size_t distinct_flows(const std::vector<Packet>& trace);
double max_flow_share(const std::vector<Packet>& trace);

struct Segment {
  Locality profile = Locality::None;
  std::size_t packets = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct SegmentedTrace {
  std::vector<Packet> packets;
  /// Start index of every segment.
  std::vector<std::size_t> boundaries;
};

SegmentedTrace dynamic_schedule(const std::vector<Segment>& segments, const FlowSpace& space = {});

/// Uniform, high, a different high, then low locality; `unit` packets per
/// simulated second (5, 5, 10 and 5 seconds).
std::vector<Segment> adaptation_schedule(std::size_t unit, std::uint64_t seed);

/// Schedule file: one "profile,packets[,seed]" line per segment; '#' comments.
std::vector<Segment> parse_schedule(std::string_view text, std::uint64_t default_seed);
std::string format_schedule(const std::vector<Segment>& segments);

/// `n` prioritized 5-tuple rules (src_ip, dst_ip, src_port, dst_port, proto ->
/// action:1). round(n * exact_fraction) of them are fully masked; the others
/// mix fully wild and fully exact fields, at least one wild.
std::vector<TableEntry> rulegen_wildcard(std::size_t n, double exact_fraction, std::uint64_t seed,
                                         bool tcp_only = false);
/// The same rules in rule-file form.
std::string format_wildcard_rules(const std::vector<TableEntry>& rules, const TableDecl& decl);
TableDecl acl_decl(std::string name = "acl");

struct ScheduledUpdate {
  std::uint64_t seq = 0;  // delivered just before packet `seq`
  std::string table;
  Mutation mutation;
};

struct Scenario {
  std::string name;
  Program program;
  /// Initial rules per table name, in rule-file form.
  std::map<std::string, std::string> rules;
  FlowSpace flows;
  /// Expected read/write marks per table name.
  std::map<std::string, RwMark> fixture;
};

const std::vector<std::string>& scenario_names();
/// Throws Error on an unknown name.
Scenario build_scenario(std::string_view name);
/// Live tables with the scenario's initial rules.
TableSet scenario_tables(const Scenario& s);
/// Control-plane updates spread over a run of `packets` packets; at least one
/// lands mid-run when packets >= 3.
std::vector<ScheduledUpdate> control_schedule(const Scenario& s, std::uint64_t packets, std::uint64_t seed);

/// Trace CSV "seq,proto,src_ip,dst_ip,src_port,dst_port,src_mac,dst_mac,vlan,len".
std::string format_trace(const std::vector<Packet>& trace);
std::vector<Packet> parse_trace(std::string_view csv);

/// Writes program, rule files, schedule and a manifest.json into `dir`.
void export_scenario(const Scenario& s, const std::vector<Segment>& schedule, const std::string& dir);

}  // namespace morpheus
