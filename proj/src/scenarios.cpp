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

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>

#include "morpheus/ir_text.hpp"
#include "morpheus/workload.hpp"

namespace morpheus {

namespace {

// ---- programs ----

constexpr std::string_view kRouter = R"(program router version=0 provenance=original
table router_cfg kind=exact key=vlan:12 value=enabled:1,mtu:16
table pbr kind=wildcard key=src_ip:32,proto:16 value=next_hop:32
table forward kind=lpm key=dst_ip:32 value=next_hop:32,port:16
entry start
start:
  %0 = load vlan
  %1 = lookup router_cfg [%0] @1
  br %1, cfg, drop
cfg:
  %2 = fieldof %1, 0
  br %2, check_len, drop
check_len:
  %3 = load payload_len
  %4 = fieldof %1, 1
  %5 = lt %4, %3
  br %5, drop, check_src
check_src:
  %6 = load src_ip
  %7 = const 32:0
  %8 = eq %6, %7
  br %8, drop, check_dst
check_dst:
  %9 = load dst_ip
  %10 = const 32:4026531840
  %11 = and %9, %10
  %12 = const 32:3758096384
  %13 = eq %11, %12
  br %13, local, policy
policy:
  %14 = load proto
  %15 = lookup pbr [%6, %14] @2
  br %15, policy_hit, route
policy_hit:
  %16 = fieldof %15, 0
  set dst_mac, %16
  ret tx
route:
  %17 = lookup forward [%9] @3
  br %17, forward_ok, drop
forward_ok:
  %18 = fieldof %17, 0
  %19 = fieldof %17, 1
  set dst_mac, %18
  set vlan, %19
  ret tx
local:
  ret pass
drop:
  ret drop
)";

constexpr std::string_view kL2Switch = R"(program l2switch version=0 provenance=original
table vlan_cfg kind=exact key=vlan:12 value=allowed:1
table mac_table kind=exact key=vlan:12,mac:48 value=port:16 capacity=4096
entry start
start:
  %0 = load vlan
  %1 = lookup vlan_cfg [%0] @1
  br %1, vlan_ok, drop
vlan_ok:
  %2 = fieldof %1, 0
  br %2, learn, drop
learn:
  %3 = load src_mac
  %4 = lookup mac_table [%0, %3] @2
  br %4, forward, add
add:
  %5 = load src_port
  update mac_table [%0, %3] [%5] @3
  jmp forward
forward:
  %6 = load dst_mac
  %7 = lookup mac_table [%0, %6] @4
  br %7, unicast, flood
unicast:
  %8 = fieldof %7, 0
  set dst_port, %8
  ret tx
flood:
  ret pass
drop:
  ret drop
)";

constexpr std::string_view kFirewall = R"(program firewall version=0 provenance=original
table acl kind=wildcard key=src_ip:32,dst_ip:32,src_port:16,dst_port:16,proto:16 value=action:1
entry start
start:
  %0 = load src_ip
  %1 = load dst_ip
  %2 = load src_port
  %3 = load dst_port
  %4 = load proto
  %5 = lookup acl [%0, %1, %2, %3, %4] @1
  br %5, matched, deny
matched:
  %6 = fieldof %5, 0
  br %6, allow, deny
allow:
  ret tx
deny:
  ret drop
)";

constexpr std::string_view kNat = R"(program nat version=0 provenance=original
table nat_cfg kind=exact key=vlan:12 value=public_ip:32,enabled:1
table conntrack kind=exact key=src_ip:32,dst_ip:32,src_port:16,dst_port:16,proto:16 value=xip:32,xport:16 capacity=65536
table nat_state kind=exact key=slot:16 value=next_port:16
entry start
start:
  %0 = load vlan
  %1 = lookup nat_cfg [%0] @1
  br %1, cfg, pass
cfg:
  %2 = fieldof %1, 1
  br %2, track, pass
track:
  %3 = load src_ip
  %4 = load dst_ip
  %5 = load src_port
  %6 = load dst_port
  %7 = load proto
  %8 = lookup conntrack [%3, %4, %5, %6, %7] @2
  br %8, established, new_flow
established:
  %9 = fieldof %8, 0
  %10 = fieldof %8, 1
  jmp translate
new_flow:
  %11 = const 16:0
  %12 = lookup nat_state [%11] @3
  br %12, allocate, drop
allocate:
  %10 = fieldof %12, 0
  %13 = const 16:1
  %14 = add %10, %13
  update nat_state [%11] [%14] @4
  %9 = fieldof %1, 0
  update conntrack [%3, %4, %5, %6, %7] [%9, %10] @5
  jmp translate
translate:
  set src_ip, %9
  set src_port, %10
  ret tx
pass:
  ret pass
drop:
  ret drop
)";

constexpr std::string_view kKatran = R"(program katran_lb version=0 provenance=original
table vip_map kind=exact key=dst_ip:32,dst_port:16,proto:16 value=pool_base:32,flags:32
table conn_table kind=exact key=src_ip:32,dst_ip:32,src_port:16,dst_port:16,proto:16 value=backend:32 capacity=65536
table backend_pool kind=exact key=index:32 value=backend_ip:32
entry start
start:
  %0 = load dst_ip
  %1 = load dst_port
  %2 = load proto
  %3 = lookup vip_map [%0, %1, %2] @1
  br %3, vip, pass
vip:
  %4 = fieldof %3, 1
  %5 = const 32:1
  %6 = and %4, %5
  %7 = load src_ip
  %8 = load src_port
  br %6, pick, conn
conn:
  %9 = lookup conn_table [%7, %0, %8, %1, %2] @2
  br %9, known, pick
known:
  %10 = fieldof %9, 0
  jmp send
pick:
  %11 = fieldof %3, 0
  %12 = xor %7, %8
  %13 = const 32:63
  %14 = and %12, %13
  %15 = const 32:6
  %16 = shr %12, %15
  %17 = const 32:31
  %18 = and %16, %17
  %19 = add %14, %18
  %20 = add %11, %19
  %21 = lookup backend_pool [%20] @3
  br %21, picked, drop
picked:
  %10 = fieldof %21, 0
  br %6, send, store
store:
  update conn_table [%7, %0, %8, %1, %2] [%10] @4
  jmp send
send:
  set dst_ip, %10
  ret tx
pass:
  ret pass
drop:
  ret drop
)";

using Rng = std::mt19937_64;

std::uint64_t below(Rng& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>((static_cast<u128>(rng()) * bound) >> 64);
}

constexpr std::uint64_t kContentSeed = 0x6d6f727068657573ULL;

std::string ip(std::uint32_t a) { return format_ipv4(a); }

std::uint32_t vip_address(std::size_t i) { return 0xac100000u + 1 + static_cast<std::uint32_t>(i); }

Service vip_service(std::size_t i) { return i < 7 ? Service{kProtoTcp, 80} : Service{kProtoUdp, 443}; }

// 2590 prefixes: an aggregate over the traffic range, about half the rest
// inside it and the others scattered.
std::string router_forward_rules() {
  Rng rng(kContentSeed);
  std::set<std::pair<std::uint32_t, unsigned>> seen;
  std::string out;
  auto add = [&](std::uint32_t prefix, unsigned len) {
    prefix &= lpm_mask(len);
    if (!seen.insert({prefix, len}).second) return false;
    const std::uint32_t hop = 0x0aff0000u | static_cast<std::uint32_t>(seen.size());
    out += ip(prefix) + "/" + std::to_string(len) + "," + std::to_string(hop) + "," +
           std::to_string(1 + seen.size() % 64) + "\n";
    return true;
  };
  add(0xac100000u, 12);
  const unsigned inner[] = {16, 20, 22, 24};
  const unsigned outer[] = {8, 16, 24};
  while (seen.size() < 1295) {
    add(0xac100000u | static_cast<std::uint32_t>(below(rng, 1u << 20)), inner[below(rng, 4)]);
  }
  while (seen.size() < 2590) {
    auto a = static_cast<std::uint32_t>(0x01000000u + below(rng, 0xdf000000u - 0x01000000u));
    if ((a & 0xfff00000u) == 0xac100000u) continue;
    add(a, outer[below(rng, 3)]);
  }
  return out;
}

std::vector<std::uint32_t> l2_hosts() {
  std::vector<std::uint32_t> hosts;
  for (std::uint32_t i = 0; i < 2000; ++i) hosts.push_back(0x0a010000u + 1 + i);
  return hosts;
}

std::string l2_mac_rules() {
  std::string out;
  const auto hosts = l2_hosts();
  for (unsigned vlan : {1u, 2u}) {
    for (std::size_t i = 0; i < 1500; ++i) {
      out += std::to_string(vlan) + "," + std::to_string(host_mac(hosts[i])) + "," + std::to_string(1 + i % 48) + "\n";
    }
  }
  return out;
}

std::vector<std::uint32_t> firewall_servers() {
  std::vector<std::uint32_t> s;
  for (std::uint32_t i = 1; i <= 32; ++i) s.push_back(0xac100100u + i);
  return s;
}

Scenario make(std::string_view name, std::string_view text) {
  Scenario s;
  s.name = std::string(name);
  s.program = parse_program(text);
  return s;
}

TableEntry rule(const Scenario& s, std::string_view table, const std::string& line) {
  auto ref = s.program.find_table(table);
  if (!ref) throw Error("no table '" + std::string(table) + "'");
  auto rows = parse_rules(s.program.tables[*ref], line);
  if (rows.size() != 1) throw Error("bad rule '" + line + "'");
  return rows.front();
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> kNames{"router", "l2switch", "firewall", "nat", "katran_lb"};
  return kNames;
}

Scenario build_scenario(std::string_view name) {
  if (name == "router") {
    Scenario s = make(name, kRouter);
    s.rules["router_cfg"] = "1,1,1500\n2,1,1500\n3,1,1500\n4,0,1500\n";
    s.rules["pbr"] = "";
    s.rules["forward"] = router_forward_rules();
    s.flows.vlans = {1, 2, 3};
    s.fixture = {{"router_cfg", RwMark::RO}, {"pbr", RwMark::RO}, {"forward", RwMark::RO}};
    return s;
  }
  if (name == "l2switch") {
    Scenario s = make(name, kL2Switch);
    s.rules["vlan_cfg"] = "1,1\n2,1\n3,0\n";
    s.rules["mac_table"] = l2_mac_rules();
    s.flows.src_hosts = l2_hosts();
    s.flows.dst_hosts = l2_hosts();
    s.flows.vlans = {1, 2};
    s.fixture = {{"vlan_cfg", RwMark::RO}, {"mac_table", RwMark::RW}};
    return s;
  }
  if (name == "firewall") {
    Scenario s = make(name, kFirewall);
    s.rules["acl"] = format_wildcard_rules(rulegen_wildcard(500, 0.45, kContentSeed), acl_decl());
    s.flows.src_prefix = 0x0a000000u;
    s.flows.src_len = 16;
    s.flows.dst_hosts = firewall_servers();
    s.flows.services = {{kProtoTcp, 80}, {kProtoTcp, 443}, {kProtoUdp, 53}, {kProtoTcp, 22}, {kProtoTcp, 8080}};
    s.fixture = {{"acl", RwMark::RO}};
    return s;
  }
  if (name == "nat") {
    Scenario s = make(name, kNat);
    s.rules["nat_cfg"] = "1,3405803777,1\n2,3405803778,1\n3,3405803779,0\n";
    s.rules["conntrack"] = "";
    s.rules["nat_state"] = "0,1024\n";
    s.flows.src_prefix = 0xc0a80000u;  // 192.168.0.0/16
    s.flows.src_len = 16;
    s.flows.vlans = {1, 2};
    s.fixture = {{"nat_cfg", RwMark::RO}, {"conntrack", RwMark::RW}, {"nat_state", RwMark::RW}};
    return s;
  }
  if (name == "katran_lb") {
    Scenario s = make(name, kKatran);
    std::string vips;
    for (std::size_t i = 0; i < 10; ++i) {
      const auto svc = vip_service(i);
      vips += std::to_string(vip_address(i)) + "," + std::to_string(svc.port) + "," + u128_to_string(svc.proto) +
              "," + std::to_string(i * 100) + "," + (svc.proto == kProtoUdp ? "1" : "0") + "\n";
      s.flows.endpoints.emplace_back(vip_address(i), svc);
    }
    s.rules["vip_map"] = vips;
    s.rules["conn_table"] = "";
    std::string pool;
    for (std::uint32_t i = 0; i < 1000; ++i) pool += std::to_string(i) + "," + std::to_string(0x0ac80000u + i) + "\n";
    s.rules["backend_pool"] = pool;
    s.fixture = {{"vip_map", RwMark::RO}, {"conn_table", RwMark::RW}, {"backend_pool", RwMark::RO}};
    return s;
  }
  throw Error("unknown scenario '" + std::string(name) + "'");
}

TableSet scenario_tables(const Scenario& s) {
  TableSet tables = make_tables(s.program);
  for (auto& t : tables) {
    auto it = s.rules.find(t.name());
    if (it == s.rules.end()) continue;
    for (const auto& e : parse_rules(t.decl(), it->second)) t.mutate(Mutation{MutationOp::Insert, e});
  }
  return tables;
}

std::vector<ScheduledUpdate> control_schedule(const Scenario& s, std::uint64_t packets, std::uint64_t seed) {
  std::vector<ScheduledUpdate> out;
  if (packets < 3) return out;
  Rng rng(seed ^ 0xc0de);
  const std::uint64_t a = packets / 3;
  const std::uint64_t b = packets / 2;
  const std::uint64_t c = 2 * packets / 3;
  auto add = [&](std::uint64_t seq, std::string table, MutationOp op, const std::string& line) {
    out.push_back(ScheduledUpdate{seq, table, Mutation{op, rule(s, table, line)}});
  };
  if (s.name == "router") {
    // Re-point the aggregate, add a /24 inside the traffic range, and lower one MTU.
    add(a, "forward", MutationOp::Update, "172.16.0.0/12," + std::to_string(0x0afe0000u + below(rng, 256)) + ",7");
    add(b, "router_cfg", MutationOp::Update, "2,1,1000");
    add(c, "forward", MutationOp::Insert,
        ip(0xac100000u | (static_cast<std::uint32_t>(below(rng, 1u << 12)) << 8)) + "/24,185273099,9");
  } else if (s.name == "l2switch") {
    const auto hosts = l2_hosts();
    add(a, "mac_table", MutationOp::Insert,
        "1," + std::to_string(host_mac(hosts[1500 + below(rng, 500)])) + ",47");
    add(b, "mac_table", MutationOp::Delete, "2," + std::to_string(host_mac(hosts[below(rng, 1500)])) + ",0");
    add(c, "vlan_cfg", MutationOp::Update, "2,0");
  } else if (s.name == "firewall") {
    add(a, "acl", MutationOp::Insert, "1,dst_port=22/65535;proto=6/65535,0");
    add(c, "acl", MutationOp::Insert, "2,dst_ip=" + std::to_string(firewall_servers()[below(rng, 32)]) + "/4294967295,1");
  } else if (s.name == "nat") {
    add(b, "nat_cfg", MutationOp::Update, "1,3405803790,1");
    add(c, "conntrack", MutationOp::Insert, "3232235777,2886729729,40000,80,6,3405803777,5000");
  } else if (s.name == "katran_lb") {
    add(a, "backend_pool", MutationOp::Update, std::to_string(below(rng, 100)) + ",185273099");
    add(c, "vip_map", MutationOp::Update,
        std::to_string(vip_address(0)) + ",80,6,100,0");
  }
  return out;
}

void export_scenario(const Scenario& s, const std::vector<Segment>& schedule, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write = [&](const std::string& file, const std::string& text) {
    std::ofstream out(fs::path(dir) / file, std::ios::binary);
    if (!out) throw Error("cannot write " + (fs::path(dir) / file).string());
    out << text;
  };
  nlohmann::json manifest;
  manifest["scenario"] = s.name;
  manifest["program"] = s.name + ".mir";
  write(s.name + ".mir", print_program(s.program));
  const TableSet tables = scenario_tables(s);
  for (const auto& t : tables) {
    const std::string file = t.name() + ".rules";
    write(file, format_rules(t));
    manifest["rules"][t.name()] = file;
  }
  write("schedule.csv", format_schedule(schedule));
  manifest["schedule"] = "schedule.csv";
  for (const auto& [table, mark] : s.fixture) manifest["fixture"][table] = std::string(rw_mark_name(mark));
  write("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace morpheus
