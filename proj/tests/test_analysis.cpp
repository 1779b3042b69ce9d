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

#include <doctest.h>

#include <set>

#include "support.hpp"

using namespace morpheus;

namespace {

Program parse(const std::string& tables, const std::string& body) {
  return parse_program("program t version=0 provenance=original\n" + tables + "entry start\n" + body);
}

std::set<std::pair<std::string, AccessKind>> site_set(const Program& p, const AnalysisResult& a) {
  std::set<std::pair<std::string, AccessKind>> out;
  for (const auto& s : a.sites) out.insert({p.tables[s.table].name, s.kind});
  return out;
}

BlockId block(const Program& p, std::string_view label) { return *p.find_block(label); }

// d dominates b when b cannot be reached from the entry once d is removed.
bool dominates_by_removal(const Program& p, BlockId d, BlockId b) {
  if (d == b) return true;
  if (d == p.entry) return true;
  std::vector<bool> seen(p.blocks.size(), false);
  std::vector<BlockId> stack{p.entry};
  seen[p.entry] = true;
  while (!stack.empty()) {
    const BlockId x = stack.back();
    stack.pop_back();
    if (x == b) return false;
    for (BlockId s : successors(p.blocks[x].code.back())) {
      if (s != d && !seen[s]) {
        seen[s] = true;
        stack.push_back(s);
      }
    }
  }
  return true;
}

bool reachable(const Program& p, BlockId b) {
  const auto order = topological_order(p);
  return std::find(order->begin(), order->end(), b) != order->end();
}

}  // namespace

TEST_CASE("load balancer sites, marks and pairs") {
  const Program p = build_scenario("katran_lb").program;
  const auto a = analyze(p);
  const std::set<std::pair<std::string, AccessKind>> want{{"vip_map", AccessKind::Read},
                                                          {"conn_table", AccessKind::Read},
                                                          {"conn_table", AccessKind::Write},
                                                          {"backend_pool", AccessKind::Read}};
  CHECK(site_set(p, a) == want);
  CHECK(a.sites.size() == 4);
  CHECK(a.table_marks[*p.find_table("vip_map")] == RwMark::RO);
  CHECK(a.table_marks[*p.find_table("backend_pool")] == RwMark::RO);
  CHECK(a.table_marks[*p.find_table("conn_table")] == RwMark::RW);
  REQUIRE(a.pairs.size() == 1);
  CHECK(a.find_site(a.pairs[0].first)->kind == AccessKind::Read);
  CHECK(a.find_site(a.pairs[0].second)->kind == AccessKind::Write);
  CHECK(p.tables[a.find_site(a.pairs[0].first)->table].name == "conn_table");

  CHECK(a.region_marks[block(p, "conn")] == Region::Stateful);
  CHECK(a.region_marks[block(p, "store")] == Region::Stateful);
  CHECK(a.region_marks[block(p, "start")] == Region::Stateless);
  CHECK(a.region_marks[block(p, "pick")] == Region::Stateless);
}

TEST_CASE("no tables, no sites") {
  const Program p = parse("", "start:\n  ret pass\n");
  const auto a = analyze(p);
  CHECK(a.sites.empty());
  CHECK(a.pairs.empty());
  CHECK(a.region_marks == std::vector<Region>{Region::Stateless});
}

TEST_CASE("the same table read in two blocks gives two sites") {
  const Program p = parse("table t kind=exact key=k:32 value=v:32\n", R"(start:
  %0 = load src_ip
  %1 = lookup t [%0] @1
  br %1, a, b
a:
  %2 = lookup t [%0] @2
  ret tx
b:
  ret drop
)");
  const auto sites = find_access_sites(p);
  REQUIRE(sites.size() == 2);
  CHECK(sites[0].table == sites[1].table);
  CHECK(sites[0].context != sites[1].context);
  CHECK(classify_tables(p, sites) == std::vector<RwMark>{RwMark::RO});
}

TEST_CASE("lookup results feeding writes") {
  const std::string tables = "table t kind=exact key=k:32 value=v:32\ntable u kind=exact key=k:32 value=v:32\n";
  // t's own value, pushed through an Alu chain, is written back to t.
  const Program same = parse(tables, R"(start:
  %0 = load src_ip
  %1 = lookup t [%0] @1
  br %1, hit, miss
hit:
  %2 = fieldof %1, 0
  %3 = const 32:1
  %4 = add %2, %3
  %5 = xor %4, %3
  update t [%0] [%5] @2
  ret tx
miss:
  ret drop
)");
  const auto a = analyze(same);
  CHECK(a.table_marks == std::vector<RwMark>{RwMark::RW, RwMark::RO});
  CHECK(a.pairs == std::vector<std::pair<SiteId, SiteId>>{{1, 2}});

  // Only the written table turns read-write.
  const Program cross = parse(tables, R"(start:
  %0 = load src_ip
  %1 = lookup t [%0] @1
  br %1, hit, miss
hit:
  %2 = fieldof %1, 0
  update u [%0] [%2] @2
  ret tx
miss:
  ret drop
)");
  const auto c = analyze(cross);
  CHECK(c.table_marks == std::vector<RwMark>{RwMark::RO, RwMark::RW});
  CHECK(c.pairs.empty());
}

TEST_CASE("pairing") {
  const std::string tables = "table t kind=exact key=k:32 value=v:32\ntable u kind=exact key=k:32 value=v:32\n";
  SUBCASE("independent tables") {
    const Program p = parse(tables, R"(start:
  %0 = load src_ip
  %1 = lookup t [%0] @1
  %2 = lookup u [%0] @2
  ret pass
)");
    CHECK(analyze(p).pairs.empty());
  }
  SUBCASE("diamond with one writing arm") {
    const Program p = parse(tables, R"(start:
  %0 = load src_ip
  %1 = lookup t [%0] @1
  br %1, left, right
left:
  jmp join
right:
  %2 = load src_port
  update t [%0] [%0] @2
  jmp join
join:
  ret pass
)");
    const auto a = analyze(p);
    CHECK(a.pairs == std::vector<std::pair<SiteId, SiteId>>{{1, 2}});
  }
  SUBCASE("write not influenced by the read") {
    const Program p = parse(tables, R"(start:
  %0 = load src_ip
  %1 = lookup t [%0] @1
  update t [%0] [%0] @2
  br %1, a, b
a:
  ret tx
b:
  ret drop
)");
    CHECK(analyze(p).pairs.empty());
  }
}

TEST_CASE("scenario fixtures") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    const Scenario s = build_scenario(name);
    const auto a = analyze(s.program);
    for (const auto& [table, mark] : s.fixture) {
      CAPTURE(table);
      CHECK(a.table_marks[*s.program.find_table(table)] == mark);
    }
  }
  const Scenario nat = build_scenario("nat");
  const auto a = analyze(nat.program);
  CHECK(a.region_marks[*nat.program.find_block("track")] == Region::Stateful);
  CHECK(a.region_marks[*nat.program.find_block("established")] == Region::Stateful);
  CHECK(a.region_marks[*nat.program.find_block("start")] == Region::Stateless);
  const auto router = analyze(build_scenario("router").program);
  for (Region r : router.region_marks) CHECK(r == Region::Stateless);
}

TEST_CASE("dominators and regions agree with the removal oracle") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    const Program p = build_scenario(name).program;
    const auto dom = dominators(p);
    const auto a = analyze(p);
    for (BlockId b = 0; b < p.blocks.size(); ++b) {
      if (!reachable(p, b)) continue;
      bool stateful = false;
      for (BlockId d = 0; d < p.blocks.size(); ++d) {
        const bool want = dominates_by_removal(p, d, b);
        CHECK(dom[b][d] == want);
        if (!want) continue;
        for (const auto& s : a.sites) stateful = stateful || (s.block == d && a.is_rw(s.table));
      }
      CHECK((a.region_marks[b] == Region::Stateful) == stateful);
    }
  }
}

TEST_CASE("post dominators") {
  const Program p = build_scenario("katran_lb").program;
  const auto pdom = post_dominators(p);
  // Every path from pick goes through picked or drop, so neither alone
  // post-dominates it; pick post-dominates itself.
  const BlockId pick = *p.find_block("pick");
  CHECK(pdom[pick][pick]);
  CHECK_FALSE(pdom[pick][*p.find_block("picked")]);
  CHECK(pdom[*p.find_block("store")][*p.find_block("send")]);
}

TEST_CASE("analysis dump is stable") {
  const Program p = build_scenario("katran_lb").program;
  const std::string text = format_analysis(p, analyze(p));
  CHECK(text.find("conn_table RW") != std::string::npos);
  CHECK(text.find("@2 -> @4 conn_table") != std::string::npos);
  CHECK(text == format_analysis(p, analyze(p)));
}
