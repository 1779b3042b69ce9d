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

#include <algorithm>
#include <map>

#include "support.hpp"

using namespace morpheus;

namespace {

Key flow_key(const Packet& p) {
  return Key{p.src_ip, p.dst_ip, p.src_port, p.dst_port, proto_number(p.proto)};
}

// Exact counts of the trace, top k by count then key.
std::vector<Key> exact_top(const std::vector<Packet>& trace, std::size_t k) {
  std::map<Key, std::uint64_t> counts;
  for (const auto& p : trace) ++counts[flow_key(p)];
  std::vector<std::pair<Key, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Key> out;
  for (std::size_t i = 0; i < k && i < ranked.size(); ++i) out.push_back(ranked[i].first);
  return out;
}

}  // namespace

TEST_CASE("instrumentation plan") {
  const Scenario s = build_scenario("katran_lb");
  const auto a = analyze(s.program);
  TableSet tables = scenario_tables(s);
  apply_marks(a, tables);
  SamplingPolicy pol;
  auto plan = plan_instrumentation(s.program, a, tables, pol);
  // vip_map has 10 entries (below the threshold) and conn_table starts empty.
  CHECK(plan == std::vector<SiteId>{3});

  auto& conn = tables[*s.program.find_table("conn_table")];
  for (u128 i = 0; i < 20; ++i) {
    conn.mutate(test::insert(test::exact_row({i, 1, 2, 3, kProtoTcp}, {test::v32(i)})));
  }
  plan = plan_instrumentation(s.program, a, tables, pol);
  CHECK(plan == std::vector<SiteId>{2, 3});

  pol.disabled_tables.insert("conn_table");
  CHECK(plan_instrumentation(s.program, a, tables, pol) == std::vector<SiteId>{3});
  conn.instrumentation_enabled = false;
  pol.disabled_tables.clear();
  CHECK(plan_instrumentation(s.program, a, tables, pol) == std::vector<SiteId>{3});
}

TEST_CASE("sampling extremes") {
  std::mt19937_64 rng(1);
  SiteCache full(64);
  std::map<Key, std::uint64_t> truth;
  for (int i = 0; i < 5000; ++i) {
    const Key k{static_cast<u128>(rng() % 40)};
    ++truth[k];
    CHECK(full.record(k, rng, 1.0));
  }
  CHECK(full.samples_seen() == 5000);
  for (const auto& [k, c] : truth) CHECK(full.count(k) == c);

  SiteCache none(8);
  for (int i = 0; i < 1000; ++i) CHECK_FALSE(none.record(Key{1}, rng, 0.0));
  CHECK(none.size() == 0);
  CHECK(none.samples_seen() == 1000);
}

TEST_CASE("least recently touched key is evicted") {
  SiteCache c(2);
  c.touch(Key{1});
  c.touch(Key{2});
  c.touch(Key{1});
  c.touch(Key{3});  // evicts 2
  CHECK(c.count(Key{1}) == 2);
  CHECK(c.count(Key{2}) == 0);
  CHECK(c.count(Key{3}) == 1);
  CHECK(c.size() == 2);
  CHECK(c.resident_hits() == 1);
  const auto contents = c.contents();
  REQUIRE(contents.size() == 2);
  CHECK(contents[0].first == Key{3});
}

TEST_CASE("cache never exceeds capacity and counts stay positive") {
  std::mt19937_64 rng(5);
  SiteCache c(32);
  for (int i = 0; i < 20000; ++i) {
    c.record(Key{static_cast<u128>(rng() % 500)}, rng, 0.3);
    REQUIRE(c.size() <= 32);
  }
  for (const auto& [k, n] : c.contents()) CHECK(n >= 1);
}

TEST_CASE("merging worker caches") {
  std::vector<SiteCache> two(2, SiteCache(8));
  for (int i = 0; i < 3; ++i) two[0].touch(Key{7});
  for (int i = 0; i < 5; ++i) two[1].touch(Key{7});
  const Heatmap h = snapshot_and_reset(4, two, 9);
  CHECK(h.counts.at(Key{7}) == 8);
  CHECK(h.total_sampled == 8);
  CHECK(h.epoch == 9);
  CHECK(h.site == 4);
  CHECK(two[0].size() == 0);

  std::vector<SiteCache> one(1, SiteCache(8));
  one[0].touch(Key{1});
  one[0].touch(Key{2});
  one[0].touch(Key{2});
  const Heatmap m = snapshot_and_reset(1, one, 0);
  CHECK(m.counts == std::map<Key, std::uint64_t>{{Key{1}, 1}, {Key{2}, 2}});
}

TEST_CASE("skewed shards merge to the exact top-k") {
  const auto trace = gen_trace(Locality::Low, 40000, 3);
  std::vector<SiteCache> caches(4, SiteCache(4096));
  std::vector<std::mt19937_64> rngs;
  for (int w = 0; w < 4; ++w) rngs.emplace_back(w);
  for (const auto& p : trace) {
    // Shard by flow so every worker sees a different key mix.
    const std::size_t w = flow_hash(p) % 4;
    caches[w].record(flow_key(p), rngs[w], 1.0);
  }
  const Heatmap h = snapshot_and_reset(1, caches, 0);
  SamplingPolicy pol;
  pol.rule = HeavyHitterRule::TopK;
  pol.top_k = 8;
  CHECK(heavy_hitters(h, pol) == exact_top(trace, 8));
}

TEST_CASE("heavy hitter rules") {
  Heatmap h;
  h.counts = {{Key{1}, 90}, {Key{2}, 5}, {Key{3}, 5}};
  h.total_sampled = 100;
  SamplingPolicy pol;
  pol.rule = HeavyHitterRule::Cumulative;
  pol.cumulative_fraction = 0.9;
  CHECK(heavy_hitters(h, pol) == std::vector<Key>{Key{1}});
  pol.rule = HeavyHitterRule::TopK;
  pol.top_k = 2;
  CHECK(heavy_hitters(h, pol) == std::vector<Key>{Key{1}, Key{2}});  // tie broken by key
  CHECK(heavy_hitters(Heatmap{}, pol).empty());

  // Uniform keys: any 8 will do, but no estimate may stand out.
  std::mt19937_64 rng(8);
  SiteCache c(2048);
  for (int i = 0; i < 100000; ++i) c.record(Key{static_cast<u128>(rng() % 1000)}, rng, 1.0);
  std::vector<SiteCache> v{c};
  const Heatmap u = snapshot_and_reset(1, v, 0);
  pol.top_k = 8;
  const auto top = heavy_hitters(u, pol);
  CHECK(top.size() == 8);
  const double mean = static_cast<double>(u.total_sampled) / static_cast<double>(u.counts.size());
  for (const auto& k : top) CHECK(static_cast<double>(u.counts.at(k)) <= 2 * mean);
}

TEST_CASE("top-5 recovery on high-locality traffic at p=0.1") {
  // Exact-count oracle versus the sampled 32-entry cache, 20 seeds.
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto trace = gen_trace(Locality::High, 100000, seed);
    std::mt19937_64 rng(seed * 31);
    std::vector<SiteCache> caches(1, SiteCache(32));
    for (const auto& p : trace) caches[0].record(flow_key(p), rng, 0.1);
    const Heatmap h = snapshot_and_reset(1, caches, 0);
    SamplingPolicy pol;
    pol.rule = HeavyHitterRule::TopK;
    pol.top_k = 5;
    const auto got = heavy_hitters(h, pol);
    const auto want = exact_top(trace, 5);
    std::size_t common = 0;
    for (const auto& k : got) common += std::count(want.begin(), want.end(), k);
    worst = std::min(worst, static_cast<double>(common) / 5.0);
  }
  CHECK(worst >= 0.8);
}

TEST_CASE("sampling policy validation") {
  SamplingPolicy pol;
  CHECK_NOTHROW(pol.check());
  pol.probability = 1.5;
  CHECK_THROWS_AS(pol.check(), Error);
  pol.probability = 0.1;
  pol.cache_capacity = 0;
  CHECK_THROWS_AS(pol.check(), Error);
}

TEST_CASE("heatmap dump") {
  Heatmap h;
  h.site = 3;
  h.epoch = 2;
  h.counts = {{Key{1, 2}, 4}};
  const std::string csv = format_heatmaps(HeatmapSet{{3, h}});
  CHECK(csv == "site,key,count,epoch\n3,\"(1,2)\",4,2\n");
}
