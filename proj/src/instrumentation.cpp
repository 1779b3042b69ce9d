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

#include "morpheus/instrumentation.hpp"

#include <algorithm>

namespace morpheus {

void SamplingPolicy::check() const {
  if (!(probability >= 0.0 && probability <= 1.0)) throw Error("sampling probability must lie in [0,1]");
  if (cache_capacity == 0) throw Error("instrumentation cache capacity must be at least 1");
  if (top_k == 0) throw Error("heavy-hitter top-k must be at least 1");
  if (!(cumulative_fraction > 0.0 && cumulative_fraction <= 1.0)) {
    throw Error("heavy-hitter cumulative fraction must lie in (0,1]");
  }
  if (small_table_threshold == 0) throw Error("small-table threshold must be at least 1");
}

bool sample_coin(std::mt19937_64& rng, double p) {
  // 53 random mantissa bits give a uniform double in [0,1).
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u < p;
}

bool SiteCache::record(const Key& key, std::mt19937_64& rng, double p) {
  ++seen_;
  if (!sample_coin(rng, p)) return false;
  touch(key);
  return true;
}

void SiteCache::touch(const Key& key) {
  ++recorded_;
  auto it = index_.find(key);
  if (it != index_.end()) {
    ++it->second->second;
    ++resident_hits_;
    order_.splice(order_.begin(), order_, it->second);
    return;
  }
  if (order_.size() == capacity_) {
    index_.erase(order_.back().first);
    order_.pop_back();
  }
  order_.emplace_front(key, 1);
  index_.emplace(key, order_.begin());
}

std::uint64_t SiteCache::count(const Key& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? 0 : it->second->second;
}

std::vector<std::pair<Key, std::uint64_t>> SiteCache::contents() const { return {order_.begin(), order_.end()}; }

void SiteCache::reset() {
  order_.clear();
  index_.clear();
  seen_ = 0;
  recorded_ = 0;
  resident_hits_ = 0;
}

std::vector<SiteId> plan_instrumentation(const Program& p, const AnalysisResult& a, const TableSet& tables,
                                         const SamplingPolicy& pol) {
  std::vector<SiteId> out;
  for (const auto& s : a.sites) {
    if (s.kind != AccessKind::Read || s.table >= tables.size()) continue;
    const auto& t = tables[s.table];
    if (!t.instrumentation_enabled || pol.disabled_tables.count(p.tables[s.table].name) != 0) continue;
    if (t.size() < pol.small_table_threshold) continue;
    out.push_back(s.site);
  }
  return out;
}

Heatmap snapshot_and_reset(SiteId site, std::vector<SiteCache>& caches, std::uint64_t epoch) {
  Heatmap h;
  h.site = site;
  h.epoch = epoch;
  for (auto& c : caches) {
    for (const auto& [key, count] : c.contents()) h.counts[key] += count;
    h.total_sampled += c.samples_recorded();
    h.resident_hits += c.resident_hits();
    c.reset();
  }
  return h;
}

std::vector<Key> heavy_hitters(const Heatmap& h, const SamplingPolicy& pol) {
  std::vector<std::pair<Key, std::uint64_t>> ranked(h.counts.begin(), h.counts.end());
  // std::map iteration is key-ascending, so a stable sort keeps the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Key> out;
  if (pol.rule == HeavyHitterRule::TopK) {
    for (std::size_t i = 0; i < ranked.size() && i < pol.top_k; ++i) out.push_back(ranked[i].first);
    return out;
  }
  const double target = pol.cumulative_fraction * static_cast<double>(h.total_sampled);
  double acc = 0;
  for (const auto& [key, count] : ranked) {
    out.push_back(key);
    acc += static_cast<double>(count);
    if (acc + 1e-9 >= target) break;
  }
  return out;
}

std::string format_heatmaps(const HeatmapSet& maps) {
  std::string out = "site,key,count,epoch\n";
  for (const auto& [site, h] : maps) {
    for (const auto& [key, count] : h.counts) {
      out += std::to_string(site) + ",\"" + to_string(key) + "\"," + std::to_string(count) + "," +
             std::to_string(h.epoch) + "\n";
    }
  }
  return out;
}

}  // namespace morpheus
