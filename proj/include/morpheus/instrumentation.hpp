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

// Sampled per-site key counting with bounded LRU caches, merged into heatmaps.

#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "morpheus/analysis.hpp"
#include "morpheus/tables.hpp"

namespace morpheus {

enum class HeavyHitterRule : std::uint8_t { TopK, Cumulative };

struct SamplingPolicy {
  double probability = 0.1;
  std::size_t cache_capacity = 32;
  HeavyHitterRule rule = HeavyHitterRule::Cumulative;
  std::size_t top_k = 8;
  double cumulative_fraction = 0.9;
  /// Tables with fewer entries are inlined outright and not instrumented.
  std::size_t small_table_threshold = 16;
  std::set<std::string> disabled_tables;

  /// Throws Error on p outside [0,1], zero capacity or zero thresholds.
  void check() const;
};

/// Deterministic Bernoulli(p) draw from a 64-bit generator.
bool sample_coin(std::mt19937_64& rng, double p);

/// Bounded key -> count association with least-recently-touched eviction.
class SiteCache {
 public:
  explicit SiteCache(std::size_t capacity = 32) : capacity_(capacity == 0 ? 1 : capacity) {}

  /// Counts one access; returns whether it was sampled.
  bool record(const Key& key, std::mt19937_64& rng, double p);
  /// Unconditional sampled insert (used by record and by tests).
  void touch(const Key& key);

  std::size_t size() const { return order_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t samples_seen() const { return seen_; }
  std::uint64_t samples_recorded() const { return recorded_; }
  /// Recorded samples whose key was already resident.
  std::uint64_t resident_hits() const { return resident_hits_; }
  std::uint64_t count(const Key& key) const;
  /// Keys in most-recently-touched-first order with their counts.
  std::vector<std::pair<Key, std::uint64_t>> contents() const;
  void reset();

 private:
  std::size_t capacity_;
  std::list<std::pair<Key, std::uint64_t>> order_;  // front = most recent
  std::unordered_map<Key, std::list<std::pair<Key, std::uint64_t>>::iterator, KeyHash> index_;
  std::uint64_t seen_ = 0;
  std::uint64_t recorded_ = 0;
  std::uint64_t resident_hits_ = 0;
};

struct Heatmap {
  SiteId site = 0;
  std::map<Key, std::uint64_t> counts;
  /// Every sampled access, including ones whose key was later evicted.
  std::uint64_t total_sampled = 0;
  /// Sampled accesses that found their key already cached. Divided by
  /// total_sampled it estimates how much traffic the resident keys cover,
  /// which stays meaningful when the cache is too small to hold every hot key.
  std::uint64_t resident_hits = 0;
  std::uint64_t epoch = 0;

  friend bool operator==(const Heatmap&, const Heatmap&) = default;
};

using HeatmapSet = std::map<SiteId, Heatmap>;

/// Read sites worth instrumenting: tables at or above the small-table
/// threshold that are neither disabled by policy nor flagged off.
std::vector<SiteId> plan_instrumentation(const Program& p, const AnalysisResult& a, const TableSet& tables,
                                         const SamplingPolicy& pol);

/// Merges one site's per-worker caches (summing counts), resets them, and
/// stamps the result with `epoch`.
Heatmap snapshot_and_reset(SiteId site, std::vector<SiteCache>& caches, std::uint64_t epoch);

/// Keys by descending count, ties by ascending key, cut by the policy rule.
std::vector<Key> heavy_hitters(const Heatmap& h, const SamplingPolicy& pol);

/// CSV "site,key,count,epoch" with a header row; keys rendered "(a,b)".
std::string format_heatmaps(const HeatmapSet& maps);

}  // namespace morpheus
