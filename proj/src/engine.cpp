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

#include "morpheus/engine.hpp"

#include <algorithm>
#include <json.hpp>

#include "morpheus/validate.hpp"

namespace morpheus {

std::string_view engine_mode_name(EngineMode m) {
  switch (m) {
    case EngineMode::Baseline:
      return "baseline";
    case EngineMode::Morpheus:
      return "morpheus";
    case EngineMode::NaiveInstrumentation:
      return "naive-instrumentation";
  }
  return "?";
}

std::optional<EngineMode> engine_mode_from_name(std::string_view name) {
  for (auto m : {EngineMode::Baseline, EngineMode::Morpheus, EngineMode::NaiveInstrumentation}) {
    if (engine_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

std::string_view trigger_name(CompileTrigger t) {
  switch (t) {
    case CompileTrigger::Periodic:
      return "periodic";
    case CompileTrigger::Event:
      return "event";
    case CompileTrigger::Both:
      return "both";
  }
  return "?";
}

std::optional<CompileTrigger> trigger_from_name(std::string_view name) {
  for (auto t : {CompileTrigger::Periodic, CompileTrigger::Event, CompileTrigger::Both}) {
    if (trigger_name(t) == name) return t;
  }
  return std::nullopt;
}

void EngineConfig::check() const {
  if (workers == 0) throw Error("engine needs at least one worker");
  if (period == 0) throw Error("recompile period must be at least 1 packet");
  passes.check();
}

namespace {

using nlohmann::json;

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

void check_keys(const json& obj, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [k, v] : obj.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw Error("unknown " + std::string(where) + " setting '" + k + "'");
    }
  }
}

}  // namespace

EngineConfig parse_engine_config(std::string_view json_text, EngineConfig cfg) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("engine config: ") + e.what());
  }
  if (!doc.is_object()) throw Error("engine config must be a JSON object");
  check_keys(doc,
             {"mode", "workers", "period", "compile_latency", "trigger", "shadow_check", "seed", "sampling",
              "small_table_threshold", "fast_path_max_entries", "hot_cache_max_entries",
              "branch_injection_max_values", "disabled_passes", "disabled_tables", "cost"},
             "engine");
  try {
    if (auto it = doc.find("mode"); it != doc.end()) {
      auto m = engine_mode_from_name(it->get<std::string>());
      if (!m) throw Error("unknown engine mode '" + it->get<std::string>() + "'");
      cfg.mode = *m;
    }
    if (auto it = doc.find("trigger"); it != doc.end()) {
      auto t = trigger_from_name(it->get<std::string>());
      if (!t) throw Error("unknown compile trigger '" + it->get<std::string>() + "'");
      cfg.trigger = *t;
    }
    read_into(doc, "workers", cfg.workers);
    read_into(doc, "period", cfg.period);
    read_into(doc, "compile_latency", cfg.compile_latency);
    read_into(doc, "shadow_check", cfg.shadow_check);
    read_into(doc, "seed", cfg.seed);
    read_into(doc, "small_table_threshold", cfg.passes.small_table_threshold);
    read_into(doc, "fast_path_max_entries", cfg.passes.fast_path_max_entries);
    read_into(doc, "hot_cache_max_entries", cfg.passes.hot_cache_max_entries);
    read_into(doc, "branch_injection_max_values", cfg.passes.branch_injection_max_values);
    if (auto it = doc.find("disabled_passes"); it != doc.end()) {
      for (const auto& p : *it) cfg.passes.disabled_passes.insert(p.get<std::string>());
    }
    if (auto it = doc.find("disabled_tables"); it != doc.end()) {
      for (const auto& t : *it) {
        cfg.passes.disabled_tables.insert(t.get<std::string>());
        cfg.passes.sampling.disabled_tables.insert(t.get<std::string>());
      }
    }
    if (auto it = doc.find("sampling"); it != doc.end()) {
      const json& s = *it;
      check_keys(s, {"probability", "cache_capacity", "rule", "top_k", "cumulative_fraction"}, "sampling");
      auto& pol = cfg.passes.sampling;
      read_into(s, "probability", pol.probability);
      read_into(s, "cache_capacity", pol.cache_capacity);
      read_into(s, "top_k", pol.top_k);
      read_into(s, "cumulative_fraction", pol.cumulative_fraction);
      if (auto r = s.find("rule"); r != s.end()) {
        const auto rule = r->get<std::string>();
        if (rule == "top-k") {
          pol.rule = HeavyHitterRule::TopK;
        } else if (rule == "cumulative") {
          pol.rule = HeavyHitterRule::Cumulative;
        } else {
          throw Error("unknown heavy-hitter rule '" + rule + "'");
        }
      }
    }
    cfg.passes.sampling.small_table_threshold = cfg.passes.small_table_threshold;
    if (auto it = doc.find("cost"); it != doc.end()) {
      const json& c = *it;
      check_keys(c,
                 {"base", "branch", "guard", "field_of", "exact_lookup", "lpm_base", "lpm_per_length",
                  "wildcard_per_entry", "update", "inline_compare", "instr_coin", "instr_sample"},
                 "cost");
      auto& cm = cfg.passes.cost;
      read_into(c, "base", cm.base);
      read_into(c, "branch", cm.branch);
      read_into(c, "guard", cm.guard);
      read_into(c, "field_of", cm.field_of);
      read_into(c, "exact_lookup", cm.exact_lookup);
      read_into(c, "lpm_base", cm.lpm_base);
      read_into(c, "lpm_per_length", cm.lpm_per_length);
      read_into(c, "wildcard_per_entry", cm.wildcard_per_entry);
      read_into(c, "update", cm.update);
      read_into(c, "inline_compare", cm.inline_compare);
      read_into(c, "instr_coin", cm.instr_coin);
      read_into(c, "instr_sample", cm.instr_sample);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("engine config: ") + e.what());
  }
  cfg.check();
  return cfg;
}

std::string format_packet_log(const std::vector<PacketLogEntry>& log) {
  std::string out = "seq,version,cost,action\n";
  for (const auto& e : log) {
    out += std::to_string(e.seq) + "," + std::to_string(e.version) + "," + std::to_string(e.cost) + "," +
           std::string(verdict_name(e.verdict)) + "\n";
  }
  return out;
}

Engine::Engine(Program original, TableSet tables, EngineConfig cfg)
    : original_(std::move(original)), tables_(std::move(tables)), cfg_(std::move(cfg)) {
  if (cfg_.mode == EngineMode::NaiveInstrumentation) {
    cfg_.passes.naive_instrumentation = true;
    cfg_.passes.sampling.probability = 1.0;
  }
  cfg_.check();
  if (original_.provenance != Provenance::Original) throw Error("engine needs an original program");
  if (auto diags = validate(original_); !diags.empty()) {
    throw Error("program does not validate: " + to_string(diags.front(), original_));
  }
  if (tables_.size() != original_.tables.size()) throw Error("table set does not match the program");
  analysis_ = analyze(original_);
  apply_marks(analysis_, tables_);
  for (std::size_t w = 0; w < cfg_.workers; ++w) rngs_.emplace_back(cfg_.seed * 0x9e3779b97f4a7c15ULL + w);
  caches_.resize(cfg_.workers);
}

Engine::~Engine() {
  if (pending_ && pending_->result.valid()) pending_->result.wait();
}

bool Engine::guard_alive(GuardId g) const {
  if (!artifact_) return false;
  if (g == 0) return program_guard_alive_;
  for (const auto& spec : artifact_->guards) {
    if (spec.id == g) return tables_[spec.table].generation() == spec.expected_version;
  }
  return false;
}

bool Engine::record_sample(std::size_t worker, SiteId site, const Key& key) {
  auto it = std::find(cache_sites_.begin(), cache_sites_.end(), site);
  if (it == cache_sites_.end()) return false;
  const auto idx = static_cast<std::size_t>(it - cache_sites_.begin());
  return caches_[worker][idx].record(key, rngs_[worker], cfg_.passes.sampling.probability);
}

HeatmapSet Engine::drain_heatmaps() {
  HeatmapSet out;
  for (std::size_t i = 0; i < cache_sites_.size(); ++i) {
    std::vector<SiteCache> per_worker;
    per_worker.reserve(caches_.size());
    for (auto& w : caches_) per_worker.push_back(std::move(w[i]));
    Heatmap h = snapshot_and_reset(cache_sites_[i], per_worker, compiles_started_);
    for (std::size_t w = 0; w < caches_.size(); ++w) caches_[w][i] = std::move(per_worker[w]);
    if (h.total_sampled > 0) out.emplace(h.site, std::move(h));
  }
  return out;
}

void Engine::start_compile() {
  TableSet snapshot = tables_;
  HeatmapSet heat = drain_heatmaps();
  last_heatmaps_ = heat;
  const std::uint64_t next_version = version() + 1;
  ++compiles_started_;
  event_pending_ = false;
  // The compiler only sees copies; the live state keeps moving.
  auto job = [original = &original_, analysis = &analysis_, snapshot = std::move(snapshot),
              heat = std::move(heat), passes = cfg_.passes, next_version]() {
    return run_pipeline(*original, *analysis, snapshot, heat, passes, next_version);
  };
  pending_ = Pending{std::async(std::launch::async, std::move(job)), seq_ + cfg_.compile_latency};
}

void Engine::swap_in(std::future<OptimizedArtifact>& fut) {
  ++report_.recompiles;
  std::unique_ptr<OptimizedArtifact> art;
  try {
    art = std::make_unique<OptimizedArtifact>(fut.get());
  } catch (const PassError&) {
    ++report_.failed_compiles;
  }
  pending_.reset();
  if (art) {
    pass_logs_.push_back(art->pass_log);
    artifact_ = std::move(art);
    // Program guard: every read-only table still at its compile-time generation.
    program_guard_alive_ = true;
    for (std::size_t t = 0; t < tables_.size(); ++t) {
      if (!analysis_.is_rw(static_cast<TableRef>(t)) &&
          tables_[t].generation() != artifact_->table_generations_at_compile[t]) {
        program_guard_alive_ = false;
      }
    }
    cache_sites_ = artifact_->instrumented_sites;
    for (auto& w : caches_) w.assign(cache_sites_.size(), SiteCache(cfg_.passes.sampling.cache_capacity));
  }
  auto queued = std::move(queue_);
  queue_.clear();
  for (const auto& u : queued) apply_update(u.table, u.mutation);
}

void Engine::maybe_swap() {
  if (pending_ && seq_ >= pending_->ready_at) swap_in(pending_->result);
}

void Engine::maybe_start_compile() {
  if (pending_) return;
  const bool periodic = cfg_.trigger != CompileTrigger::Event && seq_ % cfg_.period == 0;
  const bool event = cfg_.trigger != CompileTrigger::Periodic && event_pending_;
  if (periodic || event) start_compile();
}

void Engine::finish_pending() {
  if (pending_) swap_in(pending_->result);
}

bool Engine::compile_now() {
  if (!optimizing()) return false;
  finish_pending();
  const auto failed = report_.failed_compiles;
  start_compile();
  swap_in(pending_->result);
  return report_.failed_compiles == failed;
}

void Engine::apply_update(TableRef table, const Mutation& m) {
  tables_.at(table).mutate(m);
  applied_.push_back(AppliedUpdate{table, m});
  if (!analysis_.is_rw(table)) program_guard_alive_ = false;
  event_pending_ = true;
}

UpdateStatus Engine::control_update(TableRef table, const Mutation& m) {
  if (table >= tables_.size()) throw Error("control update for unknown table #" + std::to_string(table));
  // Schema check up front so a bad update never sits in the queue.
  TableState probe(tables_[table].decl());
  Mutation check = m;
  check.op = m.op == MutationOp::Delete ? MutationOp::Delete : MutationOp::Insert;
  probe.mutate(check);
  if (pending_) {
    queue_.push_back(AppliedUpdate{table, m});
    return UpdateStatus::Queued;
  }
  apply_update(table, m);
  return UpdateStatus::Applied;
}

UpdateStatus Engine::control_update(std::string_view table, const Mutation& m) {
  auto ref = original_.find_table(table);
  if (!ref) throw Error("control update for unknown table '" + std::string(table) + "'");
  return control_update(*ref, m);
}

std::vector<AppliedUpdate> Engine::take_applied() { return std::exchange(applied_, {}); }

ExecResult Engine::process(const Packet& pkt) {
  if (optimizing()) {
    maybe_swap();
    maybe_start_compile();
  }
  const std::size_t worker = static_cast<std::size_t>(flow_hash(pkt) % cfg_.workers);
  ExecEnv env;
  env.cost = &cfg_.passes.cost;
  env.tables = &tables_;
  env.shadow_check = cfg_.shadow_check;
  if (artifact_) {
    env.synthesized = &artifact_->synthesized;
    env.guard_alive = [this](GuardId g) { return guard_alive(g); };
    env.record = [this, worker](SiteId s, const Key& k) { return record_sample(worker, s, k); };
  }
  const Program& prog = current();
  ExecResult r = execute(prog, pkt, env);
  ++report_.packets;
  report_.breakdown += r.cost;
  if (r.specialized) ++report_.specialized_packets;
  if (r.guard_fallback) ++report_.guard_fallbacks;
  report_.stale += r.stale;
  if (cfg_.keep_packet_log) {
    packet_log_.push_back(PacketLogEntry{seq_, prog.version, r.cost.total(), r.action.verdict, worker});
  }
  ++seq_;
  return r;
}

}  // namespace morpheus
