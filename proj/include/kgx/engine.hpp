#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "kgx/audit_join.hpp"
#include "kgx/lftj.hpp"
#include "kgx/rdf_space.hpp"
#include "kgx/wander_join.hpp"

namespace kgx {

enum class EngineKind { exact, ctj, wj, aj };

inline std::string to_string(EngineKind e) {
  switch (e) {
    case EngineKind::exact: return "exact";
    case EngineKind::ctj: return "ctj";
    case EngineKind::wj: return "wj";
    case EngineKind::aj: return "aj";
  }
  return "exact";
}

inline EngineKind engine_from_string(const std::string& s) {
  if (s == "exact") return EngineKind::exact;
  if (s == "ctj") return EngineKind::ctj;
  if (s == "wj") return EngineKind::wj;
  if (s == "aj") return EngineKind::aj;
  throw Error(ErrorCode::invalid_argument, "unknown engine " + s);
}

inline bool is_sampling(EngineKind e) { return e == EngineKind::wj || e == EngineKind::aj; }

struct Snapshot {
  double elapsed = 0;  // nominal seconds since start: tick * cadence
  std::map<TermId, double> values;
  std::uint64_t walks = 0;
  std::uint64_t rejects = 0;
  std::uint64_t aborted = 0;
  double exact_ms = 0;
  bool done = false;
  bool estimate = false;
};

struct RunConfig {
  EngineKind engine = EngineKind::aj;
  double budget_secs = 9;
  double cadence_secs = 1;
  std::uint64_t seed = 1;
  TippingConfig tipping;
  bool step_counting = false;
  std::uint64_t enumeration_cap = 50'000'000;
  bool probability_cache = true;
  std::optional<std::vector<std::size_t>> order;
  std::size_t threads = 1;
  // When positive, time is virtual: each tick is this many walks.
  std::uint64_t walks_per_tick = 0;
  std::size_t cache_entries = std::size_t{1} << 22;
};

// Return false to stop the run.
using SnapshotSink = std::function<bool(const Snapshot&)>;
using WalkFn = std::function<WalkResult(Rng&)>;

// Accumulated estimator state; group estimates are C_a / N.
struct EstimatorState {
  std::uint64_t n = 0;
  std::uint64_t walks = 0;
  std::uint64_t rejects = 0;
  std::uint64_t aborted = 0;
  std::map<TermId, double> sums;

  void add(const WalkResult& r, bool step_counting) {
    if (r.status == WalkStatus::aborted) {
      ++aborted;
      return;
    }
    ++walks;
    n += step_counting ? std::max<std::uint64_t>(r.steps, 1) : 1;
    if (r.status == WalkStatus::rejected || r.status == WalkStatus::duplicate) ++rejects;
    for (const auto& [a, v] : r.values) sums[a] += v;
  }

  Snapshot snapshot(double elapsed, bool done) const {
    Snapshot s;
    s.elapsed = elapsed;
    s.walks = walks;
    s.rejects = rejects;
    s.aborted = aborted;
    s.done = done;
    s.estimate = true;
    if (n > 0) {
      for (const auto& [a, v] : sums) {
        if (v > 0) s.values[a] = v / static_cast<double>(n);
      }
    }
    return s;
  }
};

inline std::size_t tick_count(const RunConfig& cfg) {
  if (!(cfg.cadence_secs > 0) || !(cfg.budget_secs > 0)) throw Error(ErrorCode::invalid_argument, "budget and cadence must be positive");
  auto n = static_cast<std::size_t>(std::floor(cfg.budget_secs / cfg.cadence_secs + 1e-9));
  return std::max<std::size_t>(n, 1);
}

// Drives walkers and reports a snapshot per cadence tick. make_walker is
// called once per worker and must return an independent walker. Walk i
// always draws from stream (seed, i).
inline Snapshot run_sampler(const std::function<WalkFn(const std::atomic<bool>*)>& make_walker, const RunConfig& cfg,
                            const SnapshotSink& sink, std::stop_token stop = {}) {
  const std::size_t ticks = tick_count(cfg);
  const bool step_counting = cfg.step_counting && cfg.engine == EngineKind::aj;
  std::atomic<bool> halt{false};
  Snapshot last;

  if (cfg.walks_per_tick > 0) {
    auto walk = make_walker(&halt);
    EstimatorState st;
    std::uint64_t index = 0;
    for (std::size_t t = 1; t <= ticks; ++t) {
      for (std::uint64_t j = 0; j < cfg.walks_per_tick && !stop.stop_requested(); ++j) {
        Rng rng = Rng::stream(cfg.seed, index++);
        st.add(walk(rng), step_counting);
      }
      bool done = t == ticks || stop.stop_requested();
      last = st.snapshot(static_cast<double>(t) * cfg.cadence_secs, done);
      if (!sink(last) || done) {
        last.done = true;
        break;
      }
    }
    return last;
  }

  EstimatorState shared;
  std::mutex mu;
  std::atomic<std::uint64_t> next_index{0};
  const std::size_t workers = std::max<std::size_t>(cfg.threads, 1);
  std::vector<WalkFn> walkers;
  for (std::size_t w = 0; w < workers; ++w) walkers.push_back(make_walker(&halt));
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        while (!halt.load(std::memory_order_relaxed)) {
          Rng rng = Rng::stream(cfg.seed, next_index.fetch_add(1));
          auto r = walkers[w](rng);
          std::lock_guard lock(mu);
          if (halt.load(std::memory_order_relaxed) && r.status == WalkStatus::aborted) break;
          shared.add(r, step_counting);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        halt = true;
      }
    });
  }
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t t = 1; t <= ticks; ++t) {
    auto due = start + std::chrono::duration<double>(static_cast<double>(t) * cfg.cadence_secs);
    while (std::chrono::steady_clock::now() < due && !stop.stop_requested() && !halt.load()) {
      auto left = std::chrono::duration_cast<std::chrono::steady_clock::duration>(due - std::chrono::steady_clock::now());
      std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(left, std::chrono::milliseconds(20)));
    }
    bool done = t == ticks || stop.stop_requested() || halt.load();
    {
      std::lock_guard lock(mu);
      last = shared.snapshot(static_cast<double>(t) * cfg.cadence_secs, done);
    }
    if (!sink(last) || done) {
      last.done = true;
      break;
    }
  }
  halt = true;
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return last;
}

inline Snapshot exact_snapshot(const GroupedCounts& counts, double ms) {
  Snapshot s;
  for (const auto& [a, n] : counts.groups) s.values[a] = static_cast<double>(n);
  s.exact_ms = ms;
  s.done = true;
  return s;
}

// Runs one query on the configured engine. Exact engines report a single
// final snapshot; sampling engines report one per tick.
inline Snapshot run_query(const GraphStore& store, const PathQuery& query, const RunConfig& cfg,
                          const SnapshotSink& sink, std::stop_token stop = {}) {
  auto prepared = std::make_shared<const PreparedQuery>(prepare(store, query));
  if (cfg.engine == EngineKind::exact || cfg.engine == EngineKind::ctj) {
    auto t0 = std::chrono::steady_clock::now();
    JoinCache cache(cfg.cache_entries);
    auto counts = evaluate(store, *prepared, cfg.engine == EngineKind::ctj ? &cache : nullptr, nullptr, stop);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    auto s = exact_snapshot(counts, ms);
    sink(s);
    return s;
  }
  if (!prepared->satisfiable) {
    return run_sampler([](const std::atomic<bool>*) -> WalkFn { return [](Rng&) { return WalkResult{}; }; }, cfg, sink, stop);
  }
  auto order = plan_walk_order(store, *prepared, cfg.order);
  auto make = [&, prepared, order](const std::atomic<bool>* halt) -> WalkFn {
    auto space = std::make_shared<RdfJoinSpace>(store, *prepared, order);
    if (cfg.engine == EngineKind::wj) {
      auto w = std::make_shared<WanderJoin<RdfJoinSpace>>(*space, prepared->distinct);
      return [space, w](Rng& rng) { return w->walk(rng); };
    }
    AuditOptions<Triple> o;
    o.tipping = cfg.tipping;
    o.distinct = prepared->distinct;
    o.step_counting = cfg.step_counting;
    o.enumeration_cap = cfg.enumeration_cap;
    o.probability_cache = cfg.probability_cache;
    auto a = std::make_shared<AuditJoin<RdfJoinSpace>>(*space, o);
    a->set_cancel(halt);
    return [space, a](Rng& rng) { return a->walk(rng); };
  };
  return run_sampler(make, cfg, sink, stop);
}

}  // namespace kgx
