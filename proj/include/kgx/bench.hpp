#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "kgx/engine.hpp"
#include "kgx/exploration.hpp"

namespace kgx {

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t runs = 25;
  std::size_t max_steps = 4;
  Term root = Term::uri(std::string(kOwlThing));
  MembershipMode membership = MembershipMode::closure;
};

struct GeneratedQuery {
  Exploration exploration;
  PathQuery query;
  GroupedCounts exact;
};

// Random exploration paths: each run starts at B_0, picks a bar with
// probability proportional to its count and a legal expansion uniformly,
// and stops after max_steps expansions or at the first empty chart.
// Charts are deduplicated across runs by their compiled query.
inline std::vector<GeneratedQuery> generate_explorations(const GraphStore& store, const GeneratorConfig& cfg) {
  if (cfg.runs < 1 || cfg.max_steps < 1) throw Error(ErrorCode::invalid_argument, "runs and max_steps must be >= 1");
  if (!store.find(cfg.root)) throw Error(ErrorCode::unknown_term, "unknown root class <" + cfg.root.lexical + ">");
  std::vector<GeneratedQuery> out;
  std::set<std::string> seen;
  JoinCache cache;
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    Rng rng = Rng::stream(cfg.seed, run);
    Exploration e;
    e.root = cfg.root;
    e.membership = cfg.membership;
    for (std::size_t step = 0;; ++step) {
      PathQuery q = compile(e);
      cache.clear();
      GroupedCounts exact = evaluate(store, q, &cache);
      if (exact.groups.empty()) break;
      if (seen.insert(to_json(q).dump()).second) out.push_back({e, q, exact});
      if (step == cfg.max_steps) break;

      std::vector<std::pair<std::string, std::uint64_t>> bars;
      std::uint64_t total = 0;
      for (const auto& [a, n] : exact.groups) {
        bars.emplace_back(store.term(a).lexical, n);
        total += n;
      }
      std::sort(bars.begin(), bars.end());
      std::uint64_t r = rng.below(total);
      std::size_t pick = 0;
      while (r >= bars[pick].second) r -= bars[pick++].second;
      auto kinds = legal_expansions(current_bar_kind(e));
      e = expand(e, Term::uri(bars[pick].first), kinds[rng.below(kinds.size())]);
    }
  }
  return out;
}

// Mean over exact groups of |exact - est| / exact; missing estimates are 0.
inline double mean_error(const GroupedCounts& exact, const std::map<TermId, double>& est) {
  if (exact.groups.empty()) throw Error(ErrorCode::invalid_argument, "mean error of an empty result is undefined");
  double sum = 0;
  for (const auto& [a, n] : exact.groups) {
    auto it = est.find(a);
    double e = it == est.end() ? 0.0 : it->second;
    double x = static_cast<double>(n);
    sum += std::abs(x - e) / x;
  }
  return sum / static_cast<double>(exact.groups.size());
}

// Requests stop on its token once the given time has passed.
class Watchdog {
 public:
  explicit Watchdog(double secs)
      : thread_([this, secs](std::stop_token st) {
          std::mutex m;
          std::condition_variable_any cv;
          std::unique_lock lock(m);
          cv.wait_for(lock, st, std::chrono::duration<double>(secs), [] { return false; });
          if (!st.stop_requested()) source_.request_stop();
        }) {
    if (!(secs > 0)) source_.request_stop();
  }

  std::stop_token token() const { return source_.get_token(); }
  bool fired() const { return source_.stop_requested(); }

 private:
  std::stop_source source_;
  std::jthread thread_;
};

struct BenchQuery {
  std::string id;
  PathQuery query;
};

struct BenchConfig {
  std::vector<EngineKind> engines{EngineKind::exact, EngineKind::ctj, EngineKind::wj, EngineKind::aj};
  std::size_t repetitions = 3;
  std::uint64_t seed = 1;
  // Engine settings shared by all runs; engine and seed are overwritten.
  RunConfig run;
  double timeout_secs = 600;
  // Run WJ from every leaf order and keep the one with the least error area.
  bool order_sweep = false;
  // Run queries concurrently; only for sampling engines.
  bool parallel = false;
};

struct BenchRow {
  std::string query_id;
  EngineKind engine = EngineKind::exact;
  double second = 0;
  std::optional<double> mean_error;  // empty: TIMEOUT
  double walks = 0;
  double rejects = 0;
  double exact_ms = 0;
};

inline std::uint64_t run_seed(std::uint64_t seed, std::size_t query, std::size_t rep) {
  Rng r = Rng::stream(seed, (static_cast<std::uint64_t>(query) << 16) ^ rep);
  return r();
}

namespace detail {

struct Curve {
  std::vector<double> second, error, walks, rejects;
  double area() const {
    double a = 0;
    for (double e : error) a += e;
    return a;
  }
};

inline Curve sample_curve(const GraphStore& store, const PathQuery& q, const GroupedCounts& truth,
                          const BenchConfig& cfg, EngineKind engine, std::size_t qi,
                          std::optional<std::vector<std::size_t>> order) {
  Curve c;
  const std::size_t ticks = tick_count(cfg.run);
  c.second.assign(ticks, 0);
  c.error.assign(ticks, 0);
  c.walks.assign(ticks, 0);
  c.rejects.assign(ticks, 0);
  for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
    RunConfig rc = cfg.run;
    rc.engine = engine;
    rc.seed = run_seed(cfg.seed, qi, rep);
    if (order) rc.order = order;
    std::vector<Snapshot> snaps;
    run_query(store, q, rc, [&](const Snapshot& s) {
      snaps.push_back(s);
      return true;
    });
    for (std::size_t t = 0; t < ticks; ++t) {
      const Snapshot& s = snaps[std::min(t, snaps.size() - 1)];
      c.second[t] = static_cast<double>(t + 1) * rc.cadence_secs;
      c.error[t] += mean_error(truth, s.values);
      c.walks[t] += static_cast<double>(s.walks);
      c.rejects[t] += static_cast<double>(s.rejects);
    }
  }
  const double reps = static_cast<double>(cfg.repetitions);
  for (std::size_t t = 0; t < ticks; ++t) {
    c.error[t] /= reps;
    c.walks[t] /= reps;
    c.rejects[t] /= reps;
  }
  return c;
}

inline std::vector<BenchRow> bench_query(const GraphStore& store, const BenchQuery& bq, std::size_t qi,
                                         const BenchConfig& cfg) {
  std::vector<BenchRow> rows;
  const bool virtual_time = cfg.run.walks_per_tick > 0;
  auto timeout_rows = [&](EngineKind e) { rows.push_back(BenchRow{bq.id, e, 0, std::nullopt, 0, 0, 0}); };

  PreparedQuery pq = prepare(store, bq.query);
  GroupedCounts truth;
  {
    Watchdog dog(cfg.timeout_secs);
    JoinCache cache(cfg.run.cache_entries);
    try {
      truth = evaluate(store, pq, &cache, nullptr, dog.token());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::cancelled) throw;
      for (auto engine : cfg.engines) timeout_rows(engine);
      return rows;
    }
  }
  if (truth.groups.empty()) return rows;

  for (auto engine : cfg.engines) {
    if (!is_sampling(engine)) {
      double ms = 0, err = 0;
      bool timed_out = false;
      for (std::size_t rep = 0; rep < cfg.repetitions && !timed_out; ++rep) {
        Watchdog dog(cfg.timeout_secs);
        JoinCache cache(cfg.run.cache_entries);
        auto t0 = std::chrono::steady_clock::now();
        try {
          auto got = evaluate(store, pq, engine == EngineKind::ctj ? &cache : nullptr, nullptr, dog.token());
          ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
          err += mean_error(truth, exact_snapshot(got, 0).values);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::cancelled) throw;
          timed_out = true;
        }
      }
      if (timed_out) {
        timeout_rows(engine);
        continue;
      }
      const double reps = static_cast<double>(cfg.repetitions);
      rows.push_back(BenchRow{bq.id, engine, 0, err / reps, 0, 0, virtual_time ? 0.0 : ms / reps});
      continue;
    }
    Curve best;
    if (engine == EngineKind::wj && cfg.order_sweep && pq.satisfiable) {
      bool first = true;
      for (auto leaf : leaf_patterns(pq.patterns)) {
        Curve c = sample_curve(store, bq.query, truth, cfg, engine, qi, connected_order(pq.patterns, leaf));
        if (first || c.area() < best.area()) best = std::move(c);
        first = false;
      }
    } else {
      best = sample_curve(store, bq.query, truth, cfg, engine, qi, std::nullopt);
    }
    for (std::size_t t = 0; t < best.error.size(); ++t) {
      rows.push_back(BenchRow{bq.id, engine, best.second[t], best.error[t], best.walks[t], best.rejects[t], 0});
    }
  }
  return rows;
}

}  // namespace detail

// Error report rows, in query order then engine order.
inline std::vector<BenchRow> run_benchmark(const GraphStore& store, const std::vector<BenchQuery>& queries,
                                           const BenchConfig& cfg) {
  if (queries.empty()) throw Error(ErrorCode::invalid_argument, "no queries to benchmark");
  if (cfg.repetitions < 1) throw Error(ErrorCode::invalid_argument, "repetitions must be >= 1");
  if (cfg.parallel) {
    for (auto e : cfg.engines) {
      if (!is_sampling(e)) throw Error(ErrorCode::invalid_argument, "--parallel is only allowed for sampling engines");
    }
  }
  std::vector<std::vector<BenchRow>> per(queries.size());
  if (cfg.parallel) {
    std::vector<std::future<std::vector<BenchRow>>> jobs;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      jobs.push_back(std::async(std::launch::async, [&, i] { return detail::bench_query(store, queries[i], i, cfg); }));
    }
    for (std::size_t i = 0; i < queries.size(); ++i) per[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < queries.size(); ++i) per[i] = detail::bench_query(store, queries[i], i, cfg);
  }
  std::vector<BenchRow> rows;
  for (auto& p : per) rows.insert(rows.end(), p.begin(), p.end());
  return rows;
}

inline std::vector<BenchQuery> bench_queries(const std::vector<GeneratedQuery>& generated) {
  std::vector<BenchQuery> out;
  for (std::size_t i = 0; i < generated.size(); ++i) out.push_back({"q" + std::to_string(i + 1), generated[i].query});
  return out;
}

inline void write_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
  out << "query_id,engine,second,mean_error,walks,rejects,exact_ms\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string err = "TIMEOUT";
    if (r.mean_error) {
      std::snprintf(buf, sizeof buf, "%.6f", *r.mean_error);
      err = buf;
    }
    std::snprintf(buf, sizeof buf, "%s,%s,%g,%s,%.1f,%.1f,%.3f\n", r.query_id.c_str(), to_string(r.engine).c_str(),
                  r.second, err.c_str(), r.walks, r.rejects, r.exact_ms);
    out << buf;
  }
}

}  // namespace kgx
