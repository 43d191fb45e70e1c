#include <gtest/gtest.h>

#include <sstream>

#include "kgx/bench.hpp"
#include "kgx/synthetic.hpp"
#include "test_util.hpp"

using namespace kgx;
using namespace kgx::testing;

namespace {

GroupedCounts counts(std::map<TermId, std::uint64_t> g) {
  GroupedCounts c;
  c.groups = std::move(g);
  return c;
}

const GraphStore& small_synthetic() {
  static const GraphStore g = [] {
    SynthConfig c;
    c.triples = 100'000;
    return synthetic_store(c);
  }();
  return g;
}

std::string csv_of(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  write_csv(rows, out);
  return out.str();
}

}  // namespace

TEST(MeanError, Examples) {
  auto exact = counts({{1, 10}, {2, 20}});
  EXPECT_DOUBLE_EQ(mean_error(exact, {{1, 10.0}, {2, 20.0}}), 0.0);
  EXPECT_DOUBLE_EQ(mean_error(exact, {}), 1.0);
  EXPECT_DOUBLE_EQ(mean_error(exact, {{1, 15.0}, {2, 10.0}}), 0.5);
  // Groups only the estimate knows about do not count.
  EXPECT_DOUBLE_EQ(mean_error(exact, {{1, 10.0}, {2, 20.0}, {3, 5.0}}), 0.0);
  EXPECT_GT(mean_error(exact, {{1, 10.0}, {2, 20.5}}), 0.0);
  EXPECT_THROW(mean_error(counts({}), {}), Error);
}

TEST(Synthetic, SizeAndDeterminism) {
  SynthConfig c;
  c.triples = 20'000;
  std::ostringstream a, b;
  write_synthetic(c, a);
  write_synthetic(c, b);
  EXPECT_EQ(a.str(), b.str());
  auto g = synthetic_store(c);
  // Raw triples, excluding the materialized closure.
  std::size_t raw = 0;
  for (const auto& t : g.triples()) raw += t.p != g.closure_predicate();
  EXPECT_NEAR(static_cast<double>(raw), 20'000.0, 1'000.0);
  c.seed = 2;
  std::ostringstream d;
  write_synthetic(c, d);
  EXPECT_NE(a.str(), d.str());
}

TEST(Synthetic, SelectiveWorkloadIsNonEmpty) {
  SynthConfig c;
  c.triples = 100'000;
  const auto& g = small_synthetic();
  auto work = selective_workload(c);
  EXPECT_GE(work.size(), 10u);
  for (const auto& e : work) {
    EXPECT_LE(e.steps.size(), 4u);
    EXPECT_FALSE(evaluate(g, compile(e)).groups.empty()) << to_json(e).dump();
  }
}

TEST(Generator, DeterministicAndNonEmpty) {
  const auto& g = small_synthetic();
  GeneratorConfig cfg;
  cfg.seed = 11;
  auto a = generate_explorations(g, cfg);
  auto b = generate_explorations(g, cfg);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].exploration, b[i].exploration);
    EXPECT_LE(a[i].exploration.steps.size(), cfg.max_steps);
    // Independent check with the uncached engine.
    auto exact = evaluate(g, a[i].query);
    EXPECT_FALSE(exact.groups.empty());
    EXPECT_EQ(exact.groups, a[i].exact.groups);
    distinct.insert(to_json(a[i].query).dump());
  }
  EXPECT_EQ(distinct.size(), a.size());
}

TEST(Generator, EmptyRootGivesNoQueries) {
  auto g = store_from(nt(u("x"), std::string(kRdfType), u("Leaf")) + nt(u("Leaf"), std::string(kRdfsSubClassOf), u("Root")));
  // Root exists but nothing is typed with a subclass of Leaf.
  GeneratorConfig cfg;
  cfg.root = Term::uri(u("Leaf"));
  EXPECT_TRUE(generate_explorations(materialize_subclass_closure(g, g.subclass_of()), cfg).empty());
  cfg.root = Term::uri(u("Missing"));
  EXPECT_THROW(generate_explorations(g, cfg), Error);
  cfg.runs = 0;
  EXPECT_THROW(generate_explorations(g, cfg), Error);
}

TEST(Benchmark, ExactRowsAndDegenerateAj) {
  const auto& g = small_synthetic();
  GeneratorConfig gc;
  gc.runs = 4;
  auto queries = bench_queries(generate_explorations(g, gc));
  queries.resize(std::min<std::size_t>(queries.size(), 4));
  BenchConfig cfg;
  cfg.repetitions = 1;
  cfg.run.budget_secs = 2;
  cfg.run.walks_per_tick = 20;
  cfg.run.tipping.threshold = std::numeric_limits<double>::infinity();
  auto rows = run_benchmark(g, queries, cfg);
  std::size_t exact_rows = 0, aj_first = 0;
  for (const auto& r : rows) {
    ASSERT_TRUE(r.mean_error);
    if (!is_sampling(r.engine)) {
      ++exact_rows;
      EXPECT_EQ(*r.mean_error, 0.0);
      EXPECT_EQ(r.exact_ms, 0.0);  // virtual time
    }
    if (r.engine == EngineKind::aj && r.second == 1) {
      ++aj_first;
      EXPECT_EQ(*r.mean_error, 0.0);
    }
  }
  EXPECT_EQ(exact_rows, 2 * queries.size());
  EXPECT_EQ(aj_first, queries.size());
}

TEST(Benchmark, RealTimeExactRowsReportWallTime) {
  const auto& g = small_synthetic();
  GeneratorConfig gc;
  gc.runs = 1;
  auto queries = bench_queries(generate_explorations(g, gc));
  BenchConfig cfg;
  cfg.engines = {EngineKind::exact, EngineKind::ctj};
  cfg.repetitions = 1;
  auto rows = run_benchmark(g, {queries.front()}, cfg);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(*r.mean_error, 0.0);
    EXPECT_GT(r.exact_ms, 0.0);
  }
}

TEST(Benchmark, CsvIsDeterministicInVirtualTime) {
  const auto& g = small_synthetic();
  GeneratorConfig gc;
  gc.runs = 3;
  auto queries = bench_queries(generate_explorations(g, gc));
  BenchConfig cfg;
  cfg.repetitions = 2;
  cfg.seed = 5;
  cfg.run.budget_secs = 3;
  cfg.run.walks_per_tick = 100;
  cfg.run.tipping.threshold = 50;
  auto a = csv_of(run_benchmark(g, queries, cfg));
  auto b = csv_of(run_benchmark(g, queries, cfg));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')), "query_id,engine,second,mean_error,walks,rejects,exact_ms");
  cfg.seed = 6;
  EXPECT_NE(csv_of(run_benchmark(g, queries, cfg)), a);
}

TEST(Benchmark, TimeoutRowsFlagged) {
  const auto& g = small_synthetic();
  GeneratorConfig gc;
  gc.runs = 1;
  auto queries = bench_queries(generate_explorations(g, gc));
  BenchConfig cfg;
  cfg.timeout_secs = 0;
  cfg.engines = {EngineKind::exact, EngineKind::aj};
  auto rows = run_benchmark(g, {queries.front()}, cfg);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_FALSE(r.mean_error);
  auto csv = csv_of(rows);
  EXPECT_NE(csv.find(",exact,0,TIMEOUT,"), std::string::npos) << csv;
}

TEST(Benchmark, OrderSweepAndParallel) {
  const auto& g = small_synthetic();
  SynthConfig sc;
  auto work = selective_workload(sc);
  std::vector<BenchQuery> queries{{"a", compile(work[2])}, {"b", compile(work[3])}};
  BenchConfig cfg;
  cfg.engines = {EngineKind::wj};
  cfg.repetitions = 1;
  cfg.run.budget_secs = 2;
  cfg.run.walks_per_tick = 200;
  cfg.order_sweep = true;
  auto swept = run_benchmark(g, queries, cfg);
  cfg.order_sweep = false;
  auto planned = run_benchmark(g, queries, cfg);
  ASSERT_EQ(swept.size(), planned.size());
  double area_swept = 0, area_planned = 0;
  for (std::size_t i = 0; i < swept.size(); ++i) {
    area_swept += *swept[i].mean_error;
    area_planned += *planned[i].mean_error;
  }
  EXPECT_LE(area_swept, area_planned + 1e-12);

  cfg.parallel = true;
  EXPECT_EQ(csv_of(run_benchmark(g, queries, cfg)), csv_of(planned));
  cfg.engines = {EngineKind::exact};
  EXPECT_THROW(run_benchmark(g, queries, cfg), Error);
}
