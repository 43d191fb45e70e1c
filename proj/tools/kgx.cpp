#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "kgx/bench.hpp"
#include "kgx/service.hpp"
#include "kgx/synthetic.hpp"

using namespace kgx;
using nlohmann::json;

namespace {

GraphStore load_store(const std::string& path, const std::string& subclass_prop) {
  auto g = load_ntriples_file(path);
  auto sub = g.find_uri(subclass_prop);
  if (!sub) return g;
  return materialize_subclass_closure(g, *sub);
}

json read_json(const std::string& path) {
  if (path == "-") return json::parse(std::cin);
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_argument, "cannot open " + path);
  return json::parse(in);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string part; std::getline(in, part, sep);) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// Engine flags shared by query and bench.
struct EngineFlags {
  double tipping_threshold = 10000;
  bool no_tipping = false;
  double budget = 9;
  double cadence = 1;
  std::uint64_t seed = 1;
  bool step_counting = false;
  std::uint64_t walks_per_tick = 0;
  std::size_t threads = 1;
  std::uint64_t enumeration_cap = 50'000'000;
  bool no_probability_cache = false;

  void attach(CLI::App* app) {
    app->add_option("--tipping-threshold", tipping_threshold, "Estimated suffix answers below which AJ tips");
    app->add_flag("--no-tipping", no_tipping, "Never tip (AJ behaves like WJ)");
    app->add_option("--budget-secs", budget, "Time budget per run");
    app->add_option("--cadence-secs", cadence, "Snapshot cadence");
    app->add_option("--seed", seed, "Random seed");
    app->add_flag("--fig7-step-counting", step_counting, "Count N once per sampling step");
    app->add_option("--walks-per-tick", walks_per_tick, "Virtual time: walks per tick, single-threaded");
    app->add_option("--threads", threads, "Sampling threads in real-time mode");
    app->add_option("--enumeration-cap", enumeration_cap, "Exact suffix work per walk before aborting it (0: none)");
    app->add_flag("--no-probability-cache", no_probability_cache, "Recompute Pr(a,b) on every use");
  }

  RunConfig config() const {
    RunConfig c;
    c.tipping.threshold = tipping_threshold;
    c.tipping.enabled = !no_tipping;
    c.budget_secs = budget;
    c.cadence_secs = cadence;
    c.seed = seed;
    c.step_counting = step_counting;
    c.walks_per_tick = walks_per_tick;
    c.threads = threads;
    c.enumeration_cap = enumeration_cap;
    c.probability_cache = !no_probability_cache;
    return c;
  }
};

json snapshot_json(const GraphStore& g, const Snapshot& s) {
  json values = json::object();
  for (const auto& [a, v] : s.values) values[g.term(a).lexical] = v;
  return {{"elapsed_secs", s.elapsed}, {"values", values}, {"walks", s.walks}, {"rejects", s.rejects},
          {"aborted", s.aborted}, {"exact_ms", s.exact_ms}, {"done", s.done}, {"estimate", s.estimate}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph exploration engine"};
  app.require_subcommand(1);
  std::string subclass_prop = std::string(kRdfsSubClassOf);

  // load
  auto* load = app.add_subcommand("load", "Load N-Triples and report store statistics");
  std::string load_input, load_root = std::string(kOwlThing);
  load->add_option("--input", load_input, "N-Triples file")->required();
  load->add_option("--subclass-prop", subclass_prop, "Subclass predicate for the closure");
  load->add_option("--root-class", load_root, "Root class for the initial chart");

  // query
  auto* query = app.add_subcommand("query", "Run a path query or exploration chart");
  std::string q_data, q_file, q_engine = "aj";
  bool q_distinct = false, q_no_distinct = false;
  std::vector<std::size_t> q_order;
  EngineFlags q_flags;
  query->add_option("--data", q_data, "N-Triples file")->required();
  query->add_option("--query", q_file, "PathQuery or Exploration JSON file, - for stdin")->required();
  query->add_option("--engine", q_engine, "exact, ctj, wj or aj");
  query->add_flag("--distinct", q_distinct, "Count distinct beta values");
  query->add_flag("--no-distinct", q_no_distinct, "Count answers");
  query->add_option("--order", q_order, "Walk order as pattern indexes");
  query->add_option("--subclass-prop", subclass_prop, "Subclass predicate for the closure");
  q_flags.attach(query);

  // bench
  auto* bench = app.add_subcommand("bench", "Error-over-time report for random explorations");
  std::string b_data, b_engines = "exact,ctj,wj,aj", b_out = "-", b_queries, b_queries_out, b_workload = "generated";
  std::string b_root = std::string(kOwlThing);
  std::size_t b_runs = 25, b_steps = 4, b_reps = 3;
  double b_timeout = 600;
  bool b_sweep = false, b_parallel = false, b_no_distinct = false;
  EngineFlags b_flags;
  bench->add_option("--data", b_data, "N-Triples file")->required();
  bench->add_option("--engines", b_engines, "Comma-separated engines");
  bench->add_option("--runs", b_runs, "Generator runs");
  bench->add_option("--max-steps", b_steps, "Expansions per run");
  bench->add_option("--repetitions", b_reps, "Repetitions per query and engine");
  bench->add_option("--root-class", b_root, "Root class");
  bench->add_option("--queries", b_queries, "JSON array of PathQuery objects instead of generated ones");
  bench->add_option("--workload", b_workload, "generated or selective (synthetic layer paths)");
  bench->add_option("--queries-out", b_queries_out, "Write the benchmarked queries as JSON");
  bench->add_option("--timeout-secs", b_timeout, "Exact evaluation timeout per query");
  bench->add_flag("--order-sweep", b_sweep, "WJ: best of all walk orders");
  bench->add_flag("--parallel", b_parallel, "Run queries concurrently (sampling engines only)");
  bench->add_flag("--no-distinct", b_no_distinct, "Benchmark the non-distinct variant of each query");
  bench->add_option("--out", b_out, "CSV output, - for stdout");
  bench->add_option("--subclass-prop", subclass_prop, "Subclass predicate for the closure");
  b_flags.attach(bench);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a layered synthetic graph");
  SynthConfig sc;
  std::string s_out = "-";
  synth->add_option("--out", s_out, "N-Triples output, - for stdout");
  synth->add_option("--triples", sc.triples, "Approximate triple count");
  synth->add_option("--seed", sc.seed, "Random seed");
  synth->add_option("--layers", sc.layers, "Number of layers");
  synth->add_option("--classes", sc.classes_per_layer, "Leaf classes per layer");
  synth->add_option("--predicates", sc.predicates_per_layer, "Predicates per layer hop");
  synth->add_option("--fanout", sc.fanout, "Edges per linked node");
  synth->add_option("--selectivity", sc.selectivity, "Share of nodes past layer 0 that link onwards");
  synth->add_option("--shrink", sc.shrink, "Size ratio between consecutive layers");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string sv_data, sv_bind, sv_engine;
  double sv_threshold = -1, sv_budget = -1, sv_cadence = -1;
  serve->add_option("--data", sv_data, "N-Triples file or directory (default: DATA_PATH)");
  serve->add_option("--bind", sv_bind, "host:port (default: BIND_ADDR or 127.0.0.1:8080)");
  serve->add_option("--engine", sv_engine, "Default engine (default: DEFAULT_ENGINE or aj)");
  serve->add_option("--tipping-threshold", sv_threshold, "Default: TIPPING_THRESHOLD or 10000");
  serve->add_option("--budget-secs", sv_budget, "Default: BUDGET_SECS or 9");
  serve->add_option("--cadence-secs", sv_cadence, "Snapshot cadence");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*load) {
      auto g = load_store(load_input, subclass_prop);
      std::size_t closure = 0;
      for (const auto& t : g.triples()) closure += t.p == g.closure_predicate();
      json out = {{"triples", g.size() - closure}, {"closure_triples", closure}, {"terms", g.dictionary().size()},
                  {"warnings", g.warnings()}};
      if (g.find(Term::uri(load_root))) {
        auto chart = evaluate(g, initial_chart(g, Term::uri(load_root)));
        json bars = json::object();
        for (const auto& [a, n] : chart.groups) bars[g.term(a).lexical] = n;
        out["initial_chart"] = bars;
      } else {
        out["warnings"].push_back("root class <" + load_root + "> not found");
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*query) {
      auto g = load_store(q_data, subclass_prop);
      json j = read_json(q_file);
      PathQuery pq = j.contains("patterns") ? path_query_from_json(j) : compile(exploration_from_json(j));
      if (q_distinct && q_no_distinct) throw Error(ErrorCode::invalid_argument, "--distinct and --no-distinct conflict");
      if (q_distinct) pq.distinct = true;
      if (q_no_distinct) pq.distinct = false;
      RunConfig cfg = q_flags.config();
      cfg.engine = engine_from_string(q_engine);
      if (!q_order.empty()) cfg.order = q_order;
      run_query(g, pq, cfg, [&](const Snapshot& s) {
        std::cout << snapshot_json(g, s).dump() << std::endl;
        return true;
      });
      return 0;
    }
    if (*bench) {
      auto g = load_store(b_data, subclass_prop);
      std::vector<BenchQuery> queries;
      if (!b_queries.empty()) {
        json arr = read_json(b_queries);
        for (std::size_t i = 0; i < arr.size(); ++i) queries.push_back({"q" + std::to_string(i + 1), path_query_from_json(arr[i])});
      } else if (b_workload == "selective") {
        SynthConfig layout;
        for (const auto& e : selective_workload(layout, b_steps)) {
          queries.push_back({"q" + std::to_string(queries.size() + 1), compile(e)});
        }
      } else if (b_workload == "generated") {
        GeneratorConfig gc;
        gc.seed = b_flags.seed;
        gc.runs = b_runs;
        gc.max_steps = b_steps;
        gc.root = Term::uri(b_root);
        queries = bench_queries(generate_explorations(g, gc));
      } else {
        throw Error(ErrorCode::invalid_argument, "unknown workload " + b_workload);
      }
      if (b_no_distinct) {
        for (auto& q : queries) q.query.distinct = false;
      }
      if (!b_queries_out.empty()) {
        json arr = json::array();
        for (const auto& q : queries) arr.push_back(to_json(q.query));
        std::ofstream(b_queries_out) << arr.dump(2) << "\n";
      }
      BenchConfig cfg;
      cfg.engines.clear();
      for (const auto& e : split(b_engines, ',')) cfg.engines.push_back(engine_from_string(e));
      cfg.repetitions = b_reps;
      cfg.seed = b_flags.seed;
      cfg.run = b_flags.config();
      cfg.timeout_secs = b_timeout;
      cfg.order_sweep = b_sweep;
      cfg.parallel = b_parallel;
      auto rows = run_benchmark(g, queries, cfg);
      if (b_out == "-") {
        write_csv(rows, std::cout);
      } else {
        std::ofstream out(b_out);
        if (!out) throw Error(ErrorCode::invalid_argument, "cannot write " + b_out);
        write_csv(rows, out);
      }
      return 0;
    }
    if (*synth) {
      if (s_out == "-") {
        write_synthetic(sc, std::cout);
      } else {
        std::ofstream out(s_out);
        if (!out) throw Error(ErrorCode::invalid_argument, "cannot write " + s_out);
        write_synthetic(sc, out);
      }
      return 0;
    }
    if (*serve) {
      ServiceConfig cfg = ServiceConfig::from_env();
      if (!sv_bind.empty()) cfg.bind_addr = sv_bind;
      if (!sv_engine.empty()) cfg.default_engine = engine_from_string(sv_engine);
      if (sv_threshold > 0) cfg.tipping_threshold = sv_threshold;
      if (sv_budget > 0) cfg.budget_secs = sv_budget;
      if (sv_cadence > 0) cfg.cadence_secs = sv_cadence;
      if (sv_data.empty()) {
        const char* env = std::getenv("DATA_PATH");
        if (!env) throw Error(ErrorCode::invalid_argument, "no dataset: pass --data or set DATA_PATH");
        sv_data = env;
      }
      Service service(cfg);
      service.load_datasets(sv_data);
      httplib::Server http;
      std::cerr << "serving " << service.datasets().size() << " dataset(s) on " << cfg.bind_addr << "\n";
      service.serve(http);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
