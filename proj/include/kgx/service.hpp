#pragma once

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include "kgx/engine.hpp"
#include "kgx/exploration.hpp"

namespace kgx {

struct ServiceConfig {
  std::string bind_addr = "127.0.0.1:8080";
  EngineKind default_engine = EngineKind::aj;
  double tipping_threshold = 10000;
  double budget_secs = 9;
  double cadence_secs = 1;
  std::size_t threads = 1;
  std::chrono::seconds ttl{30 * 60};
  double min_coverage = 0.01;

  // DATA_PATH is read separately; see load_datasets.
  static ServiceConfig from_env() {
    ServiceConfig c;
    if (const char* v = std::getenv("BIND_ADDR")) c.bind_addr = v;
    if (const char* v = std::getenv("DEFAULT_ENGINE")) c.default_engine = engine_from_string(v);
    if (const char* v = std::getenv("TIPPING_THRESHOLD")) c.tipping_threshold = std::stod(v);
    if (const char* v = std::getenv("BUDGET_SECS")) c.budget_secs = std::stod(v);
    return c;
  }
};

struct Dataset {
  std::string name;
  GraphStore store;
};

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::dataset_not_found:
    case ErrorCode::session_not_found:
    case ErrorCode::unknown_term: return 404;
    case ErrorCode::internal: return 500;
    default: return 400;
  }
}

inline nlohmann::json error_json(const Error& e) {
  return {{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}}};
}

// Text after the last '#' or '/', or the whole URI.
inline std::string uri_label(const std::string& uri) {
  auto pos = uri.find_last_of("#/");
  if (pos == std::string::npos || pos + 1 == uri.size()) return uri;
  return uri.substr(pos + 1);
}

namespace detail {

// Latest snapshot of a session's current run. Runs write, handlers read.
struct RunBoard {
  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t generation = 0;
  std::uint64_t seq = 0;  // bumps on every publish, across runs
  bool has = false;
  Snapshot snap;
  std::string error;
  // What the current run computes; read by renderers under the lock.
  CompiledChart chart;
  Exploration exploration;
  std::optional<double> focus_size;  // |U(B)| of the expanded bar
  EngineKind engine = EngineKind::aj;
};

struct Session {
  std::string id;
  std::shared_ptr<const Dataset> data;
  EngineKind engine = EngineKind::aj;
  std::mutex op;  // serializes expansions
  Exploration exploration;  // guarded by op
  std::shared_ptr<RunBoard> board = std::make_shared<RunBoard>();
  std::jthread run;
  std::atomic<std::int64_t> touched{0};
};

inline std::int64_t now_secs() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace detail

class Service {
 public:
  explicit Service(ServiceConfig cfg = {}) : cfg_(std::move(cfg)) {}

  ~Service() {
    std::lock_guard lock(mu_);
    sessions_.clear();
  }

  const ServiceConfig& config() const { return cfg_; }

  void add_dataset(std::string name, GraphStore store) {
    if (store.closure_predicate() == kNoTerm && store.subclass_of() != kNoTerm) {
      store = materialize_subclass_closure(store, store.subclass_of());
    }
    auto d = std::make_shared<Dataset>(Dataset{name, std::move(store)});
    std::lock_guard lock(mu_);
    datasets_[std::move(name)] = std::move(d);
  }

  // A file becomes one dataset named after its stem; a directory adds every
  // .nt file in it.
  void load_datasets(const std::string& path) {
    namespace fs = std::filesystem;
    auto add = [&](const fs::path& p) { add_dataset(p.stem().string(), load_ntriples_file(p.string())); };
    if (fs::is_directory(path)) {
      for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".nt") add(entry.path());
      }
    } else {
      add(path);
    }
  }

  std::vector<std::string> datasets() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [n, d] : datasets_) out.push_back(n);
    return out;
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  // POST /sessions
  nlohmann::json create_session(const nlohmann::json& body, double min_coverage) {
    std::string name = field<std::string>(body, "dataset");
    std::shared_ptr<const Dataset> data;
    {
      std::lock_guard lock(mu_);
      auto it = datasets_.find(name);
      if (it == datasets_.end()) throw Error(ErrorCode::dataset_not_found, "unknown dataset '" + name + "'");
      data = it->second;
    }
    auto s = std::make_shared<detail::Session>();
    s->data = data;
    s->engine = body.contains("engine") ? engine_from_string(field<std::string>(body, "engine")) : cfg_.default_engine;
    s->exploration.root = Term::uri(body.contains("root_class") ? field<std::string>(body, "root_class")
                                                                : std::string(kOwlThing));
    if (!data->store.find(s->exploration.root)) {
      throw Error(ErrorCode::unknown_term, "unknown root class <" + s->exploration.root.lexical + ">");
    }
    s->id = new_id();
    s->touched = detail::now_secs();
    std::uint64_t gen = start_run(*s);
    {
      std::lock_guard lock(mu_);
      sessions_[s->id] = s;
    }
    return {{"session_id", s->id}, {"chart", first_chart(*s, gen, min_coverage)}};
  }

  // POST /sessions/{id}/expand
  nlohmann::json expand(const std::string& id, const nlohmann::json& body, double min_coverage) {
    auto s = session(id);
    std::lock_guard op(s->op);
    Exploration e = s->exploration;
    if (body.contains("from_step")) {
      auto keep = field<std::size_t>(body, "from_step");
      if (keep > e.steps.size()) throw Error(ErrorCode::invalid_argument, "from_step beyond the exploration");
      e.steps.resize(keep);
    }
    std::string category = field<std::string>(body, "category");
    auto kind = expansion_kind_from_string(field<std::string>(body, "kind"));
    // Focus size of the clicked bar as last shown, before the run is replaced.
    std::optional<double> focus;
    if (e.steps.size() == s->exploration.steps.size()) {
      std::lock_guard lock(s->board->mu);
      if (s->board->has) {
        if (auto id_ = s->data->store.find(Term::uri(category))) {
          auto it = s->board->snap.values.find(*id_);
          if (it != s->board->snap.values.end()) focus = it->second;
        }
      }
    }
    e = kgx::expand(e, Term::uri(category), kind);
    if (body.contains("filter") && !body.at("filter").is_null()) e = apply_filter(e, parse_filter(body.at("filter")));
    auto chart = compile_chart(e);
    if (body.contains("engine")) s->engine = engine_from_string(field<std::string>(body, "engine"));
    s->exploration = std::move(e);
    s->touched = detail::now_secs();
    std::uint64_t gen = start_run(*s, std::move(chart), focus);
    return first_chart(*s, gen, min_coverage);
  }

  // GET /sessions/{id}/chart
  nlohmann::json chart(const std::string& id, double min_coverage) {
    auto s = session(id);
    s->touched = detail::now_secs();
    std::lock_guard lock(s->board->mu);
    return render(*s, *s->board, min_coverage);
  }

  // Waits until the current run publishes past `seq` or the run generation
  // changes. Returns {response, seq, generation, done}.
  struct StreamEvent {
    nlohmann::json chart;
    std::uint64_t seq = 0;
    std::uint64_t generation = 0;
    bool done = false;
    bool ready = false;
  };

  StreamEvent next_event(const std::string& id, std::uint64_t generation, std::uint64_t seq, double min_coverage,
                         std::chrono::milliseconds wait) {
    auto s = session(id);
    s->touched = detail::now_secs();
    auto& b = *s->board;
    std::unique_lock lock(b.mu);
    b.cv.wait_for(lock, wait, [&] { return b.generation != generation || (b.has && b.seq > seq); });
    StreamEvent ev;
    ev.generation = b.generation;
    ev.seq = b.seq;
    if (b.generation != generation) {
      ev.done = true;  // superseded: the stream ends without the new run
      return ev;
    }
    if (b.has && b.seq > seq) {
      ev.ready = true;
      ev.chart = render(*s, b, min_coverage);
      ev.done = b.snap.done || !b.error.empty();
    }
    return ev;
  }

  std::uint64_t current_generation(const std::string& id) {
    auto s = session(id);
    std::lock_guard lock(s->board->mu);
    return s->board->generation;
  }

  // Drops sessions idle longer than the TTL.
  std::size_t reap() {
    std::vector<std::shared_ptr<detail::Session>> dead;
    {
      std::lock_guard lock(mu_);
      auto cutoff = detail::now_secs() - cfg_.ttl.count();
      for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (it->second->touched < cutoff) {
          dead.push_back(it->second);
          it = sessions_.erase(it);
        } else {
          ++it;
        }
      }
    }
    return dead.size();
  }

  void install(httplib::Server& http) {
    auto guard = [](httplib::Response& res, auto&& fn) {
      try {
        res.set_content(fn().dump(), "application/json");
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(error_json(e).dump(), "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(error_json(Error(ErrorCode::invalid_argument, e.what())).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(error_json(Error(ErrorCode::internal, e.what())).dump(), "application/json");
      }
    };
    http.Get("/datasets", [this, guard](const httplib::Request&, httplib::Response& res) {
      guard(res, [&] { return nlohmann::json{{"datasets", datasets()}}; });
    });
    http.Post("/sessions", [this, guard](const httplib::Request& req, httplib::Response& res) {
      guard(res, [&] { return create_session(parse_body(req), coverage_param(req)); });
    });
    http.Post(R"(/sessions/([^/]+)/expand)", [this, guard](const httplib::Request& req, httplib::Response& res) {
      guard(res, [&] { return expand(req.matches[1], parse_body(req), coverage_param(req)); });
    });
    http.Get(R"(/sessions/([^/]+)/chart)", [this, guard](const httplib::Request& req, httplib::Response& res) {
      guard(res, [&] { return chart(req.matches[1], coverage_param(req)); });
    });
    http.Get(R"(/sessions/([^/]+)/chart/stream)", [this, guard](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      double cov = 0;
      std::uint64_t gen = 0;
      try {
        cov = coverage_param(req);
        gen = current_generation(id);
      } catch (...) {
        guard(res, [&]() -> nlohmann::json { throw; });
        return;
      }
      auto seq = std::make_shared<std::uint64_t>(0);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, id, cov, gen, seq](std::size_t, httplib::DataSink& sink) {
        StreamEvent ev;
        try {
          ev = next_event(id, gen, *seq, cov, std::chrono::milliseconds(500));
        } catch (const Error&) {
          sink.done();
          return true;
        }
        if (ev.ready) {
          *seq = ev.seq;
          std::string msg = "event: chart\ndata: " + ev.chart.dump() + "\n\n";
          if (!sink.write(msg.data(), msg.size())) return false;
        } else if (!ev.done) {
          static const std::string ping = ": keep-alive\n\n";
          if (!sink.write(ping.data(), ping.size())) return false;
        }
        if (ev.done) sink.done();
        return true;
      });
    });
  }

  // Serves until stop() from another thread; reaps idle sessions meanwhile.
  void serve(httplib::Server& http) {
    install(http);
    auto colon = cfg_.bind_addr.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::invalid_argument, "BIND_ADDR must be host:port");
    std::string host = cfg_.bind_addr.substr(0, colon);
    int port = std::stoi(cfg_.bind_addr.substr(colon + 1));
    std::jthread reaper([this](std::stop_token st) {
      std::mutex m;
      std::condition_variable_any cv;
      std::unique_lock lock(m);
      while (!cv.wait_for(lock, st, std::chrono::seconds(60), [] { return false; })) {
        if (st.stop_requested()) break;
        reap();
      }
    });
    if (!http.listen(host, port)) throw Error(ErrorCode::invalid_argument, "cannot listen on " + cfg_.bind_addr);
  }

 private:
  template <class T>
  static T field(const nlohmann::json& body, const char* key) {
    if (!body.is_object() || !body.contains(key)) {
      throw Error(ErrorCode::invalid_argument, std::string("missing field '") + key + "'");
    }
    return body.at(key).get<T>();
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    return nlohmann::json::parse(req.body);
  }

  double coverage_param(const httplib::Request& req) const {
    if (!req.has_param("min_coverage")) return cfg_.min_coverage;
    try {
      double v = std::stod(req.get_param_value("min_coverage"));
      if (v >= 0 && v <= 1) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::invalid_argument, "min_coverage must be a number in [0, 1]");
  }

  // Plain strings are URIs; objects use the query term format.
  static FilterSet parse_filter(const nlohmann::json& j) {
    if (!j.is_array()) throw Error(ErrorCode::invalid_argument, "filter must be an array");
    FilterSet f;
    for (const auto& t : j) {
      if (t.is_string()) f.push_back(Term::uri(t.get<std::string>()));
      else f.push_back(filter_from_json(nlohmann::json::array({t})).front());
    }
    return f;
  }

  std::string new_id() {
    std::lock_guard lock(mu_);
    static const char* hex = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 2; ++i) {
      auto x = id_rng_();
      for (int k = 0; k < 16; ++k) id += hex[(x >> (4 * k)) & 0xF];
    }
    return id;
  }

  std::shared_ptr<detail::Session> session(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::session_not_found, "unknown session '" + id + "'");
    return it->second;
  }

  std::uint64_t start_run(detail::Session& s) { return start_run(s, compile_chart(s.exploration), std::nullopt); }

  // Cancels the current run and starts one for `chart`. The cancelled run
  // can no longer publish: its generation is stale.
  std::uint64_t start_run(detail::Session& s, CompiledChart chart, std::optional<double> focus) {
    std::uint64_t gen;
    {
      std::lock_guard lock(s.board->mu);
      gen = ++s.board->generation;
      s.board->has = false;
      s.board->error.clear();
      s.board->snap = Snapshot{};
      s.board->chart = chart;
      s.board->exploration = s.exploration;
      s.board->focus_size = focus;
      s.board->engine = s.engine;
      s.board->cv.notify_all();
    }
    if (s.run.joinable()) {
      s.run.request_stop();
      s.run.join();
    }
    RunConfig cfg;
    cfg.engine = s.engine;
    cfg.budget_secs = cfg_.budget_secs;
    cfg.cadence_secs = cfg_.cadence_secs;
    cfg.tipping.threshold = cfg_.tipping_threshold;
    cfg.threads = cfg_.threads;
    cfg.seed = gen;
    auto board = s.board;
    auto data = s.data;
    s.run = std::jthread([board, data, cfg, gen, query = chart.query](std::stop_token st) {
      auto publish = [&](const Snapshot& snap) {
        std::lock_guard lock(board->mu);
        if (st.stop_requested() || board->generation != gen) return false;
        board->snap = snap;
        board->has = true;
        ++board->seq;
        board->cv.notify_all();
        return true;
      };
      try {
        run_query(data->store, query, cfg, publish, st);
      } catch (const std::exception& e) {
        std::lock_guard lock(board->mu);
        if (board->generation != gen) return;
        const auto* err = dynamic_cast<const Error*>(&e);
        if (err && err->code() == ErrorCode::cancelled) return;
        board->error = e.what();
        board->snap.done = true;
        board->has = true;
        ++board->seq;
        board->cv.notify_all();
      }
    });
    return gen;
  }

  // Response for a fresh run: its first snapshot, or a pending chart when
  // none arrives within about one cadence.
  nlohmann::json first_chart(detail::Session& s, std::uint64_t gen, double min_coverage) {
    auto& b = *s.board;
    std::unique_lock lock(b.mu);
    b.cv.wait_for(lock, std::chrono::duration<double>(cfg_.cadence_secs + 0.5),
                  [&] { return b.generation != gen || b.has; });
    return render(s, b, min_coverage);
  }

  // Called with the board locked.
  nlohmann::json render(const detail::Session& s, const detail::RunBoard& b, double min_coverage) const {
    const auto& store = s.data->store;
    const bool property = b.chart.chart_kind == ChartKind::property_chart;
    std::vector<std::pair<double, std::string>> order;
    for (const auto& [id, v] : b.snap.values) order.emplace_back(v, store.term(id).lexical);
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    nlohmann::json bars = nlohmann::json::array();
    for (const auto& [v, uri] : order) {
      nlohmann::json bar = {{"category", uri}, {"label", uri_label(uri)}, {"value", v}, {"is_estimate", b.snap.estimate}};
      if (property && b.focus_size && *b.focus_size > 0) {
        double cov = v / *b.focus_size;
        if (cov < min_coverage) continue;
        bar["coverage"] = cov;
      }
      bars.push_back(std::move(bar));
    }
    nlohmann::json run = {{"engine", to_string(b.engine)},
                          {"elapsed_secs", b.snap.estimate ? b.snap.elapsed : b.snap.exact_ms / 1000.0},
                          {"walks", b.snap.walks},
                          {"done", b.has && b.snap.done}};
    if (!b.error.empty()) run["error"] = b.error;
    return {{"chart_kind", std::string(to_string(b.chart.chart_kind))},
            {"bar_kind", std::string(to_string(b.chart.bar_kind))},
            {"step", b.exploration.steps.size()},
            {"exploration", to_json(b.exploration)},
            {"bars", bars},
            {"run", run}};
  }

  ServiceConfig cfg_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
  std::map<std::string, std::shared_ptr<detail::Session>> sessions_;
  std::mt19937_64 id_rng_{std::random_device{}()};
};

}  // namespace kgx
