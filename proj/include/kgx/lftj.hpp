#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <set>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgx/group_key.hpp"
#include "kgx/query.hpp"

namespace kgx {

// Exact per-group answer: distinct beta count per alpha, or the number of
// result rows per alpha when distinct is false. Groups with count 0 are
// absent.
struct GroupedCounts {
  std::map<TermId, std::uint64_t> groups;
  bool distinct = true;

  bool operator==(const GroupedCounts&) const = default;
};

struct JoinStats {
  std::uint64_t seeks = 0;
  std::uint64_t answers = 0;  // full bindings enumerated (cache hits excluded)
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
};

using SuffixSummary = std::unordered_map<GroupKey, std::uint64_t, GroupKeyHash>;

struct TermVectorHash {
  std::size_t operator()(const std::vector<TermId>& v) const {
    std::size_t h = v.size();
    for (auto x : v) hash_combine(h, x);
    return h;
  }
};

// Suffix summaries keyed by the adhesion values of a depth; one hashtable per
// depth. Bound to the query it was first used with.
class JoinCache {
 public:
  explicit JoinCache(std::size_t max_entries = 1u << 22) : max_entries_(max_entries) {}

  std::size_t size() const { return entries_; }
  std::uint64_t hits() const { return hits_; }
  std::size_t max_entries() const { return max_entries_; }

  void clear() {
    tables_.clear();
    entries_ = 0;
    fingerprint_.clear();
  }

 private:
  template <class>
  friend class LftjEngine;

  using Table = std::unordered_map<std::vector<TermId>, SuffixSummary, TermVectorHash>;

  void bind(const std::string& fingerprint, std::size_t depths) {
    if (fingerprint_ != fingerprint) {
      clear();
      fingerprint_ = fingerprint;
    }
    if (tables_.size() < depths) tables_.resize(depths);
  }

  std::size_t max_entries_;
  std::size_t entries_ = 0;
  std::uint64_t hits_ = 0;
  std::string fingerprint_;
  std::vector<Table> tables_;
};

// A pattern as seen by LFTJ: an index order, its constant prefix, and the
// remaining levels, each either a variable depth or a constant to check.
struct LftjAccess {
  IndexOrder order = IndexOrder::spo;
  std::vector<TermId> prefix;
  struct Level {
    std::optional<std::size_t> depth;  // variable level
    TermId check = kNoTerm;            // constant level when depth is empty
  };
  std::vector<Level> levels;
};

struct LftjPlan {
  std::vector<std::string> variables;  // x_1..x_m
  std::vector<LftjAccess> access;      // per pattern
  std::vector<std::vector<std::size_t>> participants;  // per depth: pattern ids
  std::vector<std::vector<std::size_t>> adhesion;      // per depth: earlier depths
  std::vector<bool> cacheable;
  std::size_t alpha_depth = 0;
  std::size_t beta_depth = 0;
};

namespace detail {

inline std::optional<LftjAccess> access_for(const TriplePattern& p, const std::map<std::string, std::size_t>& depth) {
  std::optional<LftjAccess> best;
  std::size_t best_prefix = 0;
  for (auto order : kAllOrders) {
    auto lv = levels_of(order);
    LftjAccess a;
    a.order = order;
    bool leading = true;
    std::optional<std::size_t> last_depth;
    bool ok = true;
    for (auto pos : lv) {
      if (!p.is_var(pos)) {
        if (leading) a.prefix.push_back(p.constant(pos));
        else a.levels.push_back({std::nullopt, p.constant(pos)});
        continue;
      }
      leading = false;
      std::size_t d = depth.at(p.var(pos));
      if (last_depth && d <= *last_depth) {
        ok = false;
        break;
      }
      last_depth = d;
      a.levels.push_back({d, kNoTerm});
    }
    if (!ok) continue;
    if (!best || a.prefix.size() > best_prefix) {
      best_prefix = a.prefix.size();
      best = std::move(a);
    }
  }
  return best;
}

inline std::vector<std::vector<std::string>> candidate_variable_orders(const PreparedQuery& q) {
  std::vector<std::vector<std::string>> out;
  auto from_patterns = [&](const std::vector<std::size_t>& porder, bool reversed) {
    std::vector<std::string> vars;
    for (auto i : porder) {
      auto vs = q.patterns[i].variables();
      if (reversed) std::reverse(vs.begin(), vs.end());
      for (auto& v : vs) {
        if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
      }
    }
    return vars;
  };
  std::vector<std::size_t> compiled(q.patterns.size());
  std::iota(compiled.begin(), compiled.end(), 0);
  if (is_connected(q.patterns)) {
    out.push_back(from_patterns(connected_order(q.patterns, 0), false));
  }
  out.push_back(from_patterns(compiled, false));
  for (std::size_t start = 0; start < q.patterns.size(); ++start) {
    auto co = connected_order(q.patterns, start);
    out.push_back(from_patterns(co, false));
    out.push_back(from_patterns(co, true));
  }
  return out;
}

}  // namespace detail

// Variable order: first appearance along a connected pattern order starting
// at the first compiled pattern; alternatives are tried when a pattern
// cannot be served by the four built orders.
inline LftjPlan plan_lftj(const PreparedQuery& q) {
  for (const auto& vars : detail::candidate_variable_orders(q)) {
    std::map<std::string, std::size_t> depth;
    for (std::size_t i = 0; i < vars.size(); ++i) depth[vars[i]] = i;
    LftjPlan plan;
    plan.variables = vars;
    bool ok = true;
    for (const auto& p : q.patterns) {
      auto a = detail::access_for(p, depth);
      if (!a) {
        ok = false;
        break;
      }
      plan.access.push_back(std::move(*a));
    }
    if (!ok) continue;
    const std::size_t m = vars.size();
    plan.participants.assign(m, {});
    for (std::size_t i = 0; i < plan.access.size(); ++i) {
      for (const auto& l : plan.access[i].levels) {
        if (l.depth) plan.participants[*l.depth].push_back(i);
      }
    }
    for (const auto& parts : plan.participants) {
      if (parts.size() > 8) throw Error(ErrorCode::invalid_query, "variable joins more than 8 patterns");
    }
    plan.adhesion.assign(m, {});
    plan.cacheable.assign(m, false);
    for (std::size_t d = 1; d < m; ++d) {
      std::set<std::size_t> a;
      for (const auto& acc : plan.access) {
        bool reaches = false;
        for (const auto& l : acc.levels) reaches = reaches || (l.depth && *l.depth >= d);
        if (!reaches) continue;
        for (const auto& l : acc.levels) {
          if (l.depth && *l.depth < d) a.insert(*l.depth);
        }
      }
      plan.adhesion[d].assign(a.begin(), a.end());
      plan.cacheable[d] = a.size() < d;
    }
    plan.alpha_depth = depth.at(q.alpha);
    plan.beta_depth = depth.at(q.beta);
    return plan;
  }
  throw Error(ErrorCode::invalid_query, "no variable order is served by the available indexes");
}

inline std::string query_fingerprint(const PreparedQuery& q) {
  std::string f = q.alpha + "|" + q.beta + "|" + (q.distinct ? "d" : "n") + "|";
  for (const auto& p : q.patterns) f += to_string(p) + ";";
  for (const auto& [v, ids] : q.filters) {
    f += v + "{";
    for (auto id : ids) f += std::to_string(id) + ",";
    f += "}";
  }
  return f;
}

template <class Store = GraphStore>
class LftjEngine {
 public:
  LftjEngine(const Store& store, const PreparedQuery& q, JoinCache* cache, JoinStats* stats, std::stop_token stop)
      : store_(store), q_(q), plan_(plan_lftj(q)), cache_(cache), stats_(stats), stop_(stop) {
    if (cache_) cache_->bind(query_fingerprint(q), plan_.variables.size());
    binding_.assign(plan_.variables.size(), kNoTerm);
    for (std::size_t d = 0; d < plan_.variables.size(); ++d) {
      filters_.push_back(q.filter_for(plan_.variables[d]));
      bool pred = false;
      for (const auto& p : q.patterns) pred = pred || (p.is_var(Position::p) && p.var(Position::p) == plan_.variables[d]);
      predicate_var_.push_back(pred);
    }
    closure_ = store.closure_predicate();
    for (const auto& a : plan_.access) {
      iters_.emplace_back(store.index(a.order), std::span<const TermId>(a.prefix), &local_.seeks);
      next_level_.push_back(0);
    }
  }

  SuffixSummary run() {
    sinks_.push_back(Sink{0, {}});
    if (q_.satisfiable) descend(0);
    if (stats_) {
      stats_->seeks += local_.seeks;
      stats_->answers += local_.answers;
      stats_->cache_hits += local_.cache_hits;
      stats_->cache_misses += local_.cache_misses;
    }
    return std::move(sinks_.back().map);
  }

 private:
  struct Sink {
    std::size_t depth;
    SuffixSummary map;
  };

  GroupKey key_from(std::size_t from_depth) const {
    GroupKey k;
    if (plan_.alpha_depth >= from_depth) k.alpha = binding_[plan_.alpha_depth];
    if (q_.distinct && plan_.beta_depth >= from_depth) k.beta = binding_[plan_.beta_depth];
    return k;
  }

  // Completes the components of k bound in [lo, hi) from the current binding.
  GroupKey fill(GroupKey k, std::size_t lo, std::size_t hi) const {
    if (plan_.alpha_depth >= lo && plan_.alpha_depth < hi) k.alpha = binding_[plan_.alpha_depth];
    if (q_.distinct && plan_.beta_depth >= lo && plan_.beta_depth < hi) k.beta = binding_[plan_.beta_depth];
    return k;
  }

  void emit() {
    ++local_.answers;
    Sink& s = sinks_.back();
    s.map[key_from(s.depth)] += 1;
  }

  void merge_into_parent(const SuffixSummary& sub, std::size_t sub_depth) {
    Sink& parent = sinks_.back();
    for (const auto& [k, c] : sub) parent.map[fill(k, parent.depth, sub_depth)] += c;
  }

  void descend(std::size_t d) {
    if ((visits_++ & 0xFFF) == 0 && stop_.stop_requested()) throw Error(ErrorCode::cancelled, "cancelled");
    if (d == plan_.variables.size()) {
      emit();
      return;
    }
    if (cache_ && plan_.cacheable[d]) {
      std::vector<TermId> key;
      key.reserve(plan_.adhesion[d].size());
      for (auto a : plan_.adhesion[d]) key.push_back(binding_[a]);
      auto& table = cache_->tables_[d];
      if (auto it = table.find(key); it != table.end()) {
        ++local_.cache_hits;
        ++cache_->hits_;
        merge_into_parent(it->second, d);
        return;
      }
      ++local_.cache_misses;
      sinks_.push_back(Sink{d, {}});
      bind_depth(d);
      SuffixSummary sub = std::move(sinks_.back().map);
      sinks_.pop_back();
      merge_into_parent(sub, d);
      if (cache_->entries_ < cache_->max_entries_) {
        table.emplace(std::move(key), std::move(sub));
        ++cache_->entries_;
      }
      return;
    }
    bind_depth(d);
  }

  // Opens the constant check levels following a variable level.
  bool pass_checks(std::size_t pid, std::size_t& opened) {
    const auto& levels = plan_.access[pid].levels;
    auto& li = next_level_[pid];
    while (li < levels.size() && !levels[li].depth) {
      auto& it = iters_[pid];
      it.open();
      ++opened;
      ++li;
      it.seek(levels[li - 1].check);
      if (it.at_end() || it.key() != levels[li - 1].check) return false;
    }
    return true;
  }

  void undo_checks(std::size_t pid, std::size_t opened) {
    for (std::size_t i = 0; i < opened; ++i) {
      iters_[pid].up();
      --next_level_[pid];
    }
  }

  void on_value(std::size_t d, TermId v) {
    if (filters_[d] && !std::binary_search(filters_[d]->begin(), filters_[d]->end(), v)) return;
    // A variable predicate never matches the reserved closure triples.
    if (predicate_var_[d] && v == closure_) return;
    binding_[d] = v;
    const auto& parts = plan_.participants[d];
    std::array<std::size_t, 8> opened{};
    bool ok = true;
    std::size_t done = 0;
    for (; done < parts.size() && ok; ++done) ok = pass_checks(parts[done], opened[done]);
    if (ok) descend(d + 1);
    for (std::size_t i = 0; i < done; ++i) undo_checks(parts[i], opened[i]);
  }

  void bind_depth(std::size_t d) {
    const auto& parts = plan_.participants[d];
    for (auto pid : parts) {
      iters_[pid].open();
      ++next_level_[pid];
    }
    leapfrog(d, parts);
    for (auto pid : parts) {
      iters_[pid].up();
      --next_level_[pid];
    }
    binding_[d] = kNoTerm;
  }

  void leapfrog(std::size_t d, const std::vector<std::size_t>& parts) {
    const std::size_t k = parts.size();
    for (auto pid : parts) {
      if (iters_[pid].at_end()) return;
    }
    if (k == 1) {
      auto& it = iters_[parts[0]];
      for (; !it.at_end(); it.next()) on_value(d, it.key());
      return;
    }
    std::array<TrieIterator*, 8> its{};
    for (std::size_t i = 0; i < k; ++i) its[i] = &iters_[parts[i]];
    std::sort(its.begin(), its.begin() + static_cast<std::ptrdiff_t>(k), [](auto* a, auto* b) { return a->key() < b->key(); });
    std::size_t p = 0;
    TermId xmax = its[k - 1]->key();
    while (true) {
      TermId x = its[p]->key();
      if (x == xmax) {
        on_value(d, x);
        its[p]->next();
      } else {
        its[p]->seek(xmax);
      }
      if (its[p]->at_end()) return;
      xmax = its[p]->key();
      p = (p + 1) % k;
    }
  }

  const Store& store_;
  const PreparedQuery& q_;
  LftjPlan plan_;
  JoinCache* cache_;
  JoinStats* stats_;
  std::stop_token stop_;
  JoinStats local_;
  std::vector<TermId> binding_;
  std::vector<const std::vector<TermId>*> filters_;
  std::vector<bool> predicate_var_;
  TermId closure_ = kNoTerm;
  std::vector<TrieIterator> iters_;
  std::vector<std::size_t> next_level_;
  std::vector<Sink> sinks_;
  std::uint64_t visits_ = 0;
};

inline GroupedCounts to_grouped(const SuffixSummary& full, bool distinct) {
  GroupedCounts out;
  out.distinct = distinct;
  for (const auto& [k, c] : full) {
    if (c == 0) continue;
    out.groups[k.alpha] += distinct ? 1 : c;
  }
  return out;
}

inline GroupedCounts evaluate(const GraphStore& store, const PreparedQuery& q, JoinCache* cache = nullptr,
                              JoinStats* stats = nullptr, std::stop_token stop = {}) {
  LftjEngine<GraphStore> engine(store, q, cache, stats, stop);
  return to_grouped(engine.run(), q.distinct);
}

inline GroupedCounts evaluate(const GraphStore& store, const PathQuery& q, JoinCache* cache = nullptr,
                              JoinStats* stats = nullptr, std::stop_token stop = {}) {
  return evaluate(store, prepare(store, q), cache, stats, stop);
}

}  // namespace kgx
