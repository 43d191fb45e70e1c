#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgx/dictionary.hpp"
#include "kgx/ntriples.hpp"

namespace kgx {

enum class Position : std::uint8_t { s = 0, p = 1, o = 2 };

struct Triple {
  TermId s = kNoTerm;
  TermId p = kNoTerm;
  TermId o = kNoTerm;

  TermId at(Position pos) const {
    switch (pos) {
      case Position::s: return s;
      case Position::p: return p;
      case Position::o: return o;
    }
    return kNoTerm;
  }
  TermId at(std::size_t i) const { return at(static_cast<Position>(i)); }

  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::size_t h = t.s;
    hash_combine(h, t.p);
    hash_combine(h, t.o);
    return h;
  }
};

// The four trie orders that are materialized. osp/sop access patterns are
// served by one of these plus a residual filter.
enum class IndexOrder : std::uint8_t { spo, ops, pso, pos };

inline constexpr std::array<IndexOrder, 4> kAllOrders = {IndexOrder::spo, IndexOrder::ops,
                                                         IndexOrder::pso, IndexOrder::pos};

inline constexpr std::array<Position, 3> levels_of(IndexOrder order) {
  switch (order) {
    case IndexOrder::spo: return {Position::s, Position::p, Position::o};
    case IndexOrder::ops: return {Position::o, Position::p, Position::s};
    case IndexOrder::pso: return {Position::p, Position::s, Position::o};
    case IndexOrder::pos: return {Position::p, Position::o, Position::s};
  }
  return {Position::s, Position::p, Position::o};
}

inline std::string_view to_string(IndexOrder order) {
  switch (order) {
    case IndexOrder::spo: return "spo";
    case IndexOrder::ops: return "ops";
    case IndexOrder::pso: return "pso";
    case IndexOrder::pos: return "pos";
  }
  return "?";
}

namespace detail {

// First index r in [lo, hi) with key(r) >= k, searching exponentially from lo.
template <class KeyAt>
std::size_t gallop_lower(std::size_t lo, std::size_t hi, TermId k, KeyAt&& key_at) {
  if (lo >= hi || key_at(lo) >= k) return lo;
  std::size_t step = 1;
  std::size_t prev = lo;
  std::size_t cur = lo + 1;
  while (cur < hi && key_at(cur) < k) {
    prev = cur;
    step <<= 1;
    cur = lo + step;
  }
  if (cur > hi) cur = hi;
  // key_at(prev) < k and (cur == hi or key_at(cur) >= k)
  std::size_t a = prev + 1;
  std::size_t b = cur;
  while (a < b) {
    std::size_t mid = a + (b - a) / 2;
    if (key_at(mid) < k) a = mid + 1;
    else b = mid;
  }
  return a;
}

}  // namespace detail

// One trie realized as an array of triples sorted by the order's key.
class TripleIndex {
 public:
  TripleIndex() = default;

  TripleIndex(IndexOrder order, std::vector<Triple> rows) : order_(order), rows_(std::move(rows)) {
    auto lv = levels_of(order_);
    std::sort(rows_.begin(), rows_.end(), [lv](const Triple& a, const Triple& b) {
      for (auto pos : lv) {
        if (a.at(pos) != b.at(pos)) return a.at(pos) < b.at(pos);
      }
      return false;
    });
  }

  IndexOrder order() const { return order_; }
  std::span<const Triple> rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  TermId key(std::size_t row, std::size_t level) const { return rows_[row].at(levels_of(order_)[level]); }

  // Rows whose leading levels equal `prefix`, as [lo, hi) row offsets.
  std::pair<std::size_t, std::size_t> bounds(std::span<const TermId> prefix) const {
    std::size_t lo = 0;
    std::size_t hi = rows_.size();
    for (std::size_t level = 0; level < prefix.size() && lo < hi; ++level) {
      auto k = prefix[level];
      auto key_at = [&](std::size_t r) { return key(r, level); };
      std::size_t a = detail::gallop_lower(lo, hi, k, key_at);
      std::size_t b = (k == kNoTerm) ? hi : detail::gallop_lower(a, hi, k + 1, key_at);
      if (a < hi && key(a, level) != k) b = a;
      lo = a;
      hi = std::max(a, b);
    }
    return {lo, hi};
  }

  std::span<const Triple> range(std::span<const TermId> prefix) const {
    auto [lo, hi] = bounds(prefix);
    return std::span<const Triple>(rows_).subspan(lo, hi - lo);
  }

 private:
  IndexOrder order_ = IndexOrder::spo;
  std::vector<Triple> rows_;
};

// Level iterator over a TripleIndex: each level yields the sorted distinct
// keys below the current path. seek() gallops from the current position.
class TrieIterator {
 public:
  TrieIterator(const TripleIndex& index, std::span<const TermId> prefix = {},
               std::uint64_t* seek_counter = nullptr)
      : index_(&index), base_level_(prefix.size()), seeks_(seek_counter) {
    if (prefix.size() >= 3) throw Error(ErrorCode::invalid_argument, "trie prefix must be shorter than 3");
    auto [lo, hi] = index.bounds(prefix);
    base_lo_ = lo;
    base_hi_ = hi;
  }

  // Enters the next level, positioned at its first key.
  void open() {
    std::size_t lo;
    std::size_t hi;
    if (depth_ == 0) {
      lo = base_lo_;
      hi = base_hi_;
    } else {
      const Frame& f = frames_[depth_ - 1];
      lo = f.pos;
      hi = f.end;
    }
    if (base_level_ + depth_ >= 3) throw Error(ErrorCode::invalid_argument, "trie has no deeper level");
    Frame& nf = frames_[depth_++];
    nf.lo = lo;
    nf.hi = hi;
    nf.pos = lo;
    settle();
  }

  void up() {
    if (depth_ == 0) throw Error(ErrorCode::invalid_argument, "trie iterator already at root");
    --depth_;
  }

  bool at_end() const { return frames_[depth_ - 1].pos >= frames_[depth_ - 1].hi; }

  TermId key() const { return index_->key(frames_[depth_ - 1].pos, level()); }

  void next() {
    Frame& f = frames_[depth_ - 1];
    f.pos = f.end;
    settle();
  }

  void seek(TermId k) {
    if (seeks_) ++*seeks_;
    Frame& f = frames_[depth_ - 1];
    std::size_t lv = level();
    f.pos = detail::gallop_lower(f.pos, f.hi, k, [&](std::size_t r) { return index_->key(r, lv); });
    settle();
  }

  // Trie level (0..2) of the frame the iterator currently sits on.
  std::size_t level() const { return base_level_ + depth_ - 1; }
  std::size_t open_depth() const { return depth_; }

  // Rows below the current key.
  std::span<const Triple> block() const {
    const Frame& f = frames_[depth_ - 1];
    return index_->rows().subspan(f.pos, f.end - f.pos);
  }

  std::size_t level_size_remaining() const {
    const Frame& f = frames_[depth_ - 1];
    return f.hi - f.pos;
  }

 private:
  struct Frame {
    std::size_t lo = 0, hi = 0, pos = 0, end = 0;
  };

  void settle() {
    Frame& f = frames_[depth_ - 1];
    if (f.pos >= f.hi) {
      f.pos = f.end = f.hi;
      return;
    }
    std::size_t lv = level();
    TermId k = index_->key(f.pos, lv);
    f.end = (k == kNoTerm) ? f.hi
                           : detail::gallop_lower(f.pos, f.hi, k + 1,
                                                  [&](std::size_t r) { return index_->key(r, lv); });
  }

  const TripleIndex* index_;
  std::size_t base_level_;
  std::size_t base_lo_ = 0, base_hi_ = 0;
  std::array<Frame, 3> frames_{};
  std::size_t depth_ = 0;
  std::uint64_t* seeks_;
};

struct PatternStats {
  std::uint64_t match_count = 0;
  // Distinct values per variable position; nullopt for constant positions.
  std::array<std::optional<std::uint64_t>, 3> distinct{};

  std::uint64_t distinct_at(Position pos) const {
    return distinct[static_cast<std::size_t>(pos)].value_or(0);
  }
};

// Immutable dictionary-encoded triple store with the four trie indexes.
class GraphStore {
 public:
  GraphStore() : stats_cache_(std::make_unique<StatsCache>()) {}

  static GraphStore build(Dictionary dict, std::vector<Triple> triples,
                          std::vector<std::string> warnings = {}) {
    GraphStore g;
    g.dict_ = std::move(dict);
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    for (auto order : kAllOrders) {
      g.indexes_[static_cast<std::size_t>(order)] = TripleIndex(order, triples);
    }
    g.rdf_type_ = g.dict_.find_uri(kRdfType).value_or(kNoTerm);
    g.subclass_of_ = g.dict_.find_uri(kRdfsSubClassOf).value_or(kNoTerm);
    g.closure_ = g.dict_.find_uri(kClosurePredicate).value_or(kNoTerm);
    g.warnings_ = std::move(warnings);
    return g;
  }

  GraphStore(GraphStore&&) noexcept = default;
  GraphStore& operator=(GraphStore&&) noexcept = default;

  GraphStore clone() const {
    GraphStore g;
    g.dict_ = dict_;
    g.indexes_ = indexes_;
    g.rdf_type_ = rdf_type_;
    g.subclass_of_ = subclass_of_;
    g.closure_ = closure_;
    g.subclass_used_ = subclass_used_;
    g.warnings_ = warnings_;
    return g;
  }

  const Dictionary& dictionary() const { return dict_; }
  const Term& term(TermId id) const { return dict_.term(id); }
  std::optional<TermId> find_uri(std::string_view uri) const { return dict_.find_uri(uri); }
  std::optional<TermId> find(const Term& t) const { return dict_.find(t); }

  const TripleIndex& index(IndexOrder order) const { return indexes_[static_cast<std::size_t>(order)]; }
  std::span<const Triple> triples() const { return index(IndexOrder::spo).rows(); }
  std::size_t size() const { return triples().size(); }

  bool contains(const Triple& t) const {
    auto rows = triples();
    return std::binary_search(rows.begin(), rows.end(), t);
  }

  TermId rdf_type() const { return rdf_type_; }
  TermId subclass_of() const { return subclass_of_; }
  // kNoTerm until materialize_subclass_closure ran.
  TermId closure_predicate() const { return closure_; }
  // Subclass predicate the closure was built from (kNoTerm if none).
  TermId closure_source() const { return subclass_used_; }

  const std::vector<std::string>& warnings() const { return warnings_; }

  // Memoized statistics keyed by a pattern shape string; see pattern_stats().
  template <class Compute>
  PatternStats cached_stats(const std::string& key, Compute&& compute) const {
    {
      std::lock_guard lock(stats_cache_->mu);
      auto it = stats_cache_->map.find(key);
      if (it != stats_cache_->map.end()) return it->second;
    }
    PatternStats s = compute();
    std::lock_guard lock(stats_cache_->mu);
    stats_cache_->map.emplace(key, s);
    return s;
  }

 private:
  friend GraphStore materialize_subclass_closure(const GraphStore&, TermId);

  struct StatsCache {
    std::mutex mu;
    std::unordered_map<std::string, PatternStats> map;
  };

  Dictionary dict_;
  std::array<TripleIndex, 4> indexes_;
  TermId rdf_type_ = kNoTerm;
  TermId subclass_of_ = kNoTerm;
  TermId closure_ = kNoTerm;
  TermId subclass_used_ = kNoTerm;
  std::vector<std::string> warnings_;
  std::unique_ptr<StatsCache> stats_cache_;
};

struct LoadOptions {
  // Input triples using the reserved closure predicate are rejected.
  bool reject_reserved = true;
};

inline GraphStore load_ntriples(std::istream& in, const LoadOptions& opts = {}) {
  Dictionary dict;
  std::vector<Triple> triples;
  std::size_t line = 0;
  parse_ntriples(in, [&](Term s, Term p, Term o) {
    ++line;
    if (opts.reject_reserved && (s.lexical == kClosurePredicate || p.lexical == kClosurePredicate ||
                                 (o.is_uri() && o.lexical == kClosurePredicate))) {
      throw Error(ErrorCode::parse_error, "reserved URI " + std::string(kClosurePredicate) + " in input");
    }
    Triple t{dict.intern(s), dict.intern(p), dict.intern(o)};
    triples.push_back(t);
  });
  return GraphStore::build(std::move(dict), std::move(triples));
}

inline GraphStore load_ntriples_file(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_argument, "cannot open " + path);
  return load_ntriples(in, opts);
}

// Returns a store in which the reserved closure predicate holds the
// reflexive-transitive closure of `subclass_prop` among class nodes (objects
// of rdf:type and endpoints of subclass edges). Instance typing is untouched.
// Cycles terminate at the fixpoint; their members are reported in warnings().
inline GraphStore materialize_subclass_closure(const GraphStore& store, TermId subclass_prop) {
  Dictionary dict = store.dictionary();
  TermId closure = store.closure_predicate();
  if (closure == kNoTerm) {
    closure = dict.intern(Term::uri(std::string(kClosurePredicate)));
  }
  if (closure + 1 != dict.size()) {
    throw Error(ErrorCode::internal, "closure predicate must carry the largest term id");
  }

  std::vector<Triple> triples;
  triples.reserve(store.size());
  std::set<TermId> classes;
  std::unordered_map<TermId, std::vector<TermId>> supers;
  for (const Triple& t : store.triples()) {
    if (t.p == closure) continue;  // recomputed below
    triples.push_back(t);
    if (t.p == store.rdf_type() && dict.term(t.o).is_uri()) classes.insert(t.o);
    if (t.p == subclass_prop && subclass_prop != kNoTerm && dict.term(t.o).is_uri()) {
      classes.insert(t.s);
      classes.insert(t.o);
      supers[t.s].push_back(t.o);
    }
  }

  std::vector<std::string> warnings = store.warnings();
  std::erase_if(warnings, [](const std::string& w) { return w.rfind("subclass cycle", 0) == 0; });
  std::vector<TermId> cycle_members;
  for (TermId c : classes) {
    // BFS upwards; reflexive pair included up front.
    std::vector<TermId> stack{c};
    std::set<TermId> seen{c};
    bool on_cycle = false;
    while (!stack.empty()) {
      TermId u = stack.back();
      stack.pop_back();
      auto it = supers.find(u);
      if (it == supers.end()) continue;
      for (TermId v : it->second) {
        if (v == c) on_cycle = true;
        if (seen.insert(v).second) stack.push_back(v);
      }
    }
    for (TermId d : seen) triples.push_back({c, closure, d});
    if (on_cycle) cycle_members.push_back(c);
  }
  if (!cycle_members.empty()) {
    std::string w = "subclass cycle among:";
    for (TermId c : cycle_members) w += " <" + dict.term(c).lexical + ">";
    warnings.push_back(std::move(w));
  }

  GraphStore out = GraphStore::build(std::move(dict), std::move(triples), std::move(warnings));
  out.subclass_used_ = subclass_prop;
  return out;
}

}  // namespace kgx
