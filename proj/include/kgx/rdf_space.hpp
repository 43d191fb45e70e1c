#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgx/join_space.hpp"
#include "kgx/pattern.hpp"
#include "kgx/query.hpp"

namespace kgx {

// Matches of one pattern, optionally keyed by the value at one variable
// position, restricted by value filters and never matching the reserved
// closure predicate through a variable. Served straight from an index range
// when possible, otherwise materialized per key on first use.
class PatternAccess {
 public:
  struct Filter {
    Position pos;
    const std::vector<TermId>* values;  // sorted
  };

  PatternAccess() = default;

  PatternAccess(const GraphStore& store, const TriplePattern& pat, std::optional<Position> key_pos,
                std::vector<Filter> filters)
      : store_(&store), pat_(pat), key_pos_(key_pos), filters_(std::move(filters)) {
    std::array<bool, 3> lead{};
    std::size_t nlead = 0;
    bool repeat = pat.variables().size() != static_cast<std::size_t>(pat.is_var(Position::s) + pat.is_var(Position::p) + pat.is_var(Position::o));
    for (std::size_t i = 0; i < 3; ++i) {
      auto pos = static_cast<Position>(i);
      if (!pat.is_var(pos)) {
        if (pat.constant(pos) == kNoTerm) empty_ = true;
        lead[i] = true;
      }
    }
    if (key_pos) lead[static_cast<std::size_t>(*key_pos)] = true;
    for (bool b : lead) nlead += b;
    const bool p_free = pat.is_var(Position::p) && !lead[static_cast<std::size_t>(Position::p)];
    closure_ = store.closure_predicate();
    direct_ = false;
    if (!repeat && filters_.empty()) {
      for (auto order : kAllOrders) {
        auto lv = levels_of(order);
        bool ok = true;
        for (std::size_t i = 0; i < nlead; ++i) ok = ok && lead[static_cast<std::size_t>(lv[i])];
        if (!ok) continue;
        if (p_free && closure_ != kNoTerm && lv[nlead] != Position::p) continue;
        direct_ = true;
        order_ = order;
        nlead_ = nlead;
        trim_ = p_free && closure_ != kNoTerm;
        break;
      }
    }
  }

  std::span<const Triple> lookup(TermId key) const {
    if (empty_) return {};
    if (key_pos_ && *key_pos_ == Position::p && key == closure_ && pat_.is_var(Position::p)) return {};
    if (direct_) return direct(key);
    auto k = key_pos_ ? key : 0;
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
    TriplePattern bound = pat_;
    if (key_pos_) {
      // Bind the key, and every other occurrence of the same variable.
      auto name = pat_.var(*key_pos_);
      for (std::size_t i = 0; i < 3; ++i) {
        auto pos = static_cast<Position>(i);
        if (pat_.is_var(pos) && pat_.var(pos) == name) bound.at(pos) = key;
      }
    }
    std::vector<Triple> rows;
    PatternMatch m(*store_, bound);
    m.for_each([&](const Triple& t) {
      if (pat_.is_var(Position::p) && t.p == closure_) return;
      for (const auto& f : filters_) {
        if (!std::binary_search(f.values->begin(), f.values->end(), t.at(f.pos))) return;
      }
      rows.push_back(t);
    });
    return memo_.emplace(k, std::move(rows)).first->second;
  }

  bool direct() const { return direct_; }

 private:
  std::span<const Triple> direct(TermId key) const {
    auto lv = levels_of(order_);
    std::array<TermId, 3> prefix{};
    for (std::size_t i = 0; i < nlead_; ++i) {
      prefix[i] = (key_pos_ && lv[i] == *key_pos_) ? key : pat_.constant(lv[i]);
    }
    const auto& index = store_->index(order_);
    auto rows = index.range(std::span<const TermId>(prefix.data(), nlead_));
    if (trim_ && !rows.empty()) {
      // Sorted by p at the next level; the closure predicate has the
      // largest id, so its rows form the tail.
      auto it = std::lower_bound(rows.begin(), rows.end(), closure_,
                                 [](const Triple& t, TermId c) { return t.p < c; });
      rows = rows.first(static_cast<std::size_t>(it - rows.begin()));
    }
    return rows;
  }

  const GraphStore* store_ = nullptr;
  TriplePattern pat_;
  std::optional<Position> key_pos_;
  std::vector<Filter> filters_;
  bool empty_ = false;
  bool direct_ = false;
  bool trim_ = false;
  IndexOrder order_ = IndexOrder::spo;
  std::size_t nlead_ = 0;
  TermId closure_ = kNoTerm;
  mutable std::unordered_map<TermId, std::vector<Triple>> memo_;
};

// A path query laid out as a join space: column k is pattern order[k];
// every later column shares exactly one variable with the earlier ones and
// hangs off the first column binding it. Not thread-safe; give each worker
// its own instance.
class RdfJoinSpace {
 public:
  using Tuple = Triple;

  RdfJoinSpace(const GraphStore& store, const PreparedQuery& q, std::vector<std::size_t> order)
      : store_(&store), q_(&q), order_(std::move(order)) {
    const std::size_t n = order_.size();
    {
      auto sorted = order_;
      std::sort(sorted.begin(), sorted.end());
      bool perm = sorted.size() == q.patterns.size();
      for (std::size_t i = 0; perm && i < n; ++i) perm = sorted[i] == i;
      if (!perm) throw Error(ErrorCode::invalid_argument, "walk order must list every pattern exactly once");
    }
    cols_.resize(n);
    std::unordered_map<std::string, std::size_t> binder;  // var -> first column
    for (std::size_t k = 0; k < n; ++k) {
      auto& c = cols_[k];
      c.pat = q.patterns[order_[k]];
      std::vector<std::string> shared;
      for (const auto& v : c.pat.variables()) {
        if (binder.count(v)) shared.push_back(v);
        else c.own.push_back(v);
      }
      if (k == 0 ? !shared.empty() : shared.size() != 1) {
        throw Error(ErrorCode::invalid_argument, "walk order step " + std::to_string(k + 1) + " must share exactly one variable with earlier steps");
      }
      if (k > 0) {
        c.link = shared[0];
        c.parent = binder.at(c.link);
        c.link_pos = *c.pat.position_of(c.link);
        c.parent_link_pos = *cols_[c.parent].pat.position_of(c.link);
        cols_[c.parent].children.push_back(k);
      }
      for (const auto& v : c.own) binder.emplace(v, k);
    }
    alpha_col_ = binder.at(q.alpha);
    beta_col_ = binder.at(q.beta);
    alpha_pos_ = *cols_[alpha_col_].pat.position_of(q.alpha);
    beta_pos_ = *cols_[beta_col_].pat.position_of(q.beta);

    for (std::size_t k = 0; k < n; ++k) {
      auto& c = cols_[k];
      c.forward = std::make_unique<PatternAccess>(store, c.pat, k == 0 ? std::nullopt : std::optional(c.link_pos), own_filters(k));
      if (k > 0) {
        c.reverse = std::make_unique<PatternAccess>(store, cols_[c.parent].pat, c.parent_link_pos, own_filters(c.parent));
      }
      auto st = pattern_stats(store, c.pat);
      if (k == 0) {
        c.fold = static_cast<double>(st.match_count);
      } else {
        auto right = st.distinct_at(c.link_pos);
        auto left = pattern_stats(store, cols_[c.parent].pat).distinct_at(c.parent_link_pos);
        c.fold = kgx::fold_factor(FoldStep{static_cast<double>(st.match_count), static_cast<double>(left), static_cast<double>(right)});
      }
    }
    beta_access_ = std::make_unique<PatternAccess>(store, cols_[beta_col_].pat, beta_pos_, own_filters(beta_col_));
    root_ = cols_[0].forward->lookup(0);
  }

  const std::vector<std::size_t>& order() const { return order_; }
  const TriplePattern& pattern(std::size_t col) const { return cols_[col].pat; }

  // JoinSpace
  std::size_t columns() const { return cols_.size(); }
  std::size_t parent(std::size_t col) const { return cols_[col].parent; }
  const std::vector<std::size_t>& children(std::size_t col) const { return cols_[col].children; }
  std::span<const Triple> root() const { return root_; }
  LinkKey link_key(std::size_t col, const Triple& parent_tuple) const { return parent_tuple.at(cols_[col].parent_link_pos); }
  std::span<const Triple> frontier(std::size_t col, LinkKey key) const { return cols_[col].forward->lookup(static_cast<TermId>(key)); }
  LinkKey up_key(std::size_t col, const Triple& t) const { return t.at(cols_[col].link_pos); }
  std::span<const Triple> reverse_frontier(std::size_t col, LinkKey key) const { return cols_[col].reverse->lookup(static_cast<TermId>(key)); }
  std::size_t alpha_column() const { return alpha_col_; }
  std::size_t beta_column() const { return beta_col_; }
  TermId alpha_of(const Triple& t) const { return t.at(alpha_pos_); }
  TermId beta_of(const Triple& t) const { return t.at(beta_pos_); }
  std::span<const Triple> beta_tuples(TermId b) const { return beta_access_->lookup(b); }
  double fold_factor(std::size_t col) const { return cols_[col].fold; }

 private:
  struct Column {
    TriplePattern pat;
    std::vector<std::string> own;
    std::string link;
    std::size_t parent = 0;
    Position link_pos = Position::s;
    Position parent_link_pos = Position::s;
    std::vector<std::size_t> children;
    std::unique_ptr<PatternAccess> forward;
    std::unique_ptr<PatternAccess> reverse;
    double fold = 0;
  };

  std::vector<PatternAccess::Filter> own_filters(std::size_t col) const {
    std::vector<PatternAccess::Filter> out;
    for (const auto& v : cols_[col].own) {
      if (auto* f = q_->filter_for(v)) out.push_back({*cols_[col].pat.position_of(v), f});
    }
    return out;
  }

  const GraphStore* store_;
  const PreparedQuery* q_;
  std::vector<std::size_t> order_;
  std::vector<Column> cols_;
  std::size_t alpha_col_ = 0, beta_col_ = 0;
  Position alpha_pos_ = Position::s, beta_pos_ = Position::s;
  std::unique_ptr<PatternAccess> beta_access_;
  std::span<const Triple> root_;
};

static_assert(JoinSpace<RdfJoinSpace>);

struct WalkOrderScore {
  double two_step = 0;  // estimated size after the first two steps
  double head = 0;      // estimated size of the first step
};

// Filtered variables scale a pattern's match count by the filter's share of
// its distinct values.
inline WalkOrderScore walk_order_score(const GraphStore& store, const PreparedQuery& q, const std::vector<std::size_t>& order) {
  auto selectivity = [&](const TriplePattern& p) {
    auto st = pattern_stats(store, p);
    double s = static_cast<double>(st.match_count);
    for (const auto& v : p.variables()) {
      auto* f = q.filter_for(v);
      if (!f) continue;
      auto ndv = st.distinct_at(*p.position_of(v));
      if (ndv > 0) s *= std::min(1.0, static_cast<double>(f->size()) / static_cast<double>(ndv));
    }
    return s;
  };
  const auto& first = q.patterns[order[0]];
  WalkOrderScore score;
  score.head = selectivity(first);
  score.two_step = score.head;
  if (order.size() < 2) return score;
  const auto& second = q.patterns[order[1]];
  std::string link;
  for (const auto& v : second.variables()) {
    if (first.mentions(v)) link = v;
  }
  auto st = pattern_stats(store, second);
  FoldStep step{static_cast<double>(st.match_count),
                static_cast<double>(pattern_stats(store, first).distinct_at(*first.position_of(link))),
                static_cast<double>(st.distinct_at(*second.position_of(link)))};
  double m = static_cast<double>(st.match_count);
  score.two_step = score.head * fold_factor(step) * (m > 0 ? selectivity(second) / m : 0.0);
  return score;
}

// Walk order: each leaf pattern is a candidate start (patterns enumerated
// depth first from it). The lowest two-step estimate wins; near ties go to
// the smaller first step, then to the order starting at the earliest
// pattern.
inline std::vector<std::size_t> plan_walk_order(const GraphStore& store, const PreparedQuery& q,
                                                const std::optional<std::vector<std::size_t>>& override_order = std::nullopt) {
  if (override_order) return *override_order;
  auto leaves = leaf_patterns(q.patterns);
  if (leaves.empty()) leaves.push_back(0);
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
  auto better = [&](const WalkOrderScore& a, const WalkOrderScore& b) {
    if (!close(a.two_step, b.two_step)) return a.two_step < b.two_step;
    if (!close(a.head, b.head)) return a.head < b.head;
    return false;
  };
  std::vector<std::size_t> best;
  WalkOrderScore best_score;
  for (auto l : leaves) {
    auto order = connected_order(q.patterns, l);
    auto s = walk_order_score(store, q, order);
    if (best.empty() || better(s, best_score)) {
      best = std::move(order);
      best_score = s;
    }
  }
  return best;
}

}  // namespace kgx
