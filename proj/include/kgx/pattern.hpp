#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kgx/store.hpp"

namespace kgx {

struct Variable {
  std::string name;
  auto operator<=>(const Variable&) const = default;
};

// A triple pattern whose constants are of type C: Term before resolution
// against a store, TermId after.
template <class C>
struct BasicPattern {
  using Slot = std::variant<C, Variable>;
  std::array<Slot, 3> slots;

  BasicPattern() = default;
  BasicPattern(Slot s, Slot p, Slot o) : slots{std::move(s), std::move(p), std::move(o)} {}

  const Slot& at(Position pos) const { return slots[static_cast<std::size_t>(pos)]; }
  Slot& at(Position pos) { return slots[static_cast<std::size_t>(pos)]; }
  bool is_var(Position pos) const { return std::holds_alternative<Variable>(at(pos)); }
  const std::string& var(Position pos) const { return std::get<Variable>(at(pos)).name; }
  const C& constant(Position pos) const { return std::get<C>(at(pos)); }

  // Distinct variable names in s, p, o order.
  std::vector<std::string> variables() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < 3; ++i) {
      auto pos = static_cast<Position>(i);
      if (is_var(pos) && std::find(out.begin(), out.end(), var(pos)) == out.end()) out.push_back(var(pos));
    }
    return out;
  }

  bool mentions(const std::string& v) const {
    for (std::size_t i = 0; i < 3; ++i) {
      auto pos = static_cast<Position>(i);
      if (is_var(pos) && var(pos) == v) return true;
    }
    return false;
  }

  std::optional<Position> position_of(const std::string& v) const {
    for (std::size_t i = 0; i < 3; ++i) {
      auto pos = static_cast<Position>(i);
      if (is_var(pos) && var(pos) == v) return pos;
    }
    return std::nullopt;
  }

  bool ground() const { return !is_var(Position::s) && !is_var(Position::p) && !is_var(Position::o); }

  bool operator==(const BasicPattern&) const = default;
};

using TriplePattern = BasicPattern<TermId>;
using TermPattern = BasicPattern<Term>;

inline Variable var(std::string name) { return Variable{std::move(name)}; }

inline std::string to_string(const TriplePattern& p) {
  std::string out;
  for (std::size_t i = 0; i < 3; ++i) {
    auto pos = static_cast<Position>(i);
    if (i) out += ' ';
    if (p.is_var(pos)) out += "?" + p.var(pos);
    else out += p.constant(pos) == kNoTerm ? std::string("<unknown>") : std::to_string(p.constant(pos));
  }
  return out;
}

// Whether triple t agrees with the constants and repeated variables of p.
inline bool agrees(const TriplePattern& p, const Triple& t) {
  for (std::size_t i = 0; i < 3; ++i) {
    auto pos = static_cast<Position>(i);
    if (!p.is_var(pos)) {
      if (p.constant(pos) != t.at(pos)) return false;
      continue;
    }
    for (std::size_t j = i + 1; j < 3; ++j) {
      auto other = static_cast<Position>(j);
      if (p.is_var(other) && p.var(other) == p.var(pos) && t.at(other) != t.at(pos)) return false;
    }
  }
  return true;
}

// Index whose leading levels are exactly the positions in `lead` (in any
// order), together with the number of such levels. Returns nullopt when no
// built order has that leading set.
inline std::optional<IndexOrder> order_with_leading(std::array<bool, 3> lead) {
  std::size_t k = 0;
  for (bool b : lead) k += b;
  for (auto order : kAllOrders) {
    auto lv = levels_of(order);
    bool ok = true;
    for (std::size_t i = 0; i < k; ++i) ok = ok && lead[static_cast<std::size_t>(lv[i])];
    if (ok) return order;
  }
  return std::nullopt;
}

// Chooses the index serving the longest run of constant leading levels.
inline std::pair<IndexOrder, std::size_t> choose_index(const TriplePattern& p) {
  std::array<bool, 3> is_const{};
  std::size_t n = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    is_const[i] = !p.is_var(static_cast<Position>(i));
    n += is_const[i];
  }
  if (auto o = order_with_leading(is_const)) return {*o, n};
  // Only {s,o} has no order; serve it by its best single-constant prefix.
  for (std::size_t i = 0; i < 3; ++i) {
    if (!is_const[i]) continue;
    std::array<bool, 3> one{};
    one[i] = true;
    if (auto o = order_with_leading(one)) return {*o, 1};
  }
  return {IndexOrder::spo, 0};
}

// Triples matching a pattern: a contiguous index range plus a residual check
// for constants outside the prefix, repeated variables and the reserved
// closure predicate.
class PatternMatch {
 public:
  PatternMatch(const GraphStore& store, const TriplePattern& pat, bool include_reserved = false)
      : pat_(pat) {
    for (std::size_t i = 0; i < 3; ++i) {
      auto pos = static_cast<Position>(i);
      if (!pat.is_var(pos) && pat.constant(pos) == kNoTerm) {
        empty_ = true;
        return;
      }
    }
    auto [order, plen] = choose_index(pat);
    order_ = order;
    auto lv = levels_of(order);
    std::array<TermId, 3> prefix{};
    for (std::size_t i = 0; i < plen; ++i) prefix[i] = pat.constant(lv[i]);
    rows_ = store.index(order).range(std::span<const TermId>(prefix.data(), plen));
    exclude_ = (!include_reserved && pat.is_var(Position::p)) ? store.closure_predicate() : kNoTerm;
    std::size_t nconst = 0;
    for (std::size_t i = 0; i < 3; ++i) nconst += !pat.is_var(static_cast<Position>(i));
    residual_ = plen < nconst || exclude_ != kNoTerm || has_repeat();
  }

  IndexOrder order() const { return order_; }

  template <class F>
  void for_each(F&& f) const {
    if (empty_) return;
    for (const Triple& t : rows_) {
      if (accepts(t)) f(t);
    }
  }

  std::size_t count() const {
    if (empty_) return 0;
    if (!residual_) return rows_.size();
    std::size_t n = 0;
    for_each([&](const Triple&) { ++n; });
    return n;
  }

  std::vector<Triple> to_vector() const {
    std::vector<Triple> out;
    for_each([&](const Triple& t) { out.push_back(t); });
    return out;
  }

  bool accepts(const Triple& t) const {
    if (!residual_) return true;
    if (exclude_ != kNoTerm && t.p == exclude_) return false;
    return agrees(pat_, t);
  }

 private:
  bool has_repeat() const {
    auto vars = pat_.variables();
    std::size_t n = 0;
    for (std::size_t i = 0; i < 3; ++i) n += pat_.is_var(static_cast<Position>(i));
    return vars.size() != n;
  }

  TriplePattern pat_;
  IndexOrder order_ = IndexOrder::spo;
  std::span<const Triple> rows_;
  TermId exclude_ = kNoTerm;
  bool residual_ = false;
  bool empty_ = false;
};

inline PatternMatch match_pattern(const GraphStore& store, const TriplePattern& pat) {
  return PatternMatch(store, pat);
}

inline std::string stats_key(const TriplePattern& pat) {
  // Variable names are irrelevant; only which positions are bound and
  // which variables repeat.
  std::string key;
  auto vars = pat.variables();
  for (std::size_t i = 0; i < 3; ++i) {
    auto pos = static_cast<Position>(i);
    if (pat.is_var(pos)) {
      auto idx = std::find(vars.begin(), vars.end(), pat.var(pos)) - vars.begin();
      key += "?" + std::to_string(idx) + ";";
    } else {
      key += std::to_string(pat.constant(pos)) + ";";
    }
  }
  return key;
}

inline PatternStats pattern_stats(const GraphStore& store, const TriplePattern& pat) {
  return store.cached_stats(stats_key(pat), [&] {
    PatternStats st;
    std::array<std::vector<TermId>, 3> values;
    PatternMatch m(store, pat);
    m.for_each([&](const Triple& t) {
      ++st.match_count;
      for (std::size_t i = 0; i < 3; ++i) {
        if (pat.is_var(static_cast<Position>(i))) values[i].push_back(t.at(i));
      }
    });
    for (std::size_t i = 0; i < 3; ++i) {
      if (!pat.is_var(static_cast<Position>(i))) continue;
      auto& v = values[i];
      std::sort(v.begin(), v.end());
      st.distinct[i] = static_cast<std::uint64_t>(std::unique(v.begin(), v.end()) - v.begin());
    }
    return st;
  });
}

}  // namespace kgx
