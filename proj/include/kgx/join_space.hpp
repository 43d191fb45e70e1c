#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "kgx/common.hpp"

namespace kgx {

using LinkKey = std::uint64_t;

// Layered tuple graph the samplers and suffix services walk over. Columns
// are in walk order; column k > 0 hangs off parent(k) < k and its frontier
// under a parent tuple t is frontier(k, link_key(k, t)). reverse_frontier
// inverts that relation: the parent tuples whose frontier at k contains
// tuples with up_key(k, u) == key.
template <class S>
concept JoinSpace = requires(const S& s, std::size_t col, const typename S::Tuple& t, LinkKey key, TermId b) {
  typename S::Tuple;
  { s.columns() } -> std::convertible_to<std::size_t>;
  { s.parent(col) } -> std::convertible_to<std::size_t>;
  { s.children(col) } -> std::convertible_to<const std::vector<std::size_t>&>;
  { s.root() } -> std::convertible_to<std::span<const typename S::Tuple>>;
  { s.link_key(col, t) } -> std::convertible_to<LinkKey>;
  { s.frontier(col, key) } -> std::convertible_to<std::span<const typename S::Tuple>>;
  { s.up_key(col, t) } -> std::convertible_to<LinkKey>;
  { s.reverse_frontier(col, key) } -> std::convertible_to<std::span<const typename S::Tuple>>;
  { s.alpha_column() } -> std::convertible_to<std::size_t>;
  { s.beta_column() } -> std::convertible_to<std::size_t>;
  { s.alpha_of(t) } -> std::convertible_to<TermId>;
  { s.beta_of(t) } -> std::convertible_to<TermId>;
  { s.beta_tuples(b) } -> std::convertible_to<std::span<const typename S::Tuple>>;
  { s.fold_factor(col) } -> std::convertible_to<double>;
};

struct FoldStep {
  double match_count = 0;
  double ndv_left = 0;
  double ndv_right = 0;
};

// |G_k| / max(ndv_left, ndv_right) on the join position, 0 when neither
// side has distinct values.
inline double fold_factor(const FoldStep& f) {
  double m = std::max(f.ndv_left, f.ndv_right);
  return m == 0 ? 0.0 : f.match_count / m;
}

// Left-fold of the two-pattern rule: the running estimate starts at `head`
// (the frontier size of the prefix-bound patterns, or |G_1|) and each step
// multiplies by its fold factor.
inline double join_size_estimate(double head, std::span<const FoldStep> steps) {
  double est = head;
  for (const auto& s : steps) est *= fold_factor(s);
  return est;
}

// Frontier columns of a prefix of length l: suffix columns whose parent is
// bound.
template <JoinSpace S>
std::vector<std::size_t> frontier_columns(const S& s, std::size_t l) {
  std::vector<std::size_t> out;
  if (l == 0) {
    out.push_back(0);
    return out;
  }
  for (std::size_t k = l; k < s.columns(); ++k) {
    if (s.parent(k) < l) out.push_back(k);
  }
  return out;
}

// Estimated number of completions of a prefix: exact frontier degrees for
// the columns hanging off the prefix, fold factors for the rest.
template <JoinSpace S>
double suffix_estimate(const S& s, std::span<const typename S::Tuple> prefix) {
  const std::size_t l = prefix.size();
  const std::size_t n = s.columns();
  if (l >= n) return 1.0;
  double est = 1.0;
  for (std::size_t k = l; k < n; ++k) {
    if (k == 0) {
      est *= static_cast<double>(s.root().size());
    } else if (s.parent(k) < l) {
      est *= static_cast<double>(s.frontier(k, s.link_key(k, prefix[s.parent(k)])).size());
    } else {
      est *= s.fold_factor(k);
    }
    if (est == 0) return 0;
  }
  return est;
}

}  // namespace kgx
