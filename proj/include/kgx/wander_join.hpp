#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kgx/group_key.hpp"
#include "kgx/join_space.hpp"
#include "kgx/rng.hpp"

namespace kgx {

enum class WalkStatus {
  full,
  rejected,   // frontier empty before the last column
  partial,    // forced prefix that is neither full nor dead
  tipped,     // stopped at a tipping point (Audit Join)
  duplicate,  // full walk whose (alpha, beta) was already seen
  aborted,    // exact suffix work exceeded its cap; not counted
};

template <class Tuple>
struct WalkOutcome {
  std::vector<Tuple> path;
  std::vector<std::uint64_t> degrees;
  WalkStatus status = WalkStatus::rejected;
};

// One uniform random walk in column order.
template <JoinSpace Space>
WalkOutcome<typename Space::Tuple> random_walk(const Space& space, Rng& rng) {
  WalkOutcome<typename Space::Tuple> w;
  const std::size_t n = space.columns();
  if (space.root().empty()) throw Error(ErrorCode::invalid_argument, "first column is empty");
  for (std::size_t k = 0; k < n; ++k) {
    auto f = k == 0 ? space.root() : space.frontier(k, space.link_key(k, w.path[space.parent(k)]));
    if (f.empty()) {
      w.status = WalkStatus::rejected;
      return w;
    }
    w.degrees.push_back(f.size());
    w.path.push_back(f[rng.below(f.size())]);
  }
  w.status = WalkStatus::full;
  return w;
}

// The walk that makes the given choices, with its degrees. A prefix whose
// next frontier is empty is rejected.
template <JoinSpace Space>
WalkOutcome<typename Space::Tuple> walk_along(const Space& space, std::span<const typename Space::Tuple> choices) {
  WalkOutcome<typename Space::Tuple> w;
  const std::size_t n = space.columns();
  if (choices.size() > n) throw Error(ErrorCode::invalid_argument, "more choices than columns");
  for (std::size_t k = 0; k < choices.size(); ++k) {
    auto f = k == 0 ? space.root() : space.frontier(k, space.link_key(k, w.path[space.parent(k)]));
    bool found = false;
    for (const auto& t : f) found = found || t == choices[k];
    if (!found) throw Error(ErrorCode::invalid_argument, "choice " + std::to_string(k + 1) + " is not in its frontier");
    w.degrees.push_back(f.size());
    w.path.push_back(choices[k]);
  }
  if (w.path.size() == n) {
    w.status = WalkStatus::full;
  } else {
    auto k = w.path.size();
    auto f = k == 0 ? space.root() : space.frontier(k, space.link_key(k, w.path[space.parent(k)]));
    w.status = f.empty() ? WalkStatus::rejected : WalkStatus::partial;
  }
  return w;
}

// Horvitz-Thompson estimate of one walk: the product of its degrees when
// full, zero otherwise.
template <class Scalar = double, class Tuple>
Scalar wj_estimate(const WalkOutcome<Tuple>& w) {
  if (w.status != WalkStatus::full) return Scalar(0);
  Scalar s(1);
  for (auto d : w.degrees) s *= static_cast<Scalar>(static_cast<long long>(d));
  return s;
}

// Group contributions of one walk, plus the number of sampling steps taken.
struct WalkResult {
  WalkStatus status = WalkStatus::rejected;
  std::vector<std::pair<TermId, double>> values;
  std::uint64_t steps = 0;
};

// Wander Join walker. In distinct mode a full walk whose (alpha, beta) pair
// was already seen contributes zero; this is a baseline, not an unbiased
// distinct estimator.
template <JoinSpace Space>
class WanderJoin {
 public:
  using Tuple = typename Space::Tuple;

  WanderJoin(const Space& space, bool distinct) : space_(&space), distinct_(distinct) {}

  WalkResult walk(Rng& rng) {
    WalkResult r;
    const std::size_t n = space_->columns();
    path_.clear();
    double inv = 1;
    for (std::size_t k = 0; k < n; ++k) {
      auto f = k == 0 ? space_->root() : space_->frontier(k, space_->link_key(k, path_[space_->parent(k)]));
      if (f.empty()) {
        r.status = WalkStatus::rejected;
        return r;
      }
      ++r.steps;
      inv *= static_cast<double>(f.size());
      path_.push_back(f[rng.below(f.size())]);
    }
    TermId a = space_->alpha_of(path_[space_->alpha_column()]);
    if (distinct_) {
      GroupKey k{a, space_->beta_of(path_[space_->beta_column()])};
      if (!seen_.insert(k).second) {
        r.status = WalkStatus::duplicate;
        return r;
      }
    }
    r.status = WalkStatus::full;
    r.values.emplace_back(a, inv);
    return r;
  }

  std::size_t seen_size() const { return seen_.size(); }

 private:
  const Space* space_;
  bool distinct_;
  std::vector<Tuple> path_;
  std::unordered_set<GroupKey, GroupKeyHash> seen_;
};

}  // namespace kgx
