#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "kgx/suffix.hpp"
#include "kgx/wander_join.hpp"

namespace kgx {

struct TippingConfig {
  double threshold = 10000;
  bool enabled = true;
};

template <class Tuple>
struct AuditOptions {
  TippingConfig tipping;
  bool distinct = true;
  // Count N once per sampling step instead of once per walk.
  bool step_counting = false;
  // Exact suffix work per walk before the walk is aborted; 0 disables.
  std::uint64_t enumeration_cap = 50'000'000;
  bool probability_cache = true;
  // Replaces the threshold rule when set: tip at the given prefix.
  std::function<bool(std::span<const Tuple>)> tip_policy;
};

// |Γ_δ| · Π d_i.
template <class Scalar>
Scalar caj(std::span<const std::uint64_t> degrees, const Scalar& suffix_count) {
  Scalar s = suffix_count;
  for (auto d : degrees) s *= static_cast<Scalar>(static_cast<long long>(d));
  return s;
}

// Audit Join walker: random walks that switch to exact suffix computation
// once the estimated number of completions drops below the threshold.
template <JoinSpace Space, class Scalar = double>
class AuditJoin {
 public:
  using Tuple = typename Space::Tuple;
  using Map = GroupMap<Scalar>;

  AuditJoin(const Space& space, AuditOptions<Tuple> opts)
      : space_(&space),
        opts_(std::move(opts)),
        counts_(space, Weighting::count, false, opts_.enumeration_cap),
        probs_(space, Weighting::probability, true, opts_.enumeration_cap) {
    if (opts_.tipping.enabled && !(opts_.tipping.threshold > 0)) {
      throw Error(ErrorCode::invalid_argument, "tipping threshold must be positive");
    }
  }

  const AuditOptions<Tuple>& options() const { return opts_; }

  void set_cancel(const std::atomic<bool>* flag) {
    counts_.set_cancel(flag);
    probs_.set_cancel(flag);
  }

  // Whether a walk stops at this prefix (excluding full and dead ends).
  bool tips(std::span<const Tuple> prefix) const {
    if (prefix.size() >= space_->columns()) return false;
    if (opts_.tip_policy) return opts_.tip_policy(prefix);
    if (!opts_.tipping.enabled) return false;
    return suffix_estimate(*space_, prefix) < opts_.tipping.threshold;
  }

  // Per-group contribution of a terminated prefix reached with
  // probability 1/inv_prob. Keys carry alpha only.
  Map contributions(std::span<const Tuple> prefix, const Scalar& inv_prob) {
    Map out;
    if (!opts_.distinct) {
      out = counts_.completions(prefix);
      for (auto& e : out.entries) e.second *= inv_prob;
      return out;
    }
    Map w = probs_.completions(prefix);
    if (prefix.empty()) {
      // W(a, b) = Pr(a, b) for the empty prefix: one per pair.
      for (const auto& e : w.entries) out.entries.emplace_back(GroupKey{e.first.alpha, kNoTerm}, Scalar(1));
      out.normalize();
      return out;
    }
    for (const auto& [k, v] : w.entries) {
      Scalar pr = pr_ab(k.alpha, k.beta);
      if (pr == Scalar(0)) throw Error(ErrorCode::internal, "reachable value with zero probability");
      out.entries.emplace_back(GroupKey{k.alpha, kNoTerm}, v / pr);
    }
    out.normalize();
    return out;
  }

  // Pr(a, b): probability that a walk ends in a full answer with these
  // values.
  Scalar pr_ab(TermId a, TermId b) { return inflow(b).get(GroupKey{a, b}); }

  // Pr(b) summed over groups.
  Scalar pr_b(TermId b) { return inflow(b).total(); }

  WalkResult walk(Rng& rng) {
    WalkResult r;
    const std::size_t n = space_->columns();
    path_.clear();
    Scalar inv(1);
    counts_.reset_work();
    probs_.reset_work();
    try {
      if (tips(std::span<const Tuple>(path_))) {
        emit(r, inv, WalkStatus::tipped);
        r.steps = 1;
        return r;
      }
      for (std::size_t k = 0; k < n; ++k) {
        auto f = k == 0 ? space_->root() : space_->frontier(k, space_->link_key(k, path_[space_->parent(k)]));
        if (f.empty()) {
          r.status = WalkStatus::rejected;
          return r;
        }
        ++r.steps;
        inv *= static_cast<Scalar>(static_cast<long long>(f.size()));
        path_.push_back(f[rng.below(f.size())]);
        if (k + 1 == n) {
          emit(r, inv, WalkStatus::full);
          return r;
        }
        if (tips(std::span<const Tuple>(path_))) {
          emit(r, inv, WalkStatus::tipped);
          return r;
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::enumeration_cap && e.code() != ErrorCode::cancelled) throw;
      r.values.clear();
      r.status = WalkStatus::aborted;
      return r;
    }
    return r;
  }

  std::size_t cached_values() const { return cache_.size(); }

 private:
  void emit(WalkResult& r, const Scalar& inv, WalkStatus status) {
    r.status = status;
    Map c = contributions(std::span<const Tuple>(path_), inv);
    for (const auto& [k, v] : c.entries) r.values.emplace_back(k.alpha, static_cast<double>(v));
  }

  const Map& inflow(TermId b) {
    if (auto it = cache_.find(b); it != cache_.end()) return it->second;
    Map m = probs_.beta_inflow(b);
    if (!opts_.probability_cache) {
      scratch_ = std::move(m);
      return scratch_;
    }
    return cache_.emplace(b, std::move(m)).first->second;
  }

  const Space* space_;
  AuditOptions<Tuple> opts_;
  SuffixEngine<Space, Scalar> counts_;
  SuffixEngine<Space, Scalar> probs_;
  std::unordered_map<TermId, Map> cache_;
  Map scratch_;
  std::vector<Tuple> path_;
};

}  // namespace kgx
