#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgx/group_key.hpp"
#include "kgx/join_space.hpp"

namespace kgx {

// Sparse map from partial group keys to scalars, sorted by key.
template <class Scalar>
struct GroupMap {
  using Entry = std::pair<GroupKey, Scalar>;
  std::vector<Entry> entries;

  static GroupMap unit(GroupKey k, Scalar v) {
    GroupMap m;
    m.entries.emplace_back(k, std::move(v));
    return m;
  }

  bool empty() const { return entries.empty(); }

  Scalar get(GroupKey k) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), k,
                               [](const Entry& e, const GroupKey& key) { return e.first < key; });
    if (it == entries.end() || it->first != k) return Scalar(0);
    return it->second;
  }

  Scalar total() const {
    Scalar s(0);
    for (const auto& e : entries) s += e.second;
    return s;
  }

  // Sorts and merges duplicate keys, dropping zeros.
  void normalize() {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
    std::size_t w = 0;
    for (std::size_t r = 0; r < entries.size(); ++r) {
      if (w > 0 && entries[w - 1].first == entries[r].first) {
        entries[w - 1].second += entries[r].second;
      } else {
        if (w != r) entries[w] = std::move(entries[r]);
        ++w;
      }
    }
    entries.resize(w);
    std::erase_if(entries, [](const Entry& e) { return e.second == Scalar(0); });
  }
};

template <class Scalar>
GroupMap<Scalar> product(const GroupMap<Scalar>& a, const GroupMap<Scalar>& b) {
  GroupMap<Scalar> out;
  out.entries.reserve(a.entries.size() * b.entries.size());
  for (const auto& [ka, va] : a.entries) {
    for (const auto& [kb, vb] : b.entries) out.entries.emplace_back(combine(ka, kb), va * vb);
  }
  // Entries of one map share which key components are set, so a
  // single-entry factor preserves the other side's order.
  if (a.entries.size() > 1 && b.entries.size() > 1) out.normalize();
  return out;
}

enum class Weighting {
  count,        // number of completions
  probability,  // walk probability of the completions
};

// Memoized sum-product over the suffix of a join space. S(k, key) sums, over
// the frontier of column k under `key`, the tuple's tag times the product of
// its children's S; in probability mode every tuple of a frontier is
// weighted by 1/|frontier|. Tags carry the alpha value at the alpha column
// and, when requested, the beta value at the beta column.
template <JoinSpace Space, class Scalar = double>
class SuffixEngine {
 public:
  using Tuple = typename Space::Tuple;
  using Map = GroupMap<Scalar>;

  SuffixEngine(const Space& space, Weighting weighting, bool tag_beta, std::uint64_t work_cap = 0)
      : space_(&space), weighting_(weighting), tag_beta_(tag_beta), work_cap_(work_cap) {}

  Weighting weighting() const { return weighting_; }

  GroupKey tag(std::size_t col, const Tuple& t) const {
    GroupKey k;
    if (col == space_->alpha_column()) k.alpha = space_->alpha_of(t);
    if (tag_beta_ && col == space_->beta_column()) k.beta = space_->beta_of(t);
    return k;
  }

  // S(col, key); the root column ignores the key.
  const Map& subtree(std::size_t col, LinkKey key) {
    if (col == 0) key = 0;
    auto mk = std::pair{col, key};
    if (auto it = down_.find(mk); it != down_.end()) return it->second;
    auto frontier = col == 0 ? space_->root() : space_->frontier(col, key);
    Map acc;
    Scalar w = frontier.empty() ? Scalar(0) : weight(frontier.size());
    for (const Tuple& u : frontier) {
      Map b = below(col, u);
      for (auto& [k, v] : b.entries) acc.entries.emplace_back(k, v * w);
    }
    acc.normalize();
    return down_.emplace(mk, std::move(acc)).first->second;
  }

  // tag(t) times the product of S over t's children.
  Map below(std::size_t col, const Tuple& t) {
    charge();
    Map m = Map::unit(tag(col, t), Scalar(1));
    for (std::size_t c : space_->children(col)) {
      const Map& s = subtree(c, space_->link_key(c, t));
      if (s.empty()) return {};
      m = product(m, s);
    }
    return m;
  }

  // Completions of a prefix binding columns 0..l-1: the prefix tags times S
  // of every frontier column. Probability mode gives Pr(completion | prefix).
  Map completions(std::span<const Tuple> prefix) {
    const std::size_t l = prefix.size();
    const std::size_t n = space_->columns();
    GroupKey key;
    for (std::size_t k = 0; k < l; ++k) key = combine(key, tag(k, prefix[k]));
    Map m = Map::unit(key, Scalar(1));
    if (l == 0) return subtree(0, 0);
    for (std::size_t k = l; k < n; ++k) {
      if (space_->parent(k) >= l) continue;
      const Map& s = subtree(k, space_->link_key(k, prefix[space_->parent(k)]));
      if (s.empty()) return {};
      m = product(m, s);
    }
    return m;
  }

  // Probability that a walk reaches a tuple of column `col` with
  // up_key == key, times the probability of everything outside col's
  // subtree completing. Probability mode only.
  const Map& upward(std::size_t col, LinkKey key) {
    if (col == 0) key = 0;
    auto mk = std::pair{col, key};
    if (auto it = up_.find(mk); it != up_.end()) return it->second;
    Map acc;
    if (col == 0) {
      if (!space_->root().empty()) acc = Map::unit({}, weight(space_->root().size()));
    } else {
      std::size_t p = space_->parent(col);
      for (const Tuple& t : space_->reverse_frontier(col, key)) {
        charge();
        auto deg = space_->frontier(col, space_->link_key(col, t)).size();
        Map m = Map::unit(tag(p, t), weight(deg));
        bool dead = false;
        for (std::size_t s : space_->children(p)) {
          if (s == col) continue;
          const Map& sm = subtree(s, space_->link_key(s, t));
          if (sm.empty()) {
            dead = true;
            break;
          }
          m = product(m, sm);
        }
        if (dead) continue;
        m = product(m, upward(p, p == 0 ? 0 : space_->up_key(p, t)));
        for (auto& e : m.entries) acc.entries.push_back(std::move(e));
      }
      acc.normalize();
    }
    return up_.emplace(mk, std::move(acc)).first->second;
  }

  // Pr(a, b) for every group a, keyed by (a, b). Probability mode with beta
  // tags.
  Map beta_inflow(TermId b) {
    const std::size_t kb = space_->beta_column();
    Map acc;
    for (const Tuple& u : space_->beta_tuples(b)) {
      const Map& up = upward(kb, kb == 0 ? 0 : space_->up_key(kb, u));
      if (up.empty()) continue;
      Map m = product(up, below(kb, u));
      for (auto& e : m.entries) acc.entries.push_back(std::move(e));
    }
    acc.normalize();
    return acc;
  }

  // Polled during enumeration; a raised flag throws CANCELLED.
  void set_cancel(const std::atomic<bool>* flag) { cancel_ = flag; }

  std::uint64_t work() const { return work_; }
  void reset_work() { work_ = 0; }
  std::size_t memo_size() const { return down_.size() + up_.size(); }

  void clear() {
    down_.clear();
    up_.clear();
  }

 private:
  struct KeyHash {
    std::size_t operator()(const std::pair<std::size_t, LinkKey>& k) const {
      std::size_t h = k.first;
      hash_combine(h, std::hash<LinkKey>{}(k.second));
      return h;
    }
  };

  Scalar weight(std::size_t degree) const {
    if (weighting_ == Weighting::count) return Scalar(1);
    return Scalar(1) / static_cast<Scalar>(static_cast<long long>(degree));
  }

  void charge() {
    ++work_;
    if (cancel_ && (work_ & 1023) == 0 && cancel_->load(std::memory_order_relaxed)) {
      throw Error(ErrorCode::cancelled, "run cancelled");
    }
    if (work_cap_ != 0 && work_ > work_cap_) {
      throw Error(ErrorCode::enumeration_cap, "suffix enumeration exceeded " + std::to_string(work_cap_) + " steps");
    }
  }

  const Space* space_;
  Weighting weighting_;
  bool tag_beta_;
  std::uint64_t work_cap_;
  std::uint64_t work_ = 0;
  const std::atomic<bool>* cancel_ = nullptr;
  std::unordered_map<std::pair<std::size_t, LinkKey>, Map, KeyHash> down_;
  std::unordered_map<std::pair<std::size_t, LinkKey>, Map, KeyHash> up_;
};

// |Γ_δ|: number of full answers extending the prefix.
template <class Scalar = double, JoinSpace Space>
Scalar count_suffixes(const Space& space, std::span<const typename Space::Tuple> prefix) {
  SuffixEngine<Space, Scalar> e(space, Weighting::count, false);
  return e.completions(prefix).total();
}

// Every full path with beta value b (and the given prefix), with the walk
// degrees at each step.
template <JoinSpace Space, class F>
void enumerate_walks_to_value(const Space& space, TermId b, std::span<const typename Space::Tuple> prefix, F&& on_path) {
  using Tuple = typename Space::Tuple;
  const std::size_t n = space.columns();
  std::vector<Tuple> path;
  std::vector<std::uint64_t> degrees;
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == n) {
      on_path(std::span<const Tuple>(path), std::span<const std::uint64_t>(degrees));
      return;
    }
    auto f = k == 0 ? space.root() : space.frontier(k, space.link_key(k, path[space.parent(k)]));
    degrees.push_back(f.size());
    for (const Tuple& t : f) {
      if (k < prefix.size() && !(t == prefix[k])) continue;
      if (k == space.beta_column() && space.beta_of(t) != b) continue;
      path.push_back(t);
      rec(k + 1);
      path.pop_back();
    }
    degrees.pop_back();
  };
  rec(0);
}

}  // namespace kgx
