#pragma once

#include <cstddef>

#include "kgx/common.hpp"

namespace kgx {

struct GroupKey {
  TermId alpha = kNoTerm;
  TermId beta = kNoTerm;
  bool operator==(const GroupKey&) const = default;
  auto operator<=>(const GroupKey&) const = default;
};

struct GroupKeyHash {
  std::size_t operator()(const GroupKey& k) const {
    std::size_t h = k.alpha;
    hash_combine(h, k.beta);
    return h;
  }
};

// Component-wise merge of partial keys; each component is set on at most
// one side.
inline GroupKey combine(GroupKey a, GroupKey b) {
  return {a.alpha != kNoTerm ? a.alpha : b.alpha, a.beta != kNoTerm ? a.beta : b.beta};
}

}  // namespace kgx
