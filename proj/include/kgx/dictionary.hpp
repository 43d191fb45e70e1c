#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgx/common.hpp"

namespace kgx {

enum class TermKind : std::uint8_t { uri, literal };

struct Term {
  TermKind kind = TermKind::uri;
  std::string lexical;

  static Term uri(std::string s) { return {TermKind::uri, std::move(s)}; }
  static Term literal(std::string s) { return {TermKind::literal, std::move(s)}; }

  bool is_uri() const { return kind == TermKind::uri; }
  bool operator==(const Term&) const = default;
  auto operator<=>(const Term&) const = default;
};

// Dense, load-order term ids. Literals and URIs share the id space and are
// told apart by the kind tag.
class Dictionary {
 public:
  TermId intern(const Term& t) {
    auto key = make_key(t.kind, t.lexical);
    auto [it, inserted] = index_.try_emplace(std::move(key), static_cast<TermId>(terms_.size()));
    if (inserted) terms_.push_back(t);
    return it->second;
  }

  std::optional<TermId> find(TermKind kind, std::string_view lexical) const {
    auto it = index_.find(make_key(kind, lexical));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<TermId> find(const Term& t) const { return find(t.kind, t.lexical); }
  std::optional<TermId> find_uri(std::string_view u) const { return find(TermKind::uri, u); }

  const Term& term(TermId id) const { return terms_.at(id); }
  std::size_t size() const { return terms_.size(); }

 private:
  static std::string make_key(TermKind kind, std::string_view lexical) {
    std::string k;
    k.reserve(lexical.size() + 1);
    k.push_back(kind == TermKind::uri ? 'U' : 'L');
    k.append(lexical);
    return k;
  }

  std::vector<Term> terms_;
  std::unordered_map<std::string, TermId> index_;
};

}  // namespace kgx
