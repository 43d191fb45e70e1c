#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgx/pattern.hpp"

namespace kgx {

// A compiled exploration query: SELECT alpha COUNT([DISTINCT] beta) over the
// conjunction of `patterns`, GROUP BY alpha. `filters` restricts variables to
// explicit term sets.
struct PathQuery {
  std::vector<TermPattern> patterns;
  std::string alpha;
  std::string beta;
  bool distinct = true;
  std::map<std::string, std::vector<Term>> filters;

  bool operator==(const PathQuery&) const = default;
};

namespace detail {

inline nlohmann::json slot_to_json(const TermPattern::Slot& s) {
  if (auto* v = std::get_if<Variable>(&s)) return {{"var", v->name}};
  const Term& t = std::get<Term>(s);
  if (t.is_uri()) return {{"uri", t.lexical}};
  return {{"literal", t.lexical}};
}

inline TermPattern::Slot slot_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_query, "pattern position must be an object");
  if (j.contains("var")) return Variable{j.at("var").get<std::string>()};
  if (j.contains("uri")) {
    auto u = j.at("uri").get<std::string>();
    if (u.empty()) throw Error(ErrorCode::invalid_query, "empty uri");
    return Term::uri(std::move(u));
  }
  if (j.contains("literal")) return Term::literal(j.at("literal").get<std::string>());
  throw Error(ErrorCode::invalid_query, "pattern position needs var, uri or literal");
}

inline std::string var_name(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.contains("var")) return j.at("var").get<std::string>();
  throw Error(ErrorCode::invalid_query, "expected a variable name");
}

inline nlohmann::json term_to_json(const Term& t) {
  if (t.is_uri()) return t.lexical;
  return {{"literal", t.lexical}};
}

inline Term term_from_json(const nlohmann::json& j) {
  if (j.is_string()) return Term::uri(j.get<std::string>());
  if (j.is_object() && j.contains("uri")) return Term::uri(j.at("uri").get<std::string>());
  if (j.is_object() && j.contains("literal")) return Term::literal(j.at("literal").get<std::string>());
  throw Error(ErrorCode::invalid_query, "expected a term");
}

}  // namespace detail

inline nlohmann::json to_json(const PathQuery& q) {
  nlohmann::json pats = nlohmann::json::array();
  for (const auto& p : q.patterns) {
    pats.push_back({{"a", detail::slot_to_json(p.slots[0])},
                    {"b", detail::slot_to_json(p.slots[1])},
                    {"c", detail::slot_to_json(p.slots[2])}});
  }
  nlohmann::json j = {{"patterns", pats}, {"alpha", q.alpha}, {"beta", q.beta}, {"distinct", q.distinct}};
  if (!q.filters.empty()) {
    nlohmann::json f = nlohmann::json::object();
    for (const auto& [v, terms] : q.filters) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& t : terms) arr.push_back(detail::term_to_json(t));
      f[v] = arr;
    }
    j["filters"] = f;
  }
  return j;
}

inline PathQuery path_query_from_json(const nlohmann::json& j) {
  try {
    PathQuery q;
    for (const auto& p : j.at("patterns")) {
      q.patterns.emplace_back(detail::slot_from_json(p.at("a")), detail::slot_from_json(p.at("b")),
                              detail::slot_from_json(p.at("c")));
    }
    q.alpha = detail::var_name(j.at("alpha"));
    q.beta = detail::var_name(j.at("beta"));
    q.distinct = j.value("distinct", true);
    if (j.contains("filters")) {
      for (const auto& [v, arr] : j.at("filters").items()) {
        auto& dst = q.filters[v];
        for (const auto& t : arr) dst.push_back(detail::term_from_json(t));
      }
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_query, std::string("malformed query: ") + e.what());
  }
}

// Indices of the patterns mentioning each variable.
template <class C>
std::map<std::string, std::vector<std::size_t>> variable_uses(const std::vector<BasicPattern<C>>& pats) {
  std::map<std::string, std::vector<std::size_t>> uses;
  for (std::size_t i = 0; i < pats.size(); ++i) {
    for (const auto& v : pats[i].variables()) uses[v].push_back(i);
  }
  return uses;
}

// Berge-acyclicity of the non-ground patterns: the bipartite incidence
// graph between patterns and variables is a forest.
template <class C>
bool is_acyclic(const std::vector<BasicPattern<C>>& pats) {
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < pats.size(); ++i) {
    if (!pats[i].ground()) nodes.push_back(i);
  }
  auto uses = variable_uses(pats);
  std::map<std::string, std::size_t> var_id;
  for (const auto& [v, _] : uses) var_id.emplace(v, pats.size() + var_id.size());
  std::vector<std::size_t> parent(pats.size() + var_id.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto i : nodes) {
    for (const auto& v : pats[i].variables()) {
      auto a = find(i);
      auto b = find(var_id.at(v));
      if (a == b) return false;
      parent[a] = b;
    }
  }
  return true;
}

// Whether the non-ground patterns form one connected component.
template <class C>
bool is_connected(const std::vector<BasicPattern<C>>& pats) {
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < pats.size(); ++i) {
    if (!pats[i].ground()) nodes.push_back(i);
  }
  if (nodes.empty()) return true;
  std::set<std::size_t> seen{nodes.front()};
  std::vector<std::size_t> stack{nodes.front()};
  while (!stack.empty()) {
    auto i = stack.back();
    stack.pop_back();
    for (auto j : nodes) {
      if (seen.count(j)) continue;
      for (const auto& v : pats[i].variables()) {
        if (pats[j].mentions(v)) {
          seen.insert(j);
          stack.push_back(j);
          break;
        }
      }
    }
  }
  return seen.size() == nodes.size();
}

// A path query in the strict sense: every variable in at most two patterns
// and the pattern graph a simple path.
template <class C>
bool is_simple_path(const std::vector<BasicPattern<C>>& pats) {
  if (!is_acyclic(pats) || !is_connected(pats)) return false;
  auto uses = variable_uses(pats);
  std::map<std::size_t, std::size_t> degree;
  for (const auto& [v, idx] : uses) {
    if (idx.size() > 2) return false;
    if (idx.size() == 2) {
      ++degree[idx[0]];
      ++degree[idx[1]];
    }
  }
  for (const auto& [_, d] : degree) {
    if (d > 2) return false;
  }
  return true;
}

// Checks the structural requirements every engine relies on. Queries are
// tree-shaped: a focus variable that is both reached by an object or
// subject expansion and then property-expanded occurs in three patterns.
inline void validate(const PathQuery& q) {
  if (q.patterns.empty()) throw Error(ErrorCode::invalid_query, "query has no patterns");
  auto uses = variable_uses(q.patterns);
  if (!uses.count(q.alpha)) throw Error(ErrorCode::invalid_query, "alpha ?" + q.alpha + " occurs in no pattern");
  if (!uses.count(q.beta)) throw Error(ErrorCode::invalid_query, "beta ?" + q.beta + " occurs in no pattern");
  for (const auto& [v, _] : q.filters) {
    if (!uses.count(v)) throw Error(ErrorCode::invalid_query, "filter on unknown variable ?" + v);
  }
  for (const auto& p : q.patterns) {
    if (p.is_var(Position::s) == false && !p.constant(Position::s).is_uri())
      throw Error(ErrorCode::invalid_query, "literal in subject position");
    if (p.is_var(Position::p) == false && !p.constant(Position::p).is_uri())
      throw Error(ErrorCode::invalid_query, "literal in predicate position");
    auto vars = p.variables();
    std::size_t nvar = 0;
    for (std::size_t i = 0; i < 3; ++i) nvar += p.is_var(static_cast<Position>(i));
    if (vars.size() != nvar) throw Error(ErrorCode::invalid_query, "repeated variable within a pattern");
  }
  if (!is_acyclic(q.patterns)) throw Error(ErrorCode::invalid_query, "query is cyclic");
  if (!is_connected(q.patterns)) throw Error(ErrorCode::invalid_query, "query is disconnected");
}

// A PathQuery resolved against a store. Ground patterns are checked once
// and removed; unknown constants make the query unsatisfiable.
struct PreparedQuery {
  std::vector<TriplePattern> patterns;
  std::string alpha;
  std::string beta;
  bool distinct = true;
  std::map<std::string, std::vector<TermId>> filters;  // sorted
  bool satisfiable = true;

  const std::vector<TermId>* filter_for(const std::string& v) const {
    auto it = filters.find(v);
    return it == filters.end() ? nullptr : &it->second;
  }

  bool passes(const std::string& v, TermId value) const {
    auto* f = filter_for(v);
    return !f || std::binary_search(f->begin(), f->end(), value);
  }
};

inline PreparedQuery prepare(const GraphStore& store, const PathQuery& q) {
  validate(q);
  PreparedQuery out;
  out.alpha = q.alpha;
  out.beta = q.beta;
  out.distinct = q.distinct;
  auto resolve = [&](const TermPattern::Slot& s) -> TriplePattern::Slot {
    if (auto* v = std::get_if<Variable>(&s)) return *v;
    return store.find(std::get<Term>(s)).value_or(kNoTerm);
  };
  for (const auto& p : q.patterns) {
    TriplePattern tp(resolve(p.slots[0]), resolve(p.slots[1]), resolve(p.slots[2]));
    if (tp.ground()) {
      Triple t{tp.constant(Position::s), tp.constant(Position::p), tp.constant(Position::o)};
      if (t.s == kNoTerm || t.p == kNoTerm || t.o == kNoTerm || !store.contains(t)) out.satisfiable = false;
      continue;
    }
    for (std::size_t i = 0; i < 3; ++i) {
      auto pos = static_cast<Position>(i);
      if (!tp.is_var(pos) && tp.constant(pos) == kNoTerm) out.satisfiable = false;
    }
    out.patterns.push_back(std::move(tp));
  }
  for (const auto& [v, terms] : q.filters) {
    auto& ids = out.filters[v];
    for (const auto& t : terms) {
      if (auto id = store.find(t)) ids.push_back(*id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  if (out.patterns.empty()) throw Error(ErrorCode::invalid_query, "query has no variable patterns");
  return out;
}

// Orders of pattern indices in which every pattern after the first shares a
// variable with an earlier one. Starting from `first`, children are visited
// depth first in increasing index order.
inline std::vector<std::size_t> connected_order(const std::vector<TriplePattern>& pats, std::size_t first) {
  std::vector<std::size_t> order;
  std::vector<bool> used(pats.size(), false);
  std::vector<std::size_t> stack{first};
  while (!stack.empty()) {
    auto i = stack.back();
    stack.pop_back();
    if (used[i]) continue;
    used[i] = true;
    order.push_back(i);
    std::vector<std::size_t> next;
    for (std::size_t j = 0; j < pats.size(); ++j) {
      if (used[j]) continue;
      for (const auto& v : pats[i].variables()) {
        if (pats[j].mentions(v)) {
          next.push_back(j);
          break;
        }
      }
    }
    for (auto it = next.rbegin(); it != next.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

// Patterns sharing a variable with exactly one other pattern.
inline std::vector<std::size_t> leaf_patterns(const std::vector<TriplePattern>& pats) {
  std::vector<std::size_t> leaves;
  for (std::size_t i = 0; i < pats.size(); ++i) {
    std::size_t nb = 0;
    for (std::size_t j = 0; j < pats.size(); ++j) {
      if (i == j) continue;
      for (const auto& v : pats[i].variables()) {
        if (pats[j].mentions(v)) {
          ++nb;
          break;
        }
      }
    }
    if (nb <= 1) leaves.push_back(i);
  }
  return leaves;
}

}  // namespace kgx
