#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgx/join_space.hpp"

namespace kgx {

// Explicit join graph over tuple indices. Column k > 0 is linked to
// parents[k]; by default the graph is a chain. Group and counted values are
// per-tuple ids on the alpha and beta columns; without an alpha column every
// tuple falls into group 0.
class JoinGraph {
 public:
  using Tuple = std::uint32_t;

  JoinGraph() = default;

  // sizes[k] tuples in column k; parents[0] is ignored.
  explicit JoinGraph(std::vector<std::size_t> sizes, std::vector<std::size_t> parents = {}) {
    const std::size_t n = sizes.size();
    if (n == 0) throw Error(ErrorCode::invalid_argument, "join graph needs at least one column");
    if (parents.empty()) {
      parents.resize(n);
      for (std::size_t k = 1; k < n; ++k) parents[k] = k - 1;
    }
    if (parents.size() != n) throw Error(ErrorCode::invalid_argument, "parents size mismatch");
    parents_ = std::move(parents);
    children_.assign(n, {});
    for (std::size_t k = 1; k < n; ++k) {
      if (parents_[k] >= k) throw Error(ErrorCode::invalid_argument, "parent must precede its column");
      children_[parents_[k]].push_back(k);
    }
    sizes_ = sizes;
    root_.resize(sizes[0]);
    for (std::size_t i = 0; i < sizes[0]; ++i) root_[i] = static_cast<Tuple>(i);
    adj_.assign(n, {});
    radj_.assign(n, {});
    for (std::size_t k = 1; k < n; ++k) {
      adj_[k].assign(sizes[parents_[k]], {});
      radj_[k].assign(sizes[k], {});
    }
    names_.assign(n, {});
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < sizes[k]; ++i) names_[k].push_back("t" + std::to_string(k + 1) + "_" + std::to_string(i + 1));
    }
    std::vector<TermId> beta(sizes[n - 1]);
    for (std::size_t i = 0; i < beta.size(); ++i) beta[i] = static_cast<TermId>(i);
    set_beta(n - 1, std::move(beta));
  }

  // Adds the edge parent tuple `from` (in parent(col)) -> tuple `to` in col.
  void add_edge(std::size_t col, Tuple from, Tuple to) {
    if (col == 0 || col >= columns()) throw Error(ErrorCode::invalid_argument, "edge column out of range");
    if (from >= sizes_[parents_[col]] || to >= sizes_[col]) throw Error(ErrorCode::invalid_argument, "edge tuple out of range");
    auto& fwd = adj_[col][from];
    if (std::find(fwd.begin(), fwd.end(), to) != fwd.end()) return;
    fwd.insert(std::upper_bound(fwd.begin(), fwd.end(), to), to);
    auto& rev = radj_[col][to];
    rev.insert(std::upper_bound(rev.begin(), rev.end(), from), from);
  }

  void set_alpha(std::size_t col, std::vector<TermId> values) {
    if (col >= columns() || values.size() != sizes_[col]) throw Error(ErrorCode::invalid_argument, "alpha values size mismatch");
    alpha_column_ = col;
    alpha_values_ = std::move(values);
  }

  void set_beta(std::size_t col, std::vector<TermId> values) {
    if (col >= columns() || values.size() != sizes_[col]) throw Error(ErrorCode::invalid_argument, "beta values size mismatch");
    beta_column_ = col;
    beta_values_ = std::move(values);
    beta_index_.clear();
    for (std::size_t i = 0; i < beta_values_.size(); ++i) beta_index_[beta_values_[i]].push_back(static_cast<Tuple>(i));
  }

  void set_names(std::vector<std::vector<std::string>> names) { names_ = std::move(names); }
  const std::string& name(std::size_t col, Tuple t) const { return names_[col][t]; }
  std::size_t column_size(std::size_t col) const { return sizes_[col]; }

  // JoinSpace
  std::size_t columns() const { return sizes_.size(); }
  std::size_t parent(std::size_t col) const { return parents_[col]; }
  const std::vector<std::size_t>& children(std::size_t col) const { return children_[col]; }
  std::span<const Tuple> root() const { return root_; }
  LinkKey link_key(std::size_t, Tuple parent_tuple) const { return parent_tuple; }
  std::span<const Tuple> frontier(std::size_t col, LinkKey key) const { return adj_[col][key]; }
  LinkKey up_key(std::size_t, Tuple t) const { return t; }
  std::span<const Tuple> reverse_frontier(std::size_t col, LinkKey key) const { return radj_[col][key]; }
  std::size_t alpha_column() const { return alpha_column_; }
  std::size_t beta_column() const { return beta_column_; }
  TermId alpha_of(Tuple t) const { return alpha_values_.empty() ? 0 : alpha_values_[t]; }
  TermId beta_of(Tuple t) const { return beta_values_[t]; }

  std::span<const Tuple> beta_tuples(TermId b) const {
    auto it = beta_index_.find(b);
    if (it == beta_index_.end()) return {};
    return it->second;
  }

  // Average out-degree of the parent column into `col`.
  double fold_factor(std::size_t col) const {
    if (col == 0) return static_cast<double>(sizes_[0]);
    std::size_t edges = 0;
    for (const auto& f : adj_[col]) edges += f.size();
    auto p = sizes_[parents_[col]];
    return p == 0 ? 0.0 : static_cast<double>(edges) / static_cast<double>(p);
  }

  // Reads {columns, edges, beta_column, alpha_column?, parents?,
  // alpha_values?, beta_values?}. Columns are 1-based in the file; value
  // maps send tuple names to labels.
  static JoinGraph from_json(const nlohmann::json& j, std::vector<std::string>* labels = nullptr) {
    auto cols = j.at("columns").get<std::vector<std::vector<std::string>>>();
    std::vector<std::size_t> sizes;
    std::map<std::string, std::pair<std::size_t, Tuple>> where;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      sizes.push_back(cols[k].size());
      for (std::size_t i = 0; i < cols[k].size(); ++i) {
        if (!where.emplace(cols[k][i], std::pair{k, static_cast<Tuple>(i)}).second) {
          throw Error(ErrorCode::invalid_argument, "duplicate tuple name " + cols[k][i]);
        }
      }
    }
    std::vector<std::size_t> parents;
    if (j.contains("parents")) {
      parents.push_back(0);
      auto ps = j.at("parents").get<std::vector<std::size_t>>();
      if (ps.size() + 1 != cols.size()) throw Error(ErrorCode::invalid_argument, "parents must list columns 2..n");
      for (auto p : ps) {
        if (p == 0) throw Error(ErrorCode::invalid_argument, "parents are 1-based");
        parents.push_back(p - 1);
      }
    }
    JoinGraph g(sizes, parents);
    g.set_names(cols);
    auto locate = [&](const std::string& name) {
      auto it = where.find(name);
      if (it == where.end()) throw Error(ErrorCode::invalid_argument, "unknown tuple " + name);
      return it->second;
    };
    for (const auto& e : j.at("edges")) {
      auto [ca, ta] = locate(e.at(0).get<std::string>());
      auto [cb, tb] = locate(e.at(1).get<std::string>());
      if (ca > cb) {
        std::swap(ca, cb);
        std::swap(ta, tb);
      }
      if (cb == 0 || g.parent(cb) != ca) throw Error(ErrorCode::invalid_argument, "edge between non-adjacent columns");
      g.add_edge(cb, ta, tb);
    }
    std::vector<std::string> local;
    auto& lab = labels ? *labels : local;
    std::map<std::string, TermId> ids;
    for (std::size_t i = 0; i < lab.size(); ++i) ids[lab[i]] = static_cast<TermId>(i);
    auto intern = [&](const std::string& s) {
      auto [it, fresh] = ids.emplace(s, static_cast<TermId>(lab.size()));
      if (fresh) lab.push_back(s);
      return it->second;
    };
    auto values = [&](std::size_t col, const char* field) {
      std::vector<TermId> v(sizes[col]);
      for (std::size_t i = 0; i < sizes[col]; ++i) {
        const auto& name = cols[col][i];
        if (j.contains(field) && j.at(field).contains(name)) v[i] = intern(j.at(field).at(name).get<std::string>());
        else v[i] = intern(name);
      }
      return v;
    };
    auto column_arg = [&](const char* field) {
      auto c = j.at(field).get<std::size_t>();
      if (c == 0 || c > cols.size()) throw Error(ErrorCode::invalid_argument, std::string(field) + " out of range");
      return c - 1;
    };
    if (j.contains("alpha_column")) {
      auto c = column_arg("alpha_column");
      g.set_alpha(c, values(c, "alpha_values"));
    }
    auto b = column_arg("beta_column");
    g.set_beta(b, values(b, "beta_values"));
    return g;
  }

  static JoinGraph from_file(const std::string& path, std::vector<std::string>* labels = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open " + path);
    return from_json(nlohmann::json::parse(in), labels);
  }

  // Finds a tuple by name in any column.
  std::pair<std::size_t, Tuple> locate(const std::string& name) const {
    for (std::size_t k = 0; k < names_.size(); ++k) {
      for (std::size_t i = 0; i < names_[k].size(); ++i) {
        if (names_[k][i] == name) return {k, static_cast<Tuple>(i)};
      }
    }
    throw Error(ErrorCode::invalid_argument, "unknown tuple " + name);
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<Tuple> root_;
  std::vector<std::vector<std::vector<Tuple>>> adj_;
  std::vector<std::vector<std::vector<Tuple>>> radj_;
  std::vector<std::vector<std::string>> names_;
  std::size_t alpha_column_ = 0;
  std::size_t beta_column_ = 0;
  std::vector<TermId> alpha_values_;
  std::vector<TermId> beta_values_;
  std::map<TermId, std::vector<Tuple>> beta_index_;
};

static_assert(JoinSpace<JoinGraph>);

}  // namespace kgx
