#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kgx/query.hpp"

namespace kgx {

enum class BarKind : std::uint8_t { class_bar, out_property, in_property };
enum class ChartKind : std::uint8_t { class_chart, property_chart };
enum class ExpansionKind : std::uint8_t { subclass, out_property, in_property, object, subject };
// How "u is of class c" is encoded: rdf:type joined with the materialized
// closure, or rdf:type alone.
enum class MembershipMode : std::uint8_t { closure, direct };

inline std::string_view to_string(BarKind k) {
  switch (k) {
    case BarKind::class_bar: return "class";
    case BarKind::out_property: return "out_property";
    case BarKind::in_property: return "in_property";
  }
  return "?";
}

inline std::string_view to_string(ChartKind k) {
  return k == ChartKind::class_chart ? "class_chart" : "property_chart";
}

inline std::string_view to_string(ExpansionKind k) {
  switch (k) {
    case ExpansionKind::subclass: return "subclass";
    case ExpansionKind::out_property: return "out_property";
    case ExpansionKind::in_property: return "in_property";
    case ExpansionKind::object: return "object";
    case ExpansionKind::subject: return "subject";
  }
  return "?";
}

inline std::string_view to_string(MembershipMode m) { return m == MembershipMode::closure ? "closure" : "direct"; }

inline ExpansionKind expansion_kind_from_string(std::string_view s) {
  if (s == "subclass") return ExpansionKind::subclass;
  if (s == "out_property") return ExpansionKind::out_property;
  if (s == "in_property") return ExpansionKind::in_property;
  if (s == "object") return ExpansionKind::object;
  if (s == "subject") return ExpansionKind::subject;
  throw Error(ErrorCode::invalid_argument, "unknown expansion kind '" + std::string(s) + "'");
}

inline MembershipMode membership_from_string(std::string_view s) {
  if (s == "closure") return MembershipMode::closure;
  if (s == "direct") return MembershipMode::direct;
  throw Error(ErrorCode::invalid_argument, "unknown membership mode '" + std::string(s) + "'");
}

inline BarKind bar_kind_after(ExpansionKind k) {
  switch (k) {
    case ExpansionKind::out_property: return BarKind::out_property;
    case ExpansionKind::in_property: return BarKind::in_property;
    default: return BarKind::class_bar;
  }
}

inline ChartKind chart_kind_of(BarKind k) {
  return k == BarKind::class_bar ? ChartKind::class_chart : ChartKind::property_chart;
}

// Legal transitions between bar kinds and expansions.
inline bool is_legal(BarKind bar, ExpansionKind e) {
  switch (bar) {
    case BarKind::class_bar:
      return e == ExpansionKind::subclass || e == ExpansionKind::out_property || e == ExpansionKind::in_property;
    case BarKind::out_property: return e == ExpansionKind::object;
    case BarKind::in_property: return e == ExpansionKind::subject;
  }
  return false;
}

inline std::vector<ExpansionKind> legal_expansions(BarKind bar) {
  std::vector<ExpansionKind> out;
  for (auto e : {ExpansionKind::subclass, ExpansionKind::out_property, ExpansionKind::in_property,
                 ExpansionKind::object, ExpansionKind::subject}) {
    if (is_legal(bar, e)) out.push_back(e);
  }
  return out;
}

using FilterSet = std::vector<Term>;

struct Step {
  Term category;
  ExpansionKind kind = ExpansionKind::subclass;
  std::optional<FilterSet> filter;  // applied to the chart this step produces

  bool operator==(const Step&) const = default;
};

// B_0 is the subclass expansion of the root bar; each step selects a bar of
// the previous chart and expands it.
struct Exploration {
  Term root = Term::uri(std::string(kOwlThing));
  std::vector<Step> steps;
  std::optional<FilterSet> initial_filter;
  MembershipMode membership = MembershipMode::closure;
  // Category encoding of object/subject expansion charts.
  MembershipMode object_membership = MembershipMode::closure;
  std::string type_prop = std::string(kRdfType);
  std::string subclass_prop = std::string(kRdfsSubClassOf);

  bool operator==(const Exploration&) const = default;
};

struct CompiledChart {
  PathQuery query;
  BarKind bar_kind = BarKind::class_bar;
  ChartKind chart_kind = ChartKind::class_chart;
};

namespace detail {

class Compiler {
 public:
  explicit Compiler(const Exploration& e) : e_(e) {}

  CompiledChart run() {
    // Root bar: instances of root; its subclass expansion is B_0.
    std::string x = fresh("x");
    membership(x, e_.membership, Term::uri(e_.root.lexical));
    focus_ = x;
    bar_ = BarKind::class_bar;
    class_block_ = blocks_.size() - 1;
    subclass();
    if (e_.initial_filter) add_filter(*e_.initial_filter);
    for (const auto& s : e_.steps) {
      if (!is_legal(bar_, s.kind)) {
        throw Error(ErrorCode::illegal_expansion,
                    std::string(to_string(s.kind)) + " expansion is not allowed on " + std::string(to_string(bar_)) +
                        " bars");
      }
      if (!s.category.is_uri()) throw Error(ErrorCode::illegal_expansion, "bar category must be a URI");
      substitute(alpha_, s.category);
      switch (s.kind) {
        case ExpansionKind::subclass: subclass(); break;
        case ExpansionKind::out_property: property(true); break;
        case ExpansionKind::in_property: property(false); break;
        case ExpansionKind::object:
        case ExpansionKind::subject: endpoint(); break;
      }
      if (s.filter) add_filter(*s.filter);
    }
    CompiledChart out;
    out.query.patterns = pats_;
    out.query.alpha = alpha_;
    out.query.beta = focus_;
    out.query.distinct = true;
    out.query.filters = filters_;
    out.bar_kind = bar_;
    out.chart_kind = chart_kind_of(bar_);
    return out;
  }

 private:
  // Patterns stating "var is of class <slot>"; `klass` indexes the pattern
  // whose object holds the class.
  struct Block {
    std::string var;
    std::size_t type_pat;
    std::optional<std::size_t> closure_pat;
    std::size_t klass;
  };

  std::string fresh(const char* stem) { return std::string(stem) + std::to_string(counter_++); }

  Term uri(std::string_view s) const { return Term::uri(std::string(s)); }

  Block membership(const std::string& v, MembershipMode mode, TermPattern::Slot klass) {
    Block b;
    b.var = v;
    if (mode == MembershipMode::closure) {
      std::string t = fresh("t");
      pats_.emplace_back(Variable{v}, uri(e_.type_prop), Variable{t});
      b.type_pat = pats_.size() - 1;
      pats_.emplace_back(Variable{t}, uri(kClosurePredicate), std::move(klass));
      b.closure_pat = pats_.size() - 1;
      b.klass = *b.closure_pat;
    } else {
      pats_.emplace_back(Variable{v}, uri(e_.type_prop), std::move(klass));
      b.type_pat = pats_.size() - 1;
      b.klass = b.type_pat;
    }
    blocks_.push_back(b);
    return b;
  }

  void substitute(const std::string& v, const Term& value) {
    for (auto& p : pats_) {
      for (auto& s : p.slots) {
        if (auto* x = std::get_if<Variable>(&s); x && x->name == v) s = value;
      }
    }
    filters_.erase(v);
  }

  // Refines the focus block to a fresh category variable that is a direct
  // subclass of the old class. A closure block is rewritten in place, since
  // closure membership in a subclass implies membership in the class; any
  // other block stays and gains a second membership block for the subclass.
  void subclass() {
    TermPattern::Slot old = pats_[blocks_[class_block_].klass].slots[2];
    std::string c = fresh("c");
    if (e_.membership == MembershipMode::closure && blocks_[class_block_].closure_pat) {
      pats_[blocks_[class_block_].klass].slots[2] = Variable{c};
    } else {
      membership(blocks_[class_block_].var, e_.membership, Variable{c});
      class_block_ = blocks_.size() - 1;
    }
    pats_.emplace_back(Variable{c}, uri(e_.subclass_prop), std::move(old));
    alpha_ = c;
    bar_ = BarKind::class_bar;
  }

  void property(bool out) {
    std::string p = fresh("p");
    std::string y = fresh("y");
    if (out) pats_.emplace_back(Variable{focus_}, Variable{p}, Variable{y});
    else pats_.emplace_back(Variable{y}, Variable{p}, Variable{focus_});
    other_end_ = y;
    alpha_ = p;
    bar_ = out ? BarKind::out_property : BarKind::in_property;
  }

  void endpoint() {
    std::string c = fresh("c");
    membership(other_end_, e_.object_membership, Variable{c});
    class_block_ = blocks_.size() - 1;
    focus_ = other_end_;
    alpha_ = c;
    bar_ = BarKind::class_bar;
  }

  void add_filter(const FilterSet& f) {
    auto it = filters_.find(focus_);
    if (it == filters_.end()) {
      filters_[focus_] = f;
      return;
    }
    std::vector<Term> keep;
    for (const auto& t : it->second) {
      if (std::find(f.begin(), f.end(), t) != f.end()) keep.push_back(t);
    }
    it->second = std::move(keep);
  }

  const Exploration& e_;
  std::vector<TermPattern> pats_;
  std::vector<Block> blocks_;
  std::map<std::string, std::vector<Term>> filters_;
  std::size_t class_block_ = 0;
  std::string focus_;
  std::string alpha_;
  std::string other_end_;
  BarKind bar_ = BarKind::class_bar;
  int counter_ = 0;
};

}  // namespace detail

inline CompiledChart compile_chart(const Exploration& e) { return detail::Compiler(e).run(); }

inline PathQuery compile(const Exploration& e) { return compile_chart(e).query; }

// Bar kind of the chart the exploration currently shows.
inline BarKind current_bar_kind(const Exploration& e) {
  return e.steps.empty() ? BarKind::class_bar : bar_kind_after(e.steps.back().kind);
}

inline Exploration expand(const Exploration& e, Term category, ExpansionKind kind) {
  BarKind bar = current_bar_kind(e);
  if (!is_legal(bar, kind)) {
    throw Error(ErrorCode::illegal_expansion, std::string(to_string(kind)) + " expansion is not allowed on " +
                                                  std::string(to_string(bar)) + " bars");
  }
  Exploration out = e;
  out.steps.push_back(Step{std::move(category), kind, std::nullopt});
  return out;
}

inline Exploration apply_filter(const Exploration& e, const FilterSet& f) {
  Exploration out = e;
  auto& slot = out.steps.empty() ? out.initial_filter : out.steps.back().filter;
  if (!slot) {
    slot = f;
  } else {
    FilterSet keep;
    for (const auto& t : *slot) {
      if (std::find(f.begin(), f.end(), t) != f.end()) keep.push_back(t);
    }
    slot = std::move(keep);
  }
  return out;
}

// Query for B_0 over `root_class`.
inline PathQuery initial_chart(const GraphStore& store, const Term& root_class,
                               MembershipMode mode = MembershipMode::closure) {
  if (!store.find(root_class)) {
    throw Error(ErrorCode::unknown_term, "unknown root class <" + root_class.lexical + ">");
  }
  Exploration e;
  e.root = root_class;
  e.membership = mode;
  return compile(e);
}

inline nlohmann::json filter_to_json(const FilterSet& f) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : f) arr.push_back(detail::term_to_json(t));
  return arr;
}

inline FilterSet filter_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::invalid_argument, "filter must be an array of terms");
  FilterSet f;
  for (const auto& t : j) f.push_back(detail::term_from_json(t));
  return f;
}

inline nlohmann::json to_json(const Exploration& e) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : e.steps) {
    nlohmann::json js = {{"category", s.category.lexical}, {"kind", std::string(to_string(s.kind))}};
    if (s.filter) js["filter"] = filter_to_json(*s.filter);
    steps.push_back(js);
  }
  nlohmann::json j = {{"root", e.root.lexical},
                      {"steps", steps},
                      {"membership", std::string(to_string(e.membership))},
                      {"object_membership", std::string(to_string(e.object_membership))}};
  if (e.initial_filter) j["initial_filter"] = filter_to_json(*e.initial_filter);
  if (e.type_prop != kRdfType) j["type_prop"] = e.type_prop;
  if (e.subclass_prop != kRdfsSubClassOf) j["subclass_prop"] = e.subclass_prop;
  return j;
}

inline Exploration exploration_from_json(const nlohmann::json& j) {
  try {
    Exploration e;
    if (j.contains("root")) e.root = Term::uri(j.at("root").get<std::string>());
    if (j.contains("membership")) e.membership = membership_from_string(j.at("membership").get<std::string>());
    if (j.contains("object_membership"))
      e.object_membership = membership_from_string(j.at("object_membership").get<std::string>());
    if (j.contains("type_prop")) e.type_prop = j.at("type_prop").get<std::string>();
    if (j.contains("subclass_prop")) e.subclass_prop = j.at("subclass_prop").get<std::string>();
    if (j.contains("initial_filter")) e.initial_filter = filter_from_json(j.at("initial_filter"));
    for (const auto& js : j.value("steps", nlohmann::json::array())) {
      Step s;
      s.category = Term::uri(js.at("category").get<std::string>());
      s.kind = expansion_kind_from_string(js.at("kind").get<std::string>());
      if (js.contains("filter") && !js.at("filter").is_null()) s.filter = filter_from_json(js.at("filter"));
      e.steps.push_back(std::move(s));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed exploration: ") + ex.what());
  }
}

}  // namespace kgx
