#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kgx/exploration.hpp"
#include "kgx/rng.hpp"
#include "kgx/store.hpp"

namespace kgx {

// Layered typed graph. Layer i nodes are instances of leaf classes under
// Layer<i>; a `selectivity` share of them link to the next layer, which
// shrinks by `shrink` so that the last layer holds few, heavily shared
// values.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t triples = 1'000'000;
  std::size_t layers = 4;
  std::size_t classes_per_layer = 3;
  std::size_t predicates_per_layer = 3;
  std::size_t fanout = 3;
  double selectivity = 0.1;
  double shrink = 0.25;
  // Literal-valued attribute triples per node in layer 0.
  std::size_t attributes = 1;
  std::string base = "http://synth.example/";
};

namespace detail {

inline std::string synth_uri(const SynthConfig& c, const std::string& local) { return "<" + c.base + local + ">"; }

// Node counts per layer such that the expected triple count is near the
// target.
inline std::vector<std::size_t> synth_layer_sizes(const SynthConfig& c) {
  std::vector<double> rel(c.layers);
  double per_unit = 0;
  for (std::size_t i = 0; i < c.layers; ++i) {
    rel[i] = std::pow(c.shrink, static_cast<double>(i));
    double sel = i == 0 ? 1.0 : c.selectivity;
    double edges = i + 1 < c.layers ? sel * static_cast<double>(c.fanout) : 0.0;
    double attrs = i == 0 ? static_cast<double>(c.attributes) : 0.0;
    per_unit += rel[i] * (1.0 + edges + attrs);
  }
  std::vector<std::size_t> out(c.layers);
  double unit = static_cast<double>(c.triples) / per_unit;
  for (std::size_t i = 0; i < c.layers; ++i) out[i] = std::max<std::size_t>(1, static_cast<std::size_t>(unit * rel[i]));
  return out;
}

}  // namespace detail

// Writes the graph as N-Triples. Deterministic in the config.
inline void write_synthetic(const SynthConfig& c, std::ostream& out) {
  if (c.layers < 2 || c.classes_per_layer < 1 || c.predicates_per_layer < 1 || c.fanout < 1) {
    throw Error(ErrorCode::invalid_argument, "synthetic graph needs at least two layers and one class, predicate and edge");
  }
  const std::string type = "<" + std::string(kRdfType) + ">";
  const std::string sub = "<" + std::string(kRdfsSubClassOf) + ">";
  const std::string thing = "<" + std::string(kOwlThing) + ">";
  auto sizes = detail::synth_layer_sizes(c);
  Rng rng = Rng::stream(c.seed, 0);

  for (std::size_t i = 0; i < c.layers; ++i) {
    std::string layer = detail::synth_uri(c, "Layer" + std::to_string(i));
    out << layer << ' ' << sub << ' ' << thing << " .\n";
    for (std::size_t k = 0; k < c.classes_per_layer; ++k) {
      out << detail::synth_uri(c, "Layer" + std::to_string(i) + "_" + std::to_string(k)) << ' ' << sub << ' ' << layer
          << " .\n";
    }
  }
  auto node = [&](std::size_t layer, std::size_t j) {
    return detail::synth_uri(c, "n" + std::to_string(layer) + "_" + std::to_string(j));
  };
  // Predicate and class choices are skewed: index k has weight 1 / (k + 1).
  auto skewed = [&](std::size_t n) {
    double total = 0;
    for (std::size_t k = 0; k < n; ++k) total += 1.0 / static_cast<double>(k + 1);
    double x = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
    for (std::size_t k = 0; k < n; ++k) {
      x -= 1.0 / static_cast<double>(k + 1);
      if (x < 0) return k;
    }
    return n - 1;
  };
  for (std::size_t i = 0; i < c.layers; ++i) {
    for (std::size_t j = 0; j < sizes[i]; ++j) {
      std::string s = node(i, j);
      out << s << ' ' << type << ' '
          << detail::synth_uri(c, "Layer" + std::to_string(i) + "_" + std::to_string(skewed(c.classes_per_layer)))
          << " .\n";
      if (i == 0) {
        for (std::size_t a = 0; a < c.attributes; ++a) {
          out << s << ' ' << detail::synth_uri(c, "attr" + std::to_string(a)) << " \"v" << rng.below(1000) << "\" .\n";
        }
      }
      if (i + 1 == c.layers) continue;
      bool linked = i == 0 || static_cast<double>(rng() >> 11) * 0x1.0p-53 < c.selectivity;
      if (!linked) continue;
      for (std::size_t e = 0; e < c.fanout; ++e) {
        std::string p = detail::synth_uri(c, "p" + std::to_string(i) + "_" + std::to_string(skewed(c.predicates_per_layer)));
        out << s << ' ' << p << ' ' << node(i + 1, rng.below(sizes[i + 1])) << " .\n";
      }
    }
  }
}

inline GraphStore synthetic_store(const SynthConfig& c) {
  std::stringstream text;
  write_synthetic(c, text);
  auto g = load_ntriples(text);
  return materialize_subclass_closure(g, g.subclass_of());
}

// Explorations that follow the layer links: from each layer class, expand
// out-properties and their objects towards the last layer, and mirror that
// with in-properties and subjects from the last layer backwards. Every hop
// takes the most frequent predicate. At most max_steps expansions each.
inline std::vector<Exploration> selective_workload(const SynthConfig& c, std::size_t max_steps = 4) {
  auto cls = [&](std::size_t i) { return Term::uri(c.base + "Layer" + std::to_string(i)); };
  auto pred = [&](std::size_t i) { return Term::uri(c.base + "p" + std::to_string(i) + "_0"); };
  std::vector<Exploration> out;
  auto emit = [&](Exploration e, std::size_t from, bool forward) {
    std::size_t layer = from;
    while (e.steps.size() < max_steps) {
      if (forward ? layer + 1 >= c.layers : layer == 0) break;
      std::size_t hop = forward ? layer : layer - 1;
      e = expand(e, cls(layer), forward ? ExpansionKind::out_property : ExpansionKind::in_property);
      out.push_back(e);
      if (e.steps.size() == max_steps) break;
      e = expand(e, pred(hop), forward ? ExpansionKind::object : ExpansionKind::subject);
      out.push_back(e);
      layer = forward ? layer + 1 : layer - 1;
    }
  };
  for (std::size_t i = 0; i + 1 < c.layers; ++i) emit(Exploration{}, i, true);
  for (std::size_t i = c.layers - 1; i > 0; --i) emit(Exploration{}, i, false);
  return out;
}

}  // namespace kgx
