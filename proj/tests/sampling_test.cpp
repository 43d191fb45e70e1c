#include <gtest/gtest.h>

#include <cmath>

#include "join_graph_util.hpp"

using namespace kgx;
using namespace kgx::testing;

namespace {

struct SmallGraph {
  JoinGraph g = JoinGraph::from_file(fixture("small_join_graph.json"));
  JoinGraph::Tuple t(const std::string& name) const { return g.locate(name).second; }
  std::vector<JoinGraph::Tuple> path(std::initializer_list<const char*> names) const {
    std::vector<JoinGraph::Tuple> out;
    for (auto* n : names) out.push_back(t(n));
    return out;
  }
};

AuditOptions<JoinGraph::Tuple> never_tip(bool distinct) {
  AuditOptions<JoinGraph::Tuple> o;
  o.distinct = distinct;
  o.tipping.enabled = false;
  return o;
}

AuditOptions<JoinGraph::Tuple> tip_at(std::size_t len, bool distinct) {
  AuditOptions<JoinGraph::Tuple> o;
  o.distinct = distinct;
  o.tip_policy = [len](std::span<const JoinGraph::Tuple> p) { return p.size() == len; };
  return o;
}

}  // namespace

TEST(SmallGraph, FixtureShape) {
  SmallGraph f;
  ASSERT_EQ(f.g.columns(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(f.g.column_size(k), 5u);
  EXPECT_EQ(f.g.beta_column(), 2u);
  EXPECT_EQ(f.g.frontier(1, f.t("t1_2")).size(), 4u);
  EXPECT_TRUE(f.g.frontier(1, f.t("t1_1")).empty());
}

TEST(SmallGraph, ForcedWalkDegrees) {
  SmallGraph f;
  auto g1 = walk_along(f.g, std::span<const JoinGraph::Tuple>(f.path({"t1_2", "t2_2", "t3_2", "t4_2"})));
  EXPECT_EQ(g1.status, WalkStatus::full);
  EXPECT_EQ(g1.degrees, (std::vector<std::uint64_t>{5, 4, 4, 2}));
  EXPECT_EQ(wj_estimate<Rational>(g1), Rational(160));

  auto g2 = walk_along(f.g, std::span<const JoinGraph::Tuple>(f.path({"t1_4", "t2_5", "t3_5", "t4_5"})));
  EXPECT_EQ(g2.degrees, (std::vector<std::uint64_t>{5, 2, 3, 2}));
  EXPECT_EQ(wj_estimate<Rational>(g2), Rational(60));

  auto dead = walk_along(f.g, std::span<const JoinGraph::Tuple>(f.path({"t1_2", "t2_2", "t3_3"})));
  EXPECT_EQ(dead.status, WalkStatus::rejected);
  EXPECT_EQ(wj_estimate<Rational>(dead), Rational(0));
}

TEST(SmallGraph, ForcedWalkRejectsForeignChoice) {
  SmallGraph f;
  auto p = f.path({"t1_1", "t2_1"});
  EXPECT_THROW(walk_along(f.g, std::span<const JoinGraph::Tuple>(p)), Error);
}

TEST(SmallGraph, AuditJoinCount) {
  SmallGraph f;
  auto delta = f.path({"t1_2", "t2_2"});
  auto w = walk_along(f.g, std::span<const JoinGraph::Tuple>(delta));
  Rational suffix = count_suffixes<Rational>(f.g, std::span<const JoinGraph::Tuple>(delta));
  EXPECT_EQ(suffix, Rational(2));
  EXPECT_EQ(caj(std::span<const std::uint64_t>(w.degrees), suffix), Rational(40));

  AuditJoin<JoinGraph, Rational> aj(f.g, tip_at(2, false));
  auto c = aj.contributions(std::span<const JoinGraph::Tuple>(delta), Rational(20));
  EXPECT_EQ(c.total(), Rational(40));

  auto full = f.path({"t1_2", "t2_2", "t3_2", "t4_2"});
  EXPECT_EQ(count_suffixes<Rational>(f.g, std::span<const JoinGraph::Tuple>(full)), Rational(1));
  EXPECT_EQ(aj.contributions(std::span<const JoinGraph::Tuple>(full), Rational(160)).total(), Rational(160));
  auto dead = f.path({"t1_2", "t2_2", "t3_3"});
  EXPECT_EQ(count_suffixes<Rational>(f.g, std::span<const JoinGraph::Tuple>(dead)), Rational(0));
}

TEST(SmallGraph, AuditJoinDistinct) {
  SmallGraph f;
  AuditJoin<JoinGraph, Rational> aj(f.g, tip_at(2, true));
  TermId b = f.g.beta_of(f.t("t3_2"));
  EXPECT_EQ(aj.pr_b(b), Rational(1, 24));
  auto delta = f.path({"t1_2", "t2_2"});
  Rational pr_delta = 1;
  for (auto d : walk_along(f.g, std::span<const JoinGraph::Tuple>(delta)).degrees) pr_delta /= static_cast<long long>(d);
  EXPECT_EQ(pr_delta, Rational(1, 20));

  SuffixEngine<JoinGraph, Rational> probs(f.g, Weighting::probability, true);
  auto w = probs.completions(std::span<const JoinGraph::Tuple>(delta));
  EXPECT_EQ(pr_delta * w.get({0, b}), Rational(1, 80));
  EXPECT_EQ(w.entries.size(), 1u);

  auto c = aj.contributions(std::span<const JoinGraph::Tuple>(delta), 1 / pr_delta);
  EXPECT_EQ(c.total(), Rational(6));
  EXPECT_EQ(Rational(1, 80) / (pr_delta * Rational(1, 24)), Rational(6));
}

TEST(SmallGraph, InflowFamilies) {
  SmallGraph f;
  TermId b = f.g.beta_of(f.t("t3_2"));
  std::map<std::vector<JoinGraph::Tuple>, Rational> families;
  Rational pr = 0;
  std::size_t paths = 0;
  enumerate_walks_to_value(f.g, b, std::span<const JoinGraph::Tuple>(),
                           [&](std::span<const JoinGraph::Tuple> p, std::span<const std::uint64_t> d) {
                             Rational q = 1;
                             for (auto x : d) q /= static_cast<long long>(x);
                             pr += q;
                             ++paths;
                             Rational head = Rational(1) / static_cast<long long>(d[0] * d[1] * d[2]);
                             families[{p.begin(), p.begin() + 3}] = head;
                           });
  EXPECT_EQ(paths, 6u);
  EXPECT_EQ(pr, Rational(1, 24));
  std::multiset<Rational> heads;
  for (auto& [k, v] : families) heads.insert(v);
  EXPECT_EQ(heads, (std::multiset<Rational>{Rational(1, 60), Rational(1, 80), Rational(1, 80)}));

  std::size_t none = 0;
  enumerate_walks_to_value(f.g, 999, std::span<const JoinGraph::Tuple>(), [&](auto, auto) { ++none; });
  EXPECT_EQ(none, 0u);
}

TEST(SmallGraph, ExhaustiveExpectationTippingAtStepTwo) {
  SmallGraph f;
  AuditJoin<JoinGraph, Rational> count(f.g, tip_at(2, false));
  Rational mass;
  auto e = exhaustive_expectation(f.g, count, &mass);
  EXPECT_EQ(mass, Rational(1));
  EXPECT_EQ(e[0], Rational(12));
  AuditJoin<JoinGraph, Rational> distinct(f.g, tip_at(2, true));
  EXPECT_EQ(exhaustive_expectation(f.g, distinct)[0], Rational(2));
}

TEST(SmallGraph, MonteCarloConvergence) {
  SmallGraph f;
  const std::size_t walks = 100000;
  auto run = [&](auto& walker) {
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < walks; ++i) {
      Rng rng = Rng::stream(42, i);
      auto r = walker.walk(rng);
      double v = 0;
      for (auto& [a, x] : r.values) v += x;
      sum += v;
      sq += v * v;
    }
    double mean = sum / walks;
    double se = std::sqrt((sq / walks - mean * mean) / walks);
    return std::pair{mean, se};
  };
  WanderJoin<JoinGraph> wj(f.g, false);
  auto [wm, wse] = run(wj);
  EXPECT_LE(std::abs(wm - 12), 3 * wse);
  AuditOptions<JoinGraph::Tuple> o;
  o.distinct = true;
  o.tipping.threshold = 3;
  AuditJoin<JoinGraph> aj(f.g, o);
  auto [am, ase] = run(aj);
  EXPECT_LE(std::abs(am - 2), 3 * ase);
}

TEST(Sampling, SinglePathGraph) {
  JoinGraph g({1, 1, 1});
  g.add_edge(1, 0, 0);
  g.add_edge(2, 0, 0);
  Rng rng(1);
  auto w = random_walk(g, rng);
  EXPECT_EQ(w.degrees, (std::vector<std::uint64_t>{1, 1, 1}));
  EXPECT_EQ(wj_estimate(w), 1.0);
  AuditJoin<JoinGraph, Rational> aj(g, never_tip(true));
  EXPECT_EQ(aj.pr_b(g.beta_of(0)), Rational(1));
  std::vector<JoinGraph::Tuple> full{0, 0, 0};
  EXPECT_EQ(aj.contributions(std::span<const JoinGraph::Tuple>(full), Rational(1)).total(), Rational(1));
}

TEST(Sampling, EmptyFirstColumn) {
  JoinGraph g({0, 2});
  Rng rng(1);
  EXPECT_THROW(random_walk(g, rng), Error);
}

TEST(Sampling, JoinSizeEstimate) {
  std::vector<FoldStep> steps{{20, 5, 4}};
  EXPECT_DOUBLE_EQ(join_size_estimate(10, steps), 40);
  EXPECT_DOUBLE_EQ(join_size_estimate(7, {}), 7);
  EXPECT_DOUBLE_EQ(fold_factor(FoldStep{5, 0, 0}), 0);
}

// Random small join graphs: walk-space expectations equal brute-force
// answer counts exactly, for several tipping policies.
TEST(Sampling, ExhaustiveUnbiasednessOnRandomGraphs) {
  std::mt19937_64 rng(2024);
  std::size_t graphs = 0, nontrivial = 0;
  for (int round = 0; round < 60; ++round) {
    auto raw = random_join_graph(rng);
    auto g = raw.build();
    auto gamma = as_rational(raw.gamma());
    auto v = as_rational(raw.distinct());
    if (g.columns() >= 3 && !gamma.empty() && gamma != v) ++nontrivial;

    // Wander Join: Σ Pr(γ) C_wj(γ) = |Γ|, with total probability 1.
    {
      AuditJoin<JoinGraph, Rational> wj(g, never_tip(false));
      Rational mass;
      EXPECT_EQ(exhaustive_expectation(g, wj, &mass), gamma) << "round " << round;
      EXPECT_EQ(mass, Rational(1));
    }

    std::vector<std::function<bool(std::span<const JoinGraph::Tuple>)>> policies;
    policies.push_back([](auto p) { return p.empty(); });
    policies.push_back([](auto p) { return p.size() == 1; });
    auto marks = std::make_shared<std::map<std::vector<JoinGraph::Tuple>, bool>>();
    auto seed = rng();
    policies.push_back([marks, seed](std::span<const JoinGraph::Tuple> p) {
      std::vector<JoinGraph::Tuple> key(p.begin(), p.end());
      auto it = marks->find(key);
      if (it != marks->end()) return it->second;
      std::size_t h = seed;
      for (auto t : key) hash_combine(h, t);
      hash_combine(h, key.size());
      bool tip = h % 3 == 0;
      (*marks)[key] = tip;
      return tip;
    });
    for (std::size_t i = 0; i < policies.size(); ++i) {
      for (bool distinct : {false, true}) {
        AuditOptions<JoinGraph::Tuple> o;
        o.distinct = distinct;
        o.tip_policy = policies[i];
        AuditJoin<JoinGraph, Rational> aj(g, o);
        EXPECT_EQ(exhaustive_expectation(g, aj), distinct ? v : gamma)
            << "round " << round << " policy " << i << " distinct " << distinct;
      }
    }
    // threshold rule
    for (bool distinct : {false, true}) {
      AuditOptions<JoinGraph::Tuple> o;
      o.distinct = distinct;
      o.tipping.threshold = 4;
      AuditJoin<JoinGraph, Rational> aj(g, o);
      EXPECT_EQ(exhaustive_expectation(g, aj), distinct ? v : gamma);
    }
    ++graphs;
  }
  EXPECT_GE(graphs, 50u);
  EXPECT_GE(nontrivial, 10u);
}

TEST(Sampling, BetaProbabilityMatchesEnumeration) {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 40; ++round) {
    auto raw = random_join_graph(rng);
    auto g = raw.build();
    AuditJoin<JoinGraph, Rational> aj(g, never_tip(true));
    std::set<TermId> values(raw.beta.begin(), raw.beta.end());
    for (TermId b : values) {
      Rational pr = 0;
      std::map<TermId, Rational> by_group;
      enumerate_walks_to_value(g, b, std::span<const JoinGraph::Tuple>(),
                               [&](std::span<const JoinGraph::Tuple> p, std::span<const std::uint64_t> d) {
                                 Rational q = 1;
                                 for (auto x : d) q /= static_cast<long long>(x);
                                 pr += q;
                                 by_group[g.alpha_of(p[g.alpha_column()])] += q;
                               });
      EXPECT_EQ(aj.pr_b(b), pr);
      for (auto& [a, q] : by_group) EXPECT_EQ(aj.pr_ab(a, b), q);
    }
  }
}

TEST(Sampling, EnumeratedDegreesMatchFrontierRecount) {
  std::mt19937_64 rng(11);
  auto raw = random_join_graph(rng, 4, 10, false);
  while (raw.sizes.size() < 3) raw = random_join_graph(rng, 4, 10, false);
  auto g = raw.build();
  for (TermId b : std::set<TermId>(raw.beta.begin(), raw.beta.end())) {
    enumerate_walks_to_value(g, b, std::span<const JoinGraph::Tuple>(),
                             [&](std::span<const JoinGraph::Tuple> p, std::span<const std::uint64_t> d) {
                               ASSERT_EQ(d[0], raw.sizes[0]);
                               for (std::size_t k = 1; k < p.size(); ++k) {
                                 std::uint64_t n = 0;
                                 for (std::uint32_t x = 0; x < raw.sizes[k]; ++x) n += raw.edges.count({k, p[k - 1], x});
                                 EXPECT_EQ(d[k], n);
                               }
                             });
  }
}

TEST(Sampling, FlowConservation) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 30; ++round) {
    auto g = random_join_graph(rng).build();
    std::function<void(std::vector<JoinGraph::Tuple>&)> check = [&](std::vector<JoinGraph::Tuple>& prefix) {
      const std::size_t l = prefix.size();
      if (l == g.columns()) return;
      auto f = l == 0 ? g.root() : g.frontier(l, g.link_key(l, prefix[g.parent(l)]));
      Rational sum = 0;
      for (auto t : f) {
        prefix.push_back(t);
        sum += count_suffixes<Rational>(g, std::span<const JoinGraph::Tuple>(prefix));
        check(prefix);
        prefix.pop_back();
      }
      EXPECT_EQ(sum, count_suffixes<Rational>(g, std::span<const JoinGraph::Tuple>(prefix)));
    };
    std::vector<JoinGraph::Tuple> p;
    check(p);
  }
}

TEST(Sampling, TippingDisabledMatchesWanderJoin) {
  std::mt19937_64 gen(3);
  for (int round = 0; round < 20; ++round) {
    auto g = random_join_graph(gen).build();
    WanderJoin<JoinGraph> wj(g, false);
    AuditJoin<JoinGraph> aj(g, never_tip(false));
    for (std::uint64_t i = 0; i < 500; ++i) {
      Rng r1 = Rng::stream(9, i), r2 = Rng::stream(9, i);
      auto a = wj.walk(r1);
      auto b = aj.walk(r2);
      EXPECT_EQ(a.status, b.status);
      EXPECT_EQ(a.values, b.values);
    }
  }
}

TEST(Sampling, InfiniteThresholdIsExact) {
  std::mt19937_64 gen(4);
  for (int round = 0; round < 20; ++round) {
    auto raw = random_join_graph(gen);
    auto g = raw.build();
    for (bool distinct : {false, true}) {
      AuditOptions<JoinGraph::Tuple> o;
      o.distinct = distinct;
      o.tipping.threshold = std::numeric_limits<double>::infinity();
      AuditJoin<JoinGraph> aj(g, o);
      Rng rng = Rng::stream(1, 0);
      auto r = aj.walk(rng);
      EXPECT_EQ(r.status, WalkStatus::tipped);
      std::map<TermId, double> got(r.values.begin(), r.values.end());
      std::map<TermId, double> want;
      for (auto [a, n] : distinct ? raw.distinct() : raw.gamma()) want[a] = static_cast<double>(n);
      EXPECT_EQ(got, want);
    }
  }
}

TEST(Sampling, ProbabilityCacheTransparent) {
  std::mt19937_64 gen(8);
  for (int round = 0; round < 10; ++round) {
    auto g = random_join_graph(gen).build();
    AuditOptions<JoinGraph::Tuple> on, off;
    on.tipping.threshold = off.tipping.threshold = 3;
    off.probability_cache = false;
    AuditJoin<JoinGraph> a(g, on), b(g, off);
    for (std::uint64_t i = 0; i < 300; ++i) {
      Rng r1 = Rng::stream(5, i), r2 = Rng::stream(5, i);
      EXPECT_EQ(a.walk(r1).values, b.walk(r2).values);
    }
  }
}

TEST(Sampling, EnumerationCapAbortsWalk) {
  SmallGraph f;
  AuditOptions<JoinGraph::Tuple> o;
  o.tipping.threshold = std::numeric_limits<double>::infinity();
  o.enumeration_cap = 3;
  AuditJoin<JoinGraph> aj(f.g, o);
  Rng rng(1);
  auto r = aj.walk(rng);
  EXPECT_EQ(r.status, WalkStatus::aborted);
  EXPECT_TRUE(r.values.empty());
}

TEST(Sampling, WanderJoinDistinctSeenSet) {
  JoinGraph g({1, 2});
  g.add_edge(1, 0, 0);
  g.add_edge(1, 0, 1);
  g.set_beta(1, {7, 7});
  WanderJoin<JoinGraph> wj(g, true);
  Rng rng(3);
  auto first = wj.walk(rng);
  EXPECT_EQ(first.status, WalkStatus::full);
  EXPECT_EQ(first.values.at(0).second, 2.0);
  auto second = wj.walk(rng);
  EXPECT_EQ(second.status, WalkStatus::duplicate);
  EXPECT_TRUE(second.values.empty());
}
