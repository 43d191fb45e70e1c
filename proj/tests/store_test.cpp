#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "kgx/pattern.hpp"
#include "test_util.hpp"

using namespace kgx;
using namespace kgx::testing;

TEST(Load, CountsTriplesAndTerms) {
  auto g = store_from(nt(u("a"), u("p"), u("b")) + nt(u("b"), u("p"), u("c")) +
                      "<" + u("a") + "> <" + u("q") + "> \"hello\"@en .\n");
  EXPECT_EQ(g.size(), 3u);
  EXPECT_EQ(g.dictionary().size(), 6u);
}

TEST(Load, DeduplicatesAndSkipsComments) {
  auto g = store_from("# header\n\n" + nt(u("a"), u("p"), u("b")) + nt(u("a"), u("p"), u("b")));
  EXPECT_EQ(g.size(), 1u);
}

TEST(Load, EmptyInputGivesEmptyStore) {
  auto g = store_from("");
  EXPECT_EQ(g.size(), 0u);
  EXPECT_EQ(g.dictionary().size(), 0u);
}

TEST(Load, MalformedLineReportsLineNumber) {
  try {
    store_from(nt(u("a"), u("p"), u("b")) + "<" + u("a") + "> <" + u("p") + "> <" + u("b") + ">\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(store_from("\"lit\" <" + u("p") + "> <" + u("b") + "> .\n"), ParseError);
  EXPECT_THROW(store_from("_:b0 <" + u("p") + "> <" + u("b") + "> .\n"), ParseError);
  EXPECT_THROW(store_from("<> <" + u("p") + "> <" + u("b") + "> .\n"), ParseError);
}

TEST(Load, ReservedPredicateRejected) {
  EXPECT_THROW(store_from(nt(u("a"), std::string(kClosurePredicate), u("b"))), Error);
}

TEST(Load, LiteralsKeepTheirRawForm) {
  std::string lit = R"("a \"q\" b"^^<http://www.w3.org/2001/XMLSchema#string>)";
  auto g = store_from("<" + u("a") + "> <" + u("p") + "> " + lit + " .\n");
  auto id = g.find(Term::literal(lit));
  ASSERT_TRUE(id.has_value());
  EXPECT_EQ(format_term(g.term(*id)), lit);
  EXPECT_EQ(term_label(g.term(*id)), R"(a \"q\" b)");
}

TEST(Dictionary, RoundTrip) {
  std::mt19937_64 rng(7);
  auto raw = random_raw(rng, 60, 12, 4);
  auto g = store_from(to_ntriples(raw));
  for (TermId id = 0; id < g.dictionary().size(); ++id) {
    EXPECT_EQ(*g.find(g.term(id)), id);
  }
  std::set<RawTriple> decoded;
  for (const auto& t : g.triples()) decoded.insert({g.term(t.s).lexical, g.term(t.p).lexical, g.term(t.o).lexical});
  EXPECT_EQ(decoded, std::set<RawTriple>(raw.begin(), raw.end()));
}

TEST(Index, AllOrdersHoldTheSameTriples) {
  std::mt19937_64 rng(3);
  auto g = store_from(to_ntriples(random_raw(rng, 80, 10, 3)));
  std::set<Triple> base(g.triples().begin(), g.triples().end());
  for (auto order : kAllOrders) {
    auto rows = g.index(order).rows();
    EXPECT_EQ(std::set<Triple>(rows.begin(), rows.end()), base) << to_string(order);
    auto lv = levels_of(order);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      auto key = [&](const Triple& t) { return std::tuple(t.at(lv[0]), t.at(lv[1]), t.at(lv[2])); };
      EXPECT_LT(key(rows[i - 1]), key(rows[i]));
    }
  }
}

TEST(Closure, ChainIsReflexiveTransitive) {
  std::string sc(kRdfsSubClassOf);
  auto g = store_from(nt(u("A"), sc, u("B")) + nt(u("B"), sc, u("C")));
  auto c = materialize_subclass_closure(g, g.subclass_of());
  std::set<std::pair<std::string, std::string>> got;
  for (const auto& t : c.triples()) {
    if (t.p == c.closure_predicate()) got.insert({c.term(t.s).lexical, c.term(t.o).lexical});
  }
  std::set<std::pair<std::string, std::string>> want = {{u("A"), u("A")}, {u("B"), u("B")}, {u("C"), u("C")},
                                                        {u("A"), u("B")}, {u("B"), u("C")}, {u("A"), u("C")}};
  EXPECT_EQ(got, want);
  EXPECT_EQ(c.closure_predicate() + 1, c.dictionary().size());
}

TEST(Closure, LoneClassIsReflexive) {
  auto g = store_from(nt(u("i"), std::string(kRdfType), u("X")));
  auto c = materialize_subclass_closure(g, g.subclass_of());
  ASSERT_NE(c.closure_predicate(), kNoTerm);
  auto x = *c.find_uri(u("X"));
  EXPECT_TRUE(c.contains({x, c.closure_predicate(), x}));
  EXPECT_EQ(c.size(), 2u);
}

TEST(Closure, CycleTerminatesWithWarning) {
  std::string sc(kRdfsSubClassOf);
  auto g = store_from(nt(u("A"), sc, u("B")) + nt(u("B"), sc, u("A")) + nt(u("C"), sc, u("A")));
  auto c = materialize_subclass_closure(g, g.subclass_of());
  ASSERT_EQ(c.warnings().size(), 1u);
  EXPECT_NE(c.warnings()[0].find(u("A")), std::string::npos);
  EXPECT_EQ(c.warnings()[0].find(u("C")), std::string::npos);
  auto a = *c.find_uri(u("A")), b = *c.find_uri(u("B"));
  EXPECT_TRUE(c.contains({b, c.closure_predicate(), a}));
  EXPECT_TRUE(c.contains({a, c.closure_predicate(), b}));
}

TEST(Closure, RandomDagMatchesRepeatedSquaring) {
  std::mt19937_64 rng(11);
  const std::size_t n = 20;
  std::string sc(kRdfsSubClassOf);
  std::string text;
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  std::bernoulli_distribution edge(0.15);
  for (std::size_t i = 0; i < n; ++i) {
    // Edges only towards larger indexes keep the relation acyclic.
    for (std::size_t j = i + 1; j < n; ++j) {
      if (edge(rng)) {
        adj[i][j] = true;
        text += nt(u("C" + std::to_string(i)), sc, u("C" + std::to_string(j)));
      }
    }
    text += nt(u("inst" + std::to_string(i)), std::string(kRdfType), u("C" + std::to_string(i)));
  }
  // R := I ∪ A, then square until stable.
  auto reach = adj;
  for (std::size_t i = 0; i < n; ++i) reach[i][i] = true;
  for (bool changed = true; changed;) {
    changed = false;
    auto next = reach;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        if (reach[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (reach[k][j] && !next[i][j]) next[i][j] = changed = true;
    reach = std::move(next);
  }
  auto g = store_from(text);
  auto c = materialize_subclass_closure(g, g.subclass_of());
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      auto ci = *c.find_uri(u("C" + std::to_string(i)));
      auto cj = *c.find_uri(u("C" + std::to_string(j)));
      EXPECT_EQ(c.contains({ci, c.closure_predicate(), cj}), static_cast<bool>(reach[i][j]));
      pairs += reach[i][j];
    }
  }
  EXPECT_EQ(c.size(), g.size() + pairs);
  EXPECT_TRUE(c.warnings().empty());
}

TEST(Closure, Idempotent) {
  std::string sc(kRdfsSubClassOf);
  auto g = store_from(nt(u("A"), sc, u("B")) + nt(u("B"), sc, u("C")) + nt(u("i"), std::string(kRdfType), u("A")));
  auto once = materialize_subclass_closure(g, g.subclass_of());
  auto twice = materialize_subclass_closure(once, once.subclass_of());
  ASSERT_EQ(once.size(), twice.size());
  EXPECT_TRUE(std::equal(once.triples().begin(), once.triples().end(), twice.triples().begin()));
  EXPECT_EQ(once.dictionary().size(), twice.dictionary().size());
}

TEST(Closure, InstanceTypesUntouched) {
  std::string sc(kRdfsSubClassOf), ty(kRdfType);
  auto g = store_from(nt(u("A"), sc, u("B")) + nt(u("i"), ty, u("A")));
  auto c = materialize_subclass_closure(g, g.subclass_of());
  auto i = *c.find_uri(u("i")), b = *c.find_uri(u("B"));
  EXPECT_FALSE(c.contains({i, c.rdf_type(), b}));
}

namespace {

std::vector<TriplePattern> all_shapes(const GraphStore& g, std::mt19937_64& rng) {
  std::vector<TriplePattern> out;
  auto rows = g.triples();
  std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
  for (int mask = 0; mask < 8; ++mask) {
    for (int rep = 0; rep < 3; ++rep) {
      const Triple& t = rows[pick(rng)];
      TriplePattern p;
      const char* names[] = {"s", "p", "o"};
      for (std::size_t i = 0; i < 3; ++i) {
        if (mask & (1 << i)) p.slots[i] = t.at(i);
        else p.slots[i] = Variable{names[i]};
      }
      out.push_back(p);
    }
  }
  // Repeated variable.
  out.push_back(TriplePattern(Variable{"x"}, rows[0].p, Variable{"x"}));
  return out;
}

}  // namespace

TEST(MatchPattern, EqualsLinearScan) {
  std::mt19937_64 rng(5);
  auto raw = random_raw(rng, 50, 6, 3);
  raw.push_back({u("n1"), u("p0"), u("n1")});
  auto g = store_from(to_ntriples(raw));
  for (const auto& pat : all_shapes(g, rng)) {
    std::vector<Triple> want;
    for (const auto& t : g.triples()) {
      if (agrees(pat, t)) want.push_back(t);
    }
    auto m = match_pattern(g, pat);
    auto got = m.to_vector();
    EXPECT_EQ(m.count(), got.size());
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, want) << to_string(pat);
  }
}

TEST(MatchPattern, SimpleCases) {
  auto g = store_from(nt(u("a"), u("p"), u("b")) + nt(u("c"), u("p"), u("d")) + nt(u("a"), u("q"), u("d")));
  auto a = *g.find_uri(u("a")), p = *g.find_uri(u("p")), b = *g.find_uri(u("b"));
  EXPECT_EQ(match_pattern(g, TriplePattern(a, p, b)).count(), 1u);
  EXPECT_EQ(match_pattern(g, TriplePattern(Variable{"x"}, p, Variable{"y"})).count(), 2u);
  EXPECT_EQ(match_pattern(g, TriplePattern(b, p, Variable{"y"})).count(), 0u);
  EXPECT_EQ(match_pattern(g, TriplePattern(kNoTerm, p, Variable{"y"})).count(), 0u);
}

TEST(MatchPattern, VariablePredicateSkipsClosure) {
  std::string sc(kRdfsSubClassOf);
  auto c = store_from(nt(u("A"), sc, u("B")));
  auto closed = materialize_subclass_closure(c, c.subclass_of());
  EXPECT_EQ(closed.size(), 4u);
  EXPECT_EQ(match_pattern(closed, TriplePattern(Variable{"s"}, Variable{"p"}, Variable{"o"})).count(), 1u);
}

TEST(TrieIterator, PosPrefixListsObjects) {
  auto g = store_from(nt(u("a"), u("p"), u("z")) + nt(u("b"), u("p"), u("y")) + nt(u("c"), u("p"), u("z")) +
                      nt(u("a"), u("q"), u("x")));
  TermId p = *g.find_uri(u("p"));
  std::array<TermId, 1> prefix{p};
  TrieIterator it(g.index(IndexOrder::pos), prefix);
  it.open();
  std::vector<TermId> keys;
  for (; !it.at_end(); it.next()) keys.push_back(it.key());
  std::vector<TermId> want{*g.find_uri(u("z")), *g.find_uri(u("y"))};
  std::sort(want.begin(), want.end());
  EXPECT_EQ(keys, want);

  std::array<TermId, 1> missing{*g.find_uri(u("x"))};
  TrieIterator empty(g.index(IndexOrder::pos), missing);
  empty.open();
  EXPECT_TRUE(empty.at_end());
}

TEST(TrieIterator, SeekPastEndIsAtEnd) {
  auto g = store_from(nt(u("a"), u("p"), u("b")));
  TrieIterator it(g.index(IndexOrder::spo));
  it.open();
  it.seek(kNoTerm - 1);
  EXPECT_TRUE(it.at_end());
}

TEST(TrieIterator, ReplayMatchesSortedSetOracle) {
  std::mt19937_64 rng(17);
  auto g = store_from(to_ntriples(random_raw(rng, 300, 40, 5)));
  std::uint64_t seeks = 0;
  for (auto order : kAllOrders) {
    auto lv = levels_of(order);
    // Oracle: nested sorted sets per level.
    std::map<TermId, std::map<TermId, std::set<TermId>>> trie;
    for (const auto& t : g.triples()) trie[t.at(lv[0])][t.at(lv[1])].insert(t.at(lv[2]));
    TrieIterator it(g.index(order), {}, &seeks);
    it.open();
    std::vector<TermId> got, want;
    std::uniform_int_distribution<int> coin(0, 2);
    std::uniform_int_distribution<TermId> jump(0, 8);
    auto level_keys = [&](auto& m) {
      std::vector<TermId> ks;
      for (auto& [k, _] : m) ks.push_back(k);
      return ks;
    };
    auto replay = [&](const std::vector<TermId>& keys, auto&& descend) {
      std::size_t pos = 0;
      while (!it.at_end()) {
        ASSERT_LT(pos, keys.size());
        ASSERT_EQ(it.key(), keys[pos]);
        got.push_back(it.key());
        want.push_back(keys[pos]);
        descend(keys[pos]);
        if (coin(rng) == 0) {
          TermId target = it.key() + jump(rng);
          it.seek(target);
          pos = std::lower_bound(keys.begin(), keys.end(), target) - keys.begin();
        } else {
          it.next();
          ++pos;
        }
      }
      EXPECT_EQ(pos, keys.size());
    };
    replay(level_keys(trie), [&](TermId k0) {
      it.open();
      auto& l1 = trie[k0];
      replay(level_keys(l1), [&](TermId k1) {
        it.open();
        auto& l2 = l1[k1];
        replay(std::vector<TermId>(l2.begin(), l2.end()), [](TermId) {});
        it.up();
      });
      it.up();
    });
    EXPECT_EQ(got, want);
  }
  EXPECT_GT(seeks, 0u);
}

TEST(PatternStats, Counts) {
  std::string text;
  // 10 triples, 4 distinct objects.
  for (int i = 0; i < 10; ++i) text += nt(u("s" + std::to_string(i)), u("p"), u("o" + std::to_string(i % 4)));
  auto g = store_from(text);
  auto st = pattern_stats(g, TriplePattern(Variable{"s"}, *g.find_uri(u("p")), Variable{"o"}));
  EXPECT_EQ(st.match_count, 10u);
  EXPECT_EQ(st.distinct_at(Position::o), 4u);
  EXPECT_EQ(st.distinct_at(Position::s), 10u);
  EXPECT_FALSE(st.distinct[1].has_value());
  auto none = pattern_stats(g, TriplePattern(Variable{"s"}, *g.find_uri(u("s1")), Variable{"o"}));
  EXPECT_EQ(none.match_count, 0u);
  EXPECT_EQ(none.distinct_at(Position::s), 0u);
  EXPECT_EQ(none.distinct_at(Position::o), 0u);
}

TEST(PatternStats, EqualsScanAndDedup) {
  std::mt19937_64 rng(23);
  auto g = store_from(to_ntriples(random_raw(rng, 120, 15, 4)));
  for (const auto& pat : all_shapes(g, rng)) {
    std::array<std::set<TermId>, 3> vals;
    std::uint64_t n = 0;
    for (const auto& t : g.triples()) {
      if (!agrees(pat, t)) continue;
      ++n;
      for (std::size_t i = 0; i < 3; ++i) vals[i].insert(t.at(i));
    }
    auto st = pattern_stats(g, pat);
    EXPECT_EQ(st.match_count, n);
    for (std::size_t i = 0; i < 3; ++i) {
      if (pat.is_var(static_cast<Position>(i))) {
        EXPECT_EQ(st.distinct_at(static_cast<Position>(i)), vals[i].size());
        EXPECT_LE(st.distinct_at(static_cast<Position>(i)), st.match_count);
      }
    }
  }
}
