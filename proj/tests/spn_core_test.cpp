#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "spnrank/spn/graph.hpp"
#include "spnrank/spn/inference.hpp"
#include "spnrank/spn/io.hpp"
#include "spnrank/structure/init.hpp"
#include "support.hpp"

namespace spnrank {
namespace {

using testing::two_var_spn;

TEST(Validate, TwoVarIsValid) {
  const auto g = two_var_spn();
  EXPECT_TRUE(validate(g).ok()) << validate(g).summary();
}

TEST(Validate, SumOverDifferentScopesBreaksCompleteness) {
  std::vector<Node> n{Node::leaf(0, Polarity::Positive), Node::leaf(1, Polarity::Positive),
                      Node::sum({0, 1}, {0.5, 0.5})};
  SpnGraph g(std::move(n), 2, 2);
  EXPECT_TRUE(validate(g).has(Violation::Kind::Completeness, 2));
  EXPECT_FALSE(g.valid());
}

TEST(Validate, ProductOverSameScopeBreaksDecomposability) {
  std::vector<Node> n{Node::leaf(0, Polarity::Positive), Node::leaf(0, Polarity::Negative),
                      Node::product({0, 1})};
  SpnGraph g(std::move(n), 2, 1);
  EXPECT_TRUE(validate(g).has(Violation::Kind::Decomposability, 2));
}

TEST(Validate, ReportsCyclesAndUnreachableNodes) {
  std::vector<Node> n{Node::leaf(0, Polarity::Positive), Node::product({2}), Node::product({1}),
                      Node::leaf(0, Polarity::Negative)};
  SpnGraph g(std::move(n), 1, 1);
  EXPECT_FALSE(g.acyclic());
  const auto& r = validate(g);
  EXPECT_TRUE(std::any_of(r.violations.begin(), r.violations.end(),
                          [](const Violation& v) { return v.kind == Violation::Kind::Cycle; }));
  EXPECT_TRUE(r.has(Violation::Kind::Unreachable, 0));
  EXPECT_TRUE(r.has(Violation::Kind::Unreachable, 3));
  EXPECT_THROW(evaluate(g, Evidence(1)), InvariantError);
}

TEST(Graph, ConstructionRejectsMalformedNodes) {
  EXPECT_THROW(SpnGraph({Node::leaf(0, Polarity::Positive), Node::product({})}, 1, 1), DataError);
  EXPECT_THROW(SpnGraph({Node::leaf(0, Polarity::Positive), Node::product({5})}, 1, 1), DataError);
  EXPECT_THROW(SpnGraph({Node::leaf(3, Polarity::Positive)}, 0, 1), DataError);
  EXPECT_THROW(SpnGraph({Node::leaf(0, Polarity::Positive), Node::sum({0}, {-0.1})}, 1, 1), DataError);
  EXPECT_THROW(SpnGraph({Node::leaf(0, Polarity::Positive), Node::sum({0}, {NAN})}, 1, 1), DataError);
  EXPECT_THROW(SpnGraph({Node::leaf(0, Polarity::Positive), Node::sum({0}, {1.0, 2.0})}, 1, 1), DataError);
}

TEST(Evidence, IndicatorEncoding) {
  const int marg_x1[] = {1, 1, 1, 0};
  const auto ev = Evidence::from_indicators(marg_x1);
  EXPECT_EQ(ev[0], VarState::Marginalized);
  EXPECT_EQ(ev[1], VarState::True);
  const int invalid[] = {0, 0, 1, 0};
  EXPECT_THROW(Evidence::from_indicators(invalid), DataError);
}

TEST(Evaluate, TwoVarWorkedExample) {
  const auto g = two_var_spn();
  const int x1_notx2[] = {1, 0, 0, 1};
  const auto ev = Evidence::from_indicators(x1_notx2);
  EXPECT_NEAR(evaluate(g, ev), 0.222, 1e-12);
  EXPECT_NEAR(std::exp(log_evaluate(g, ev)), 0.222, 1e-12);
}

TEST(Evaluate, TwoVarFullyMarginalizedIsOne) {
  const auto g = two_var_spn();
  EXPECT_NEAR(evaluate(g, Evidence(2)), 1.0, 1e-12);
  EXPECT_NEAR(log_evaluate(g, Evidence(2)), 0.0, 1e-12);
}

TEST(Evaluate, DimensionMismatchThrows) {
  EXPECT_THROW(evaluate(two_var_spn(), Evidence(3)), DataError);
  EXPECT_THROW(log_evaluate(two_var_spn(), Evidence(1)), DataError);
}

TEST(Evaluate, MatchesNetworkPolynomialOnRandomSpns) {
  Rng rng(11);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t d = 2 + seed % 9;
    testing::RandomSpn gen(seed);
    const auto g = gen.build(d, seed % 2 == 0);
    ASSERT_TRUE(g.valid()) << g.validation().summary();
    for (int trial = 0; trial < 5; ++trial) {
      const auto ev = testing::random_evidence(rng, d);
      const double oracle = testing::brute_force_marginal(g, ev);
      EXPECT_TRUE(testing::rel_close(evaluate(g, ev), oracle, 1e-9)) << "seed " << seed;
      EXPECT_TRUE(testing::rel_close(std::exp(log_evaluate(g, ev)), oracle, 1e-9)) << "seed " << seed;
    }
  }
}

TEST(Evaluate, NormalizedSpnMarginalizesToOne) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    testing::RandomSpn gen(seed);
    const auto g = gen.build(2 + seed % 9, true);
    EXPECT_NEAR(evaluate(g, Evidence(g.num_variables())), 1.0, 1e-12);
  }
}

TEST(Evaluate, AddingEvidenceNeverIncreasesValue) {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    testing::RandomSpn gen(seed);
    const auto g = gen.build(6);
    auto ev = Evidence(6);
    double prev = log_evaluate(g, ev);
    for (std::size_t v = 0; v < 6; ++v) {
      ev.set(v, rng.below(2) ? VarState::True : VarState::False);
      const double next = log_evaluate(g, ev);
      EXPECT_LE(next, prev + 1e-12);
      prev = next;
    }
  }
}

TEST(Evaluate, LogAndLinearAgree) {
  Rng rng(9);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    testing::RandomSpn gen(seed);
    const auto g = gen.build(8, false);
    for (int t = 0; t < 5; ++t) {
      const auto ev = testing::random_evidence(rng, 8);
      const double lin = evaluate(g, ev);
      if (lin > 1e-300) {
        EXPECT_TRUE(testing::rel_close(std::exp(log_evaluate(g, ev)), lin, 1e-9));
      }
    }
  }
}

TEST(Evaluate, LogSpaceSurvivesWhereLinearUnderflows) {
  StructureConfig cfg;
  cfg.k = 2;
  cfg.rng_seed = 3;
  const auto g = init_structure(2400, cfg);
  std::vector<std::uint8_t> bits(2400, 1);
  const auto ev = Evidence::from_bits(bits);
  EXPECT_EQ(evaluate(g, ev), 0.0);
  const double lv = log_evaluate(g, ev);
  EXPECT_TRUE(std::isfinite(lv));
  EXPECT_LT(lv, -700.0);
}

TEST(Mpn, SingleSumOverTwoLeaves) {
  SpnGraph g({Node::leaf(0, Polarity::Positive), Node::leaf(0, Polarity::Negative), Node::sum({0, 1}, {0.9, 0.1})},
             2, 1);
  const auto mpn = to_mpn(g);
  EXPECT_DOUBLE_EQ(max_evaluate(mpn, Evidence(1)), 0.9);
  EXPECT_EQ(mpn.graph(), g);
}

TEST(Mpn, RootMatchesBruteForceMax) {
  Rng rng(21);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t d = 2 + seed % 9;
    testing::RandomSpn gen(seed + 1000);
    const auto g = gen.build(d);
    const auto mpn = to_mpn(g);
    for (int t = 0; t < 5; ++t) {
      const auto ev = testing::random_evidence(rng, d);
      const auto oracle = testing::brute_force_max(g, ev);
      EXPECT_TRUE(testing::rel_close(max_evaluate(mpn, ev), oracle.value, 1e-9)) << "seed " << seed;
    }
  }
}

TEST(Mpe, TwoVarInfersX1False) {
  const auto mpn = to_mpn(two_var_spn());
  const int obs[] = {1, 1, 1, 0};
  const auto r = mpe_infer(mpn, Evidence::from_indicators(obs));
  EXPECT_EQ(r.assignment[0], 0);
  EXPECT_EQ(r.assignment[1], 1);
  // 0.8 · max(0.2, 0.8) · 0.4
  EXPECT_NEAR(r.root_value(), 0.256, 1e-12);
  const auto& g = mpn.graph();
  EXPECT_EQ(r.traversal_counts[g.edge_offset(10) + 0], 1u);
  EXPECT_EQ(r.traversal_counts[g.edge_offset(10) + 1], 0u);
  EXPECT_EQ(r.traversal_counts[g.edge_offset(4) + 1], 1u);
  EXPECT_EQ(r.traversal_counts[g.edge_offset(5) + 0], 1u);
  EXPECT_EQ(r.traversal_counts[g.edge_offset(6) + 0] + r.traversal_counts[g.edge_offset(6) + 1], 0u);
}

TEST(Mpe, CompleteEvidenceIsReturnedUnchanged) {
  const auto mpn = to_mpn(two_var_spn());
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const std::uint8_t bits[] = {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)};
      const auto ev = Evidence::from_bits(bits);
      const auto r = mpe_infer(mpn, ev);
      EXPECT_EQ(r.assignment, std::vector<std::uint8_t>(bits, bits + 2));
      EXPECT_EQ(r.log_root_value, log_max_evaluate(mpn, ev));
    }
  }
}

TEST(Mpe, TiesGoToLowestChildId) {
  // Both mixtures give 0.5; the root must pick node 2, not node 3.
  SpnGraph g({Node::leaf(0, Polarity::Positive), Node::leaf(0, Polarity::Negative),
              Node::sum({0, 1}, {0.5, 0.5}), Node::sum({1, 0}, {0.5, 0.5}), Node::sum({3, 2}, {1.0, 1.0})},
             4, 1);
  const auto r = mpe_infer(to_mpn(g), Evidence(1));
  EXPECT_EQ(r.traversal_counts[g.edge_offset(4) + 1], 1u);
  EXPECT_EQ(r.traversal_counts[g.edge_offset(4) + 0], 0u);
  // Inside node 2 the tie between leaves 0 and 1 goes to leaf 0 (x = True).
  EXPECT_EQ(r.assignment[0], 1);
}

TEST(Mpe, AssignmentAttainsBruteForceMaxAndReproducesRoot) {
  Rng rng(33);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t d = 2 + seed % 9;
    testing::RandomSpn gen(seed + 2000);
    const auto g = gen.build(d);
    const auto mpn = to_mpn(g);
    for (int t = 0; t < 5; ++t) {
      const auto ev = testing::random_evidence(rng, d);
      const auto r = mpe_infer(mpn, ev);
      for (std::size_t v = 0; v < d; ++v) {
        if (ev[v] != VarState::Marginalized) {
          EXPECT_EQ(r.assignment[v], ev[v] == VarState::True);
        }
      }
      const auto oracle = testing::brute_force_max(g, ev);
      EXPECT_TRUE(testing::rel_close(testing::naive_value(g, g.root(), r.assignment, true), oracle.value, 1e-9));
      EXPECT_EQ(log_max_evaluate(mpn, Evidence::from_bits(r.assignment)), r.log_root_value);
    }
  }
}

TEST(Mpe, OneOutgoingEdgePerVisitedMaxNode) {
  Rng rng(44);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    testing::RandomSpn gen(seed + 3000);
    const auto g = gen.build(7);
    const auto r = mpe_infer(to_mpn(g), testing::random_evidence(rng, 7));
    // Recount visits top-down from the traversal counts.
    std::vector<std::uint64_t> visits(g.size(), 0);
    visits[g.root()] = 1;
    const auto order = g.topological_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Node& n = g.node(*it);
      if (n.is_product()) {
        for (NodeId c : n.children) visits[c] += visits[*it];
      } else if (n.is_sum()) {
        std::uint64_t out = 0;
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          const auto t = r.traversal_counts[g.edge_offset(*it) + i];
          out += t;
          visits[n.children[i]] += t;
          if (t) {
            EXPECT_EQ(t, visits[*it]);
          }
        }
        EXPECT_EQ(out, visits[*it]);
      }
    }
  }
}

TEST(Serialize, TwoVarRoundTrip) {
  const auto g = two_var_spn();
  const auto back = from_json(to_json(g));
  EXPECT_EQ(back, g);
  EXPECT_EQ(to_json(back), to_json(g));
}

TEST(Serialize, RejectsMalformedStreams) {
  EXPECT_THROW(from_json("not json"), DataError);
  EXPECT_THROW(from_json(R"({"version":2,"num_variables":1,"root":0,"nodes":[]})"), DataError);
  EXPECT_THROW(from_json(R"({"version":1,"num_variables":1,"root":1,"nodes":[
      {"id":0,"kind":"leaf","var":0,"polarity":"positive"},
      {"id":1,"kind":"product","children":[]}]})"),
               DataError);
  EXPECT_THROW(from_json(R"({"version":1,"num_variables":1,"root":0,"nodes":[
      {"id":0,"kind":"blob"}]})"),
               DataError);
  EXPECT_THROW(from_json(R"({"version":1,"num_variables":1,"root":0})"), DataError);
}

TEST(Serialize, LargeGraphRoundTripPreservesEvaluationExactly) {
  StructureConfig cfg;
  cfg.k = 4;
  cfg.num_decompositions_per_region = 2;
  cfg.rng_seed = 8;
  const auto g = init_structure(40, cfg);
  ASSERT_GE(g.size(), 10000u);
  const auto back = from_json(to_json(g));
  ASSERT_EQ(back, g);
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto ev = testing::random_evidence(rng, 40);
    EXPECT_EQ(log_evaluate(back, ev), log_evaluate(g, ev));
  }
}

TEST(Serialize, WeightsKeepFullPrecision) {
  SpnGraph g({Node::leaf(0, Polarity::Positive), Node::leaf(0, Polarity::Negative),
              Node::sum({0, 1}, {0.1 + 0.2, 1.0 / 3.0})},
             2, 1);
  const auto text = to_json(g);
  EXPECT_NE(text.find("0.30000000000000004"), std::string::npos);
  EXPECT_EQ(from_json(text), g);
}

}  // namespace
}  // namespace spnrank
