// Acceptance run: one PASS/FAIL line per headline criterion, exit status 1
// if any fails. Every tolerance and fixture size is fixed below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "spnrank/cluster/agglomerate.hpp"
#include "spnrank/cluster/discover.hpp"
#include "spnrank/cluster/metrics.hpp"
#include "spnrank/cluster/synth.hpp"
#include "spnrank/mtl/synth.hpp"
#include "spnrank/mtl/train.hpp"
#include "spnrank/rank/eval.hpp"
#include "spnrank/rank/learner.hpp"
#include "spnrank/rank/linear_baseline.hpp"
#include "spnrank/rank/pairs.hpp"
#include "spnrank/spn/inference.hpp"
#include "spnrank/spn/io.hpp"
#include "spnrank/structure/hard_em.hpp"
#include "spnrank/structure/init.hpp"
#include "spnrank/synth.hpp"
#include "support.hpp"

namespace spnrank {
namespace {

constexpr double kWorkedExampleTol = 1e-9;
constexpr double kOracleRel = 1e-9;
constexpr std::size_t kOracleSpns = 200;
constexpr std::size_t kGradientMpns = 50;
constexpr double kGradientRel = 1e-4;
constexpr double kTieMargin = 1e-3;
constexpr double kXorMinGain = 0.10;
constexpr double kXorBaselineMax = 0.60;
constexpr double kPruneSlack = 1e-9;
constexpr double kNormTol = 1e-12;
constexpr double kMtlMinAccuracy = 0.95;
constexpr double kLinkTol = 1e-12;
constexpr double kMinAri = 0.95;

// Regression values of the XOR fixture measured by this repository.
constexpr double kXorSpnPinned = 0.7675;
constexpr double kXorLinearPinned = 0.4980;
constexpr double kPinnedTol = 0.005;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && out_.pass) out_.detail = what;
    out_.pass = out_.pass && ok;
  }
  Outcome done(std::string summary) {
    if (out_.pass) out_.detail = std::move(summary);
    return out_;
  }

 private:
  Outcome out_;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Outcome worked_example_exactness() {
  Check c;
  const auto g = testing::two_var_spn();
  const int evidence[] = {1, 0, 0, 1};
  const double v = evaluate(g, Evidence::from_indicators(evidence));
  c.expect(std::abs(v - 0.222) <= kWorkedExampleTol, "value " + fmt(v));
  c.expect(std::abs(std::exp(log_evaluate(g, Evidence::from_indicators(evidence))) - 0.222) <= kWorkedExampleTol, "log value");
  const int x2_true[] = {1, 1, 1, 0};
  const auto r = mpe_infer(to_mpn(g), Evidence::from_indicators(x2_true));
  c.expect(r.assignment[0] == 0, "MPE chose x1 = 1");
  c.expect(r.assignment[1] == 1, "MPE changed observed x2");
  return c.done("S = " + fmt(v) + ", MPE x1 = 0");
}

Outcome oracle_equivalence() {
  Check c;
  Rng rng(101);
  std::size_t evidences = 0;
  for (std::uint64_t seed = 0; seed < kOracleSpns; ++seed) {
    const std::size_t d = 1 + seed % 10;
    testing::RandomSpn gen(seed + 70000, 200);
    const auto g = gen.build(d, seed % 2 == 0);
    const std::string tag = "spn " + std::to_string(seed) + ": ";
    c.expect(g.valid() && g.size() <= 200, tag + "generator out of contract");
    const auto mpn = to_mpn(g);
    for (int t = 0; t < 4; ++t, ++evidences) {
      const auto ev = testing::random_evidence(rng, d);
      const double sum = testing::brute_force_marginal(g, ev);
      c.expect(testing::rel_close(std::exp(log_evaluate(g, ev)), sum, kOracleRel), tag + "evaluate");
      c.expect(testing::rel_close(evaluate(g, ev), sum, kOracleRel), tag + "linear evaluate");
      const auto best = testing::brute_force_max(g, ev);
      c.expect(testing::rel_close(max_evaluate(mpn, ev), best.value, kOracleRel), tag + "MPN root");
      const auto mpe = mpe_infer(mpn, ev);
      c.expect(testing::rel_close(testing::naive_value(g, g.root(), mpe.assignment, true), best.value, kOracleRel),
               tag + "MPE assignment");
      for (std::size_t v = 0; v < d; ++v) {
        if (ev[v] != VarState::Marginalized) c.expect(mpe.assignment[v] == (ev[v] == VarState::True), tag + "evidence");
      }
    }
  }
  return c.done(std::to_string(kOracleSpns) + " SPNs, " + std::to_string(evidences) + " evidence sets");
}

Outcome gradient_fidelity() {
  Check c;
  Rng rng(202);
  std::size_t used = 0, edges = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; used < kGradientMpns && seed < 5000; ++seed) {
    const std::size_t d = 2 + seed % 8;
    testing::RandomSpn gen(seed + 90000);
    const auto g = gen.build(d, false);
    AttributeVector a{"a", 0, {}}, b{"b", 0, {}};
    for (std::size_t v = 0; v < d; ++v) {
      a.bits.push_back(static_cast<std::uint8_t>(rng.below(2)));
      b.bits.push_back(static_cast<std::uint8_t>(rng.below(2)));
    }
    if (testing::naive_value(g, g.root(), a.bits, true) == 0.0 ||
        testing::naive_value(g, g.root(), b.bits, true) == 0.0 ||
        testing::max_product_margin(g, a.bits) < kTieMargin || testing::max_product_margin(g, b.bits) < kTieMargin) {
      continue;
    }
    ++used;
    const auto dt = pair_gradient(to_mpn(g), a, b);
    for (std::size_t e = 0; e < g.weighted_edge_count(); ++e, ++edges) {
      // Δt_i / w_i against ∂/∂w_i, i.e. Δt_i against w_i · ∂/∂w_i.
      const double fd = g.weight(e) * testing::fd_pair_slope(g, e, a.bits, b.bits);
      const double exact = static_cast<double>(dt[e]);
      const double err = std::abs(fd - exact) / std::max(1.0, std::abs(exact));
      worst = std::max(worst, err);
      c.expect(err <= kGradientRel, "seed " + std::to_string(seed) + " edge " + std::to_string(e));
    }
  }
  c.expect(used == kGradientMpns, "only " + std::to_string(used) + " tie-free MPNs");
  return c.done(std::to_string(used) + " MPNs, " + std::to_string(edges) + " edges, worst rel " + fmt(worst));
}

struct XorFixture {
  Dataset train_set, test_set;
  SpnGraph em_graph;
  PairSets pairs;
  RankTrainConfig rank;
};

XorFixture xor_fixture() {
  synth::XorParams xp;  // d = 16, 2000 items, seed 7
  const auto all = synth::xor_likeability(xp);
  auto [tr, te] = synth::split_every(all, 2, 1);
  StructureConfig sc;
  sc.k = 10;
  sc.rng_seed = 1;
  auto g = init_structure(xp.num_variables, sc);
  g = hard_em_refine(g, select_top_fraction(tr, 0.1), {10, 0.1});
  auto pairs = make_pairs(tr, 10, 0, 1000, 3);
  RankTrainConfig rc;
  rc.alpha1 = 1e-8;
  rc.alpha2 = 1e-9;
  rc.prune_weight_threshold = 0.05;
  return {std::move(tr), std::move(te), std::move(g), std::move(pairs), rc};
}

Outcome xor_ranking(const XorFixture& fx) {
  Check c;
  const auto trained = train(fx.em_graph, fx.train_set, fx.pairs, fx.rank);
  const double spn = evaluate_ranking(fx.test_set, score_all(trained.graph, fx.test_set), 10).accuracy;
  const auto lin = linear_baseline_train(fx.train_set, fx.pairs, {});
  const double base = evaluate_ranking(fx.test_set, lin.score_all(fx.test_set), 10).accuracy;
  c.expect(spn - base >= kXorMinGain, "gain " + fmt(spn - base));
  c.expect(base <= kXorBaselineMax, "baseline " + fmt(base));
  c.expect(std::abs(spn - kXorSpnPinned) <= kPinnedTol, "SPN accuracy " + fmt(spn) + " moved from pinned value");
  c.expect(std::abs(base - kXorLinearPinned) <= kPinnedTol, "baseline " + fmt(base) + " moved from pinned value");
  return c.done("SPN " + fmt(spn) + " vs linear " + fmt(base));
}

void check_prune(Check& c, const SpnGraph& g, const Dataset& data, const PairSets& pairs, RankTrainConfig cfg,
                 const std::string& tag) {
  cfg.prune_eval_pairs = 0;  // the evaluation subsample is the whole pair set
  PruneReport rep;
  const auto out = prune(g, data, pairs, cfg, &rep);
  c.expect(validate(out).ok(), tag + "validate failed");
  c.expect(rep.edges_after == out.edge_count(), tag + "report edge count");
  for (double delta : rep.cut_deltas) {
    c.expect(delta >= -kPruneSlack, tag + "cut lowered the objective by " + fmt(-delta));
  }
  const double before = rank_objective(g, data, pairs, cfg).value;
  const double after = rank_objective(out, data, pairs, cfg).value;
  c.expect(after >= before - kPruneSlack * std::max(1.0, std::abs(before)), tag + "objective fell");
  if (out.edge_count() < cfg.edge_budget) return;
  // Budget missed: zeroing any remaining candidate must lower the objective.
  for (std::size_t e = 0; e < out.weighted_edge_count(); ++e) {
    const auto [node, pos] = out.edge_at(e);
    if (out.weight(e) >= cfg.prune_weight_threshold || out.node(node).children.size() < 2) continue;
    auto trial = out;
    trial.set_weight(node, pos, 0.0);
    c.expect(rank_objective(trial, data, pairs, cfg).value < after,
             tag + "edge " + std::to_string(e) + " still satisfies the cut rule");
  }
}

Outcome pruning_contract(const XorFixture& fx) {
  Check c;
  StructureConfig sc;
  sc.k = 4;
  sc.rng_seed = 9;
  const auto fresh = init_structure(fx.train_set.front().bits.size(), sc);
  std::string summary;
  for (double threshold : {0.05, 0.3}) {
    RankTrainConfig cfg = fx.rank;
    cfg.prune_weight_threshold = threshold;
    for (const auto* g : {&fx.em_graph, &fresh}) {
      cfg.edge_budget = g->edge_count() / 2;
      const std::string tag = (g == &fresh ? "fresh" : "EM") + std::string(" graph, threshold ") + fmt(threshold) + ": ";
      check_prune(c, *g, fx.train_set, fx.pairs, cfg, tag);
      PruneReport rep;
      prune(*g, fx.train_set, fx.pairs, cfg, &rep);
      summary += (summary.empty() ? "" : "; ") + std::to_string(rep.edges_before) + " -> " +
                 std::to_string(rep.edges_after) + (rep.budget_met ? " (budget met)" : " (no cut left)");
    }
  }
  return c.done("edges " + summary);
}

Outcome em_and_mtl_monotonicity(const XorFixture& fx) {
  Check c;
  StructureConfig sc;
  sc.k = 10;
  sc.rng_seed = 1;
  const auto g0 = init_structure(16, sc);
  const auto top = select_top_fraction(fx.train_set, 0.1);
  const auto g = hard_em_refine(g0, top, {10, 0.1});
  c.expect(validate(g).ok(), "EM output invalid");
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    if (!n.is_sum()) continue;
    double total = 0.0;
    for (double w : n.weights) {
      c.expect(w > 0.0, "zero-weight child kept at node " + std::to_string(id));
      total += w;
    }
    c.expect(std::abs(total - 1.0) <= kNormTol, "sum node " + std::to_string(id) + " not normalized");
  }

  // Unsmoothed final step by hand: removing the zero-count children must
  // not change any value.
  auto raw = g0;
  std::vector<std::uint64_t> counts;
  detail::mpe_counts(raw, top, counts);
  for (NodeId id = 0; id < raw.size(); ++id) {
    if (!raw.node(id).is_sum()) continue;
    const auto off = raw.edge_offset(id);
    double total = 0.0;
    for (std::size_t i = 0; i < raw.node(id).children.size(); ++i) total += static_cast<double>(counts[off + i]);
    if (total == 0.0) continue;
    for (std::size_t i = 0; i < raw.node(id).children.size(); ++i) {
      raw.set_weight(id, i, static_cast<double>(counts[off + i]) / total);
    }
  }
  auto removed = raw;
  removed.remove_sum_children([&](NodeId id, std::size_t pos) { return removed.node(id).weights[pos] == 0.0; });
  c.expect(removed.size() < raw.size(), "nothing to remove");
  Rng rng(303);
  for (int t = 0; t < 200; ++t) {
    const auto ev = testing::random_evidence(rng, 16);
    c.expect(log_evaluate(removed, ev) == log_evaluate(raw, ev), "evaluation changed after removal");
  }

  const auto planted = mtl::planted({});
  const auto r = mtl::train(planted.train, planted.groups, {}, {});
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    c.expect(r.history[i].objective.total() <= r.history[i - 1].objective.total(),
             "MTL objective rose at iteration " + std::to_string(i));
  }
  const double acc = mtl::mean_accuracy(r.model, planted.test);
  c.expect(acc >= kMtlMinAccuracy, "planted accuracy " + fmt(acc));
  return c.done("EM edges " + std::to_string(g0.edge_count()) + " -> " + std::to_string(g.edge_count()) + ", MTL " +
                std::to_string(r.history.size() - 1) + " iterations, held-out accuracy " + fmt(acc));
}

double double_loop_link(const cluster::Matrix& x, const cluster::Members& a, const cluster::Members& b) {
  double total = 0.0;
  for (auto i : a) {
    for (auto j : b) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < x.cols(); ++k) s += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
      total += std::sqrt(s);
    }
  }
  return total / static_cast<double>(a.size() * b.size());
}

Outcome clustering_oracles() {
  using namespace cluster;
  Check c;
  std::size_t merges = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed + 400);
    const std::size_t n = 2 + rng.below(19);
    std::vector<Members> clusters;
    std::uint32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      Members m;
      for (std::size_t k = 0, size = 1 + rng.below(4); k < size; ++k) m.push_back(next++);
      clusters.push_back(m);
    }
    Matrix x(next, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        c.expect(std::abs(average_link(x, clusters[i], clusters[j]) - double_loop_link(x, clusters[i], clusters[j])) <=
                     kLinkTol,
                 "link oracle");
      }
    }
    // O(n³) reference: rescan every active pair from the raw points.
    const std::size_t target = 1 + rng.below(n);
    AgglomerateConfig cfg;
    cfg.target = target;
    cfg.drop_min_size = 0;
    const auto r = agglomerate(x, clusters, cfg);
    auto ref = clusters;
    std::vector<char> active(n, 1);
    std::size_t step = 0;
    for (std::size_t remaining = n; remaining > target; --remaining, ++step) {
      std::size_t bi = 0, bj = 0;
      double best = INFINITY;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          if (!active[i] || !active[j]) continue;
          const double d = double_loop_link(x, ref[i], ref[j]);
          if (d < best) {
            best = d;
            bi = i;
            bj = j;
          }
        }
      }
      c.expect(step < r.merges.size() && r.merges[step].into == bi && r.merges[step].from == bj,
               "merge sequence differs at seed " + std::to_string(seed));
      ref[bi].insert(ref[bi].end(), ref[bj].begin(), ref[bj].end());
      std::sort(ref[bi].begin(), ref[bi].end());
      active[bj] = 0;
      ++merges;
    }
    c.expect(r.merges.size() == step, "merge count");
    std::vector<Members> kept;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) kept.push_back(ref[i]);
    }
    c.expect(r.clusters == kept, "final clusters at seed " + std::to_string(seed));
  }

  Rng rng(500);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<std::size_t> support(n);
    for (auto& s : support) s = 1 + rng.below(25);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return support[a] > support[b]; });
    std::vector<std::size_t> prefix(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + support[order[i]];
    std::size_t keep = 1;
    while (keep < n && static_cast<double>(prefix[keep]) < 0.9 * static_cast<double>(prefix[n]) * (1 - 1e-12)) ++keep;
    const auto got = representative_prefix(support, 0.9);
    c.expect(got == std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep)),
             "representativeness filter");
  }

  const auto blobs = synth::pattern_patches({8, 100, 12, 16, 10.0, 1.0, 11});
  DiscoveryConfig dc;
  dc.k_over = 40;
  dc.n_c = 8;
  dc.rng_seed = 2;
  const auto model = discover(blobs.features, dc, IdentityTransform{}).model;
  std::vector<int> pred;
  for (Eigen::Index i = 0; i < blobs.features.x.rows(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (Eigen::Index k = 0; k < model.centroids.rows(); ++k) {
      const double d = squared_distance(blobs.features.x, i, model.centroids, k);
      if (d < best_d) {
        best_d = d;
        best = static_cast<std::size_t>(k);
      }
    }
    pred.push_back(static_cast<int>(best));
  }
  const double ari = adjusted_rand_index(blobs.labels, pred);
  c.expect(ari >= kMinAri, "ARI " + fmt(ari));
  return c.done(std::to_string(merges) + " merges matched, blob ARI " + fmt(ari));
}

// synth → init → em → train → prune → eval, every artefact serialised.
std::string pipeline_bytes() {
  synth::XorParams xp;
  xp.num_items = 600;
  const auto data = synth::xor_likeability(xp);
  std::string out = dataset_to_csv(data);
  StructureConfig sc;
  sc.k = 6;
  sc.rng_seed = 11;
  auto g = init_structure(xp.num_variables, sc);
  out += to_json(g);
  g = hard_em_refine(g, select_top_fraction(data, 0.1), {10, 0.1});
  out += to_json(g);
  const auto pairs = make_pairs(data, 10, 0, 500, 11);
  out += pairs_to_csv(data, pairs);
  RankTrainConfig rc;
  rc.alpha1 = 1e-8;
  rc.alpha2 = 1e-9;
  rc.iterations = 4;
  rc.prune = false;
  rc.seed = 11;
  auto trained = train(g, data, pairs, rc);
  for (const auto& h : trained.history) out += format_double(h.objective.value) + "\n";
  out += to_json(trained.graph);
  rc.prune_weight_threshold = 0.05;
  rc.edge_budget = trained.graph.edge_count() / 2;
  const auto pruned = prune(trained.graph, data, pairs, rc);
  out += to_json(pruned);
  for (std::int64_t theta : {10, 20}) {
    const auto rep = evaluate_ranking(data, score_all(pruned, data), theta);
    out += std::to_string(rep.pair_count) + "," + std::to_string(rep.correct) + "," + std::to_string(rep.ties) + "," +
           format_double(rep.accuracy) + "\n";
  }
  return out;
}

Outcome end_to_end_determinism() {
  Check c;
  const auto a = pipeline_bytes();
  const auto b = pipeline_bytes();
  max_threads() = 3;
  const auto threaded = pipeline_bytes();
  max_threads() = 1;
  c.expect(a == b, "two runs differ");
  c.expect(a == threaded, "thread count changed the output");
  return c.done(std::to_string(a.size()) + " bytes identical across runs");
}

}  // namespace
}  // namespace spnrank

int main() {
  using namespace spnrank;
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  };
  report("worked-example-exactness", worked_example_exactness);
  report("oracle-equivalence", oracle_equivalence);
  report("gradient-fidelity", gradient_fidelity);
  const auto fx = xor_fixture();
  report("xor-ranking", [&] { return xor_ranking(fx); });
  report("pruning-contract", [&] { return pruning_contract(fx); });
  report("hard-em-and-mtl-monotonicity", [&] { return em_and_mtl_monotonicity(fx); });
  report("clustering-oracles", clustering_oracles);
  report("end-to-end-determinism", end_to_end_determinism);
  return failures == 0 ? 0 : 1;
}
