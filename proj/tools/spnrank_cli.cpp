#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spnrank/cluster/discover.hpp"
#include "spnrank/cluster/synth.hpp"
#include "spnrank/config.hpp"
#include "spnrank/csv.hpp"
#include "spnrank/files.hpp"
#include "spnrank/mtl/io.hpp"
#include "spnrank/mtl/synth.hpp"
#include "spnrank/mtl/train.hpp"
#include "spnrank/parallel.hpp"
#include "spnrank/rank/dataset.hpp"
#include "spnrank/rank/eval.hpp"
#include "spnrank/rank/learner.hpp"
#include "spnrank/rank/pairs.hpp"
#include "spnrank/rank/probe.hpp"
#include "spnrank/spn/io.hpp"
#include "spnrank/structure/hard_em.hpp"
#include "spnrank/structure/init.hpp"
#include "spnrank/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spnrank;

namespace {

constexpr const char* kConfigEnv = "SPNRANK_CONFIG";

void emit(const json& j) { std::cout << j.dump() << '\n'; }

// JSON has no infinities; unreachable items score "-inf".
json number(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

// --config has to be known before the other options are declared, since
// their defaults come from the file.
std::string config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  if (const char* env = std::getenv(kConfigEnv); env && *env) return env;
  return {};
}

std::string join(const std::vector<std::size_t>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, text.find(',') != std::string::npos ? ',' : ' ')) {
    const auto b = token.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    token = token.substr(b, token.find_last_not_of(' ') - b + 1);
    std::size_t v = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      throw UsageError(what + ": bad attribute index '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::unordered_map<std::string, std::int64_t> load_likes(const std::string& path) {
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 2 || f[0] != "id" || f[1] != "like_count") reader.fail("expected header 'id,like_count'");
  std::unordered_map<std::string, std::int64_t> out;
  while (reader.next(f)) {
    if (f.size() != 2) reader.fail("expected 2 fields");
    const auto n = reader.number<std::int64_t>(f[1], "like_count");
    if (n < 0) reader.fail("negative like_count");
    if (!out.emplace(f[0], n).second) reader.fail("duplicate id '" + f[0] + "'");
  }
  return out;
}

std::unordered_map<std::string, std::vector<std::uint8_t>> load_semantic(const std::string& path) {
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 2 || f[0] != "id" || f[1] != "bits") reader.fail("expected header 'id,bits'");
  std::unordered_map<std::string, std::vector<std::uint8_t>> out;
  std::size_t width = 0;
  while (reader.next(f)) {
    if (f.size() != 2) reader.fail("expected 2 fields");
    std::vector<std::uint8_t> bits;
    for (char c : f[1]) {
      if (c != '0' && c != '1') reader.fail("bits must be a string of '0'/'1'");
      bits.push_back(c == '1');
    }
    if (!out.empty() && bits.size() != width) reader.fail("semantic bit strings differ in length");
    width = bits.size();
    if (!out.emplace(f[0], std::move(bits)).second) reader.fail("duplicate id '" + f[0] + "'");
  }
  return out;
}

json prune_json(const PruneReport& r) {
  return {{"candidates", r.candidates},         {"cuts", r.cuts},
          {"edges_before", r.edges_before},     {"edges_after", r.edges_after},
          {"objective_before", r.objective_before}, {"objective_after", r.objective_after},
          {"budget_met", r.budget_met}};
}

json eval_json(const EvalReport& r) {
  json buckets = json::array();
  for (const auto& b : r.buckets) {
    buckets.push_back({{"min_gap", b.min_gap}, {"max_gap", b.max_gap}, {"pair_count", b.pair_count},
                       {"correct", b.correct}, {"ties", b.ties}, {"accuracy", b.accuracy}});
  }
  return {{"theta", r.theta}, {"pair_count", r.pair_count}, {"correct", r.correct},
          {"ties", r.ties},   {"accuracy", r.accuracy},     {"buckets", buckets}};
}

std::string history_csv(const std::vector<TrainHistoryRow>& rows) {
  std::string out = "iteration,objective,p1_term,p2_term,edge_count,train_pair_accuracy\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + format_double(r.objective.value) + "," +
           format_double(r.objective.p1_term) + "," + format_double(r.objective.p2_term) + "," +
           std::to_string(r.objective.edge_count) + "," + format_double(r.train_pair_accuracy) + "\n";
  }
  return out;
}

PairSets pairs_for(const RunConfig& cfg, const Dataset& data, const std::string& path) {
  if (!path.empty()) return load_pairs(path, data, cfg.pairs.c1, cfg.pairs.c2);
  return make_pairs(data, cfg.pairs.c1, cfg.pairs.c2, cfg.pairs.max_pairs, cfg.rng_seed);
}

void add_pair_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--c1", cfg.pairs.c1, "P1 gap: like counts differ by more than this")->capture_default_str();
  sub->add_option("--c2", cfg.pairs.c2, "P2 gap: like counts differ by at most this")->capture_default_str();
  sub->add_option("--max-pairs", cfg.pairs.max_pairs, "per-set subsample size, 0 keeps all")->capture_default_str();
}

void add_rank_options(CLI::App* sub, RunConfig& cfg, std::string& rule) {
  auto& r = cfg.rank;
  sub->add_option("--alpha1", r.alpha1, "P1 learning rate")->capture_default_str();
  sub->add_option("--alpha2", r.alpha2, "P2 learning rate")->capture_default_str();
  sub->add_option("--lambda1", r.lambda1, "P1 objective weight")->capture_default_str();
  sub->add_option("--lambda2", r.lambda2, "P2 objective weight")->capture_default_str();
  sub->add_option("--iterations", r.iterations, "training iterations")->capture_default_str();
  sub->add_option("--edge-budget", r.edge_budget, "E0, target edge count for pruning")->capture_default_str();
  sub->add_option("--prune-threshold", r.prune_weight_threshold, "prune candidates have weight below this")->capture_default_str();
  sub->add_option("--floor", r.min_weight_floor, "minimum sum weight after an update")->capture_default_str();
  sub->add_option("--delta-cap", r.delta_n_cap_percentile, "cap like gaps at this percentile of P1 gaps, 0 disables")->capture_default_str();
  sub->add_option("--prune-eval-pairs", r.prune_eval_pairs, "pairs per set used to score cuts")->capture_default_str();
  sub->add_option("--batch-size", r.batch_size, "pairs per weight snapshot")->capture_default_str();
  sub->add_option("--update-rule", rule, "additive (w += step/w) or log (w *= exp(step))")
      ->check(CLI::IsMember({"additive", "log"}))
      ->capture_default_str();
}

void apply_rule(RunConfig& cfg, const std::string& rule) {
  cfg.rank.update_rule = rule == "log" ? UpdateRule::LogSpace : UpdateRule::Additive;
}

}  // namespace

int run(int argc, char** argv) {
  RunConfig cfg;
  const std::string cfg_path = config_path(argc, argv);
  if (!cfg_path.empty()) cfg = load_config(cfg_path);

  CLI::App app{"Sum-product network ranking of visual attributes"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string cfg_flag;
  app.add_option("--config", cfg_flag, std::string("JSON config file (default from $") + kConfigEnv + ")");
  app.add_option("--threads", cfg.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.rng_seed, "master random seed")->capture_default_str();
  std::string rule = cfg.rank.update_rule == UpdateRule::LogSpace ? "log" : "additive";

  // data-synth
  std::string kind, out;
  synth::XorParams xp;
  synth::SeparableParams sp;
  mtl::PlantedParams pp;
  synth::PatternParams cp;
  bool binary = false;
  auto* synth_cmd = app.add_subcommand("data-synth", "write a synthetic dataset");
  synth_cmd->add_option("--kind", kind, "xor | separable | planted-mtl | blobs")
      ->required()
      ->check(CLI::IsMember({"xor", "separable", "planted-mtl", "blobs"}));
  synth_cmd->add_option("--out", out, "output file (directory for planted-mtl)")->required();
  synth_cmd->add_option("--items", xp.num_items, "items (xor, separable)")->capture_default_str();
  synth_cmd->add_option("--vars", xp.num_variables, "attributes per item (xor, separable)")->capture_default_str();
  synth_cmd->add_option("--xor-pairs", xp.xor_pairs, "attribute pairs driving likes (xor)")->capture_default_str();
  synth_cmd->add_option("--likes-per-pair", xp.likes_per_pair, "likes per active pair (xor)")->capture_default_str();
  synth_cmd->add_option("--noise", xp.noise, "uniform extra likes (xor)")->capture_default_str();
  synth_cmd->add_option("--margin", sp.margin, "likes per unit hidden score (separable)")->capture_default_str();
  synth_cmd->add_option("--dimension", pp.dimension, "feature dimension (planted-mtl, blobs)")->capture_default_str();
  synth_cmd->add_option("--latent", pp.latent, "planted latent size (planted-mtl)")->capture_default_str();
  synth_cmd->add_option("--tasks", pp.tasks, "tasks (planted-mtl)")->capture_default_str();
  synth_cmd->add_option("--groups", pp.groups, "task groups (planted-mtl)")->capture_default_str();
  synth_cmd->add_option("--train-per-task", pp.train_per_task, "(planted-mtl)")->capture_default_str();
  synth_cmd->add_option("--test-per-task", pp.test_per_task, "(planted-mtl)")->capture_default_str();
  synth_cmd->add_option("--label-noise", pp.label_noise, "label flip probability (planted-mtl)")->capture_default_str();
  synth_cmd->add_option("--patterns", cp.patterns, "visual patterns (blobs)")->capture_default_str();
  synth_cmd->add_option("--images", cp.images, "images (blobs)")->capture_default_str();
  synth_cmd->add_option("--patches", cp.patches_per_image, "patches per image (blobs)")->capture_default_str();
  synth_cmd->add_option("--separation", cp.separation, "pattern centre spread (blobs)")->capture_default_str();
  synth_cmd->add_option("--pattern-noise", cp.noise, "noise around a centre (blobs)")->capture_default_str();
  synth_cmd->add_flag("--binary", binary, "binary feature file (blobs)");

  // pairs
  std::string data_path, pairs_path;
  auto* pairs = app.add_subcommand("pairs", "build P1/P2 training pairs");
  pairs->add_option("--data", data_path, "dataset CSV")->required();
  pairs->add_option("--out", out, "pair CSV")->required();
  add_pair_options(pairs, cfg);

  // spn-init
  std::size_t vars = 0;
  auto* init = app.add_subcommand("spn-init", "initial SPN structure");
  auto* init_vars = init->add_option("--vars", vars, "number of attributes");
  init->add_option("--data", data_path, "take the attribute count from this dataset")->excludes(init_vars);
  init->add_option("--out", out, "SPN file")->required();
  init->add_option("--k", cfg.structure.k, "sum nodes per region")->capture_default_str();
  init->add_option("--decompositions", cfg.structure.num_decompositions_per_region, "decompositions per region")->capture_default_str();
  init->add_option("--leaf-region-size", cfg.structure.max_region_size_for_leaf, "regions this small are not split")->capture_default_str();
  init->add_option("--node-budget", cfg.structure.node_budget, "maximum node count")->capture_default_str();

  // spn-em
  std::string spn_path;
  auto* em = app.add_subcommand("spn-em", "hard-EM weight refinement on the most-liked items");
  em->add_option("--spn", spn_path, "input SPN")->required();
  em->add_option("--data", data_path, "dataset CSV")->required();
  em->add_option("--out", out, "output SPN")->required();
  em->add_option("--iterations", cfg.em.hard_em.iterations, "EM iterations")->capture_default_str();
  em->add_option("--smoothing", cfg.em.hard_em.smoothing, "count smoothing")->capture_default_str();
  em->add_option("--top-fraction", cfg.em.top_fraction, "share of most-liked items used")->capture_default_str();

  // spn-train
  std::string history_path;
  bool no_prune = false;
  auto* trn = app.add_subcommand("spn-train", "train SPN weights on ranking pairs");
  trn->add_option("--spn", spn_path, "input SPN")->required();
  trn->add_option("--data", data_path, "dataset CSV")->required();
  trn->add_option("--pairs", pairs_path, "pair CSV (built from the data when omitted)");
  trn->add_option("--out", out, "output SPN")->required();
  trn->add_option("--history", history_path, "per-iteration CSV");
  trn->add_flag("--no-prune", no_prune, "skip pruning between iterations");
  add_pair_options(trn, cfg);
  add_rank_options(trn, cfg, rule);

  // spn-prune
  auto* prn = app.add_subcommand("spn-prune", "prune low-weight edges without lowering the objective");
  prn->add_option("--spn", spn_path, "input SPN")->required();
  prn->add_option("--data", data_path, "dataset CSV")->required();
  prn->add_option("--pairs", pairs_path, "pair CSV (built from the data when omitted)");
  prn->add_option("--out", out, "output SPN")->required();
  add_pair_options(prn, cfg);
  add_rank_options(prn, cfg, rule);

  // spn-eval
  std::string curve_path;
  auto* ev = app.add_subcommand("spn-eval", "pairwise ranking accuracy at each threshold");
  ev->add_option("--spn", spn_path, "SPN file")->required();
  ev->add_option("--data", data_path, "dataset CSV")->required();
  ev->add_option("--theta", cfg.thetas, "like-count gap thresholds")->capture_default_str();
  ev->add_option("--out", out, "report JSON (stdout when omitted)");
  ev->add_option("--curve", curve_path, "accuracy-vs-threshold CSV");

  // spn-rank
  std::string id_a, id_b;
  auto* rnk = app.add_subcommand("spn-rank", "score items, or compare two of them");
  rnk->add_option("--spn", spn_path, "SPN file")->required();
  rnk->add_option("--data", data_path, "dataset CSV")->required();
  auto* opt_a = rnk->add_option("--a", id_a, "first item id");
  auto* opt_b = rnk->add_option("--b", id_b, "second item id");
  opt_a->needs(opt_b);
  opt_b->needs(opt_a);
  rnk->add_option("--out", out, "ranking CSV (stdout when omitted)");

  // probe-attrset
  std::vector<std::string> set_args;
  std::string sets_file;
  auto* probe = app.add_subcommand("probe-attrset", "log root value of attribute sets, ranked");
  probe->add_option("--spn", spn_path, "SPN file")->required();
  probe->add_option("--set", set_args, "attribute indices, comma separated (repeatable)");
  probe->add_option("--sets-file", sets_file, "one set per line");
  probe->add_option("--out", out, "result CSV (stdout when omitted)");

  // cluster-discover
  std::string features_path, model_path, log_path;
  auto& dc = cfg.cluster.discovery;
  auto* disc = app.add_subcommand("cluster-discover", "discover data-driven attributes from patch features");
  disc->add_option("--features", features_path, "patch features (CSV or binary)")->required();
  disc->add_option("--out", out, "cluster model JSON")->required();
  disc->add_option("--log", log_path, "per-iteration CSV");
  disc->add_option("--k-over", dc.k_over, "k-means clusters")->capture_default_str();
  disc->add_option("--n-c", dc.n_c, "clusters after agglomeration")->capture_default_str();
  disc->add_option("--coverage", dc.coverage, "share of image support kept")->capture_default_str();
  disc->add_option("--drop-min-size", dc.drop_min_size, "smaller clusters may be dropped")->capture_default_str();
  disc->add_option("--drop-factor", dc.drop_distance_factor, "drop when nearest link exceeds this times the median")->capture_default_str();
  disc->add_option("--outer-iterations", dc.outer_iterations, "transform/cluster rounds")->capture_default_str();
  disc->add_option("--kmeans-iterations", dc.kmeans_max_iterations, "Lloyd iterations")->capture_default_str();
  disc->add_option("--activation-percentile", dc.activation_percentile, "member distance percentile used as radius")->capture_default_str();
  disc->add_option("--transform", cfg.cluster.transform, "identity | lda")->capture_default_str();

  // cluster-assign
  std::string likes_path, semantic_path;
  auto* asg = app.add_subcommand("cluster-assign", "attribute dataset from a cluster model");
  asg->add_option("--model", model_path, "cluster model JSON")->required();
  asg->add_option("--features", features_path, "patch features (CSV or binary)")->required();
  asg->add_option("--out", out, "dataset CSV")->required();
  asg->add_option("--likes", likes_path, "CSV id,like_count");
  asg->add_option("--semantic", semantic_path, "CSV id,bits appended after the cluster bits");

  // mtl-train
  std::vector<std::string> task_paths;
  std::string groups_path;
  auto* mtr = app.add_subcommand("mtl-train", "multi-task attribute classifiers");
  mtr->add_option("--task", task_paths, "task CSV, one per task in order")->required();
  mtr->add_option("--groups", groups_path, "groups JSON (one group when omitted)");
  mtr->add_option("--out", out, "model JSON")->required();
  mtr->add_option("--history", history_path, "per-iteration CSV");
  mtr->add_option("--mu", cfg.mtl.hyper.mu, "group sparsity weight")->capture_default_str();
  mtr->add_option("--gamma", cfg.mtl.hyper.gamma, "l1 weight on L")->capture_default_str();
  mtr->add_option("--lambda", cfg.mtl.hyper.lambda, "Frobenius weight on L")->capture_default_str();
  mtr->add_option("--latent", cfg.mtl.solver.latent, "K, 0 means min(d, 2M)")->capture_default_str();
  mtr->add_option("--max-outer", cfg.mtl.solver.max_outer, "outer iterations")->capture_default_str();
  mtr->add_option("--tol", cfg.mtl.solver.tol, "relative decrease to stop")->capture_default_str();

  // mtl-predict
  auto* mpr = app.add_subcommand("mtl-predict", "predict attributes with a trained model");
  mpr->add_option("--model", model_path, "model JSON")->required();
  mpr->add_option("--task", task_paths, "task CSV, one per task in order")->required();
  mpr->add_option("--out", out, "prediction CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  max_threads() = cfg.threads;
  cfg.structure.rng_seed = cfg.rank.seed = cfg.linear.seed = cfg.mtl.solver.seed = dc.rng_seed = cfg.rng_seed;
  apply_rule(cfg, rule);
  if (no_prune) cfg.rank.prune = false;

  if (synth_cmd->parsed()) {
    json files = json::array();
    if (kind == "xor") {
      xp.seed = cfg.rng_seed;
      save_dataset(out, synth::xor_likeability(xp));
      write_text_file(out + ".truth.json",
                      json{{"kind", "xor"}, {"xor_pairs", xp.xor_pairs}, {"likes_per_pair", xp.likes_per_pair}, {"noise", xp.noise}}
                          .dump() + "\n");
      files = {out, out + ".truth.json"};
    } else if (kind == "separable") {
      sp.num_items = xp.num_items;
      sp.num_variables = xp.num_variables;
      sp.seed = cfg.rng_seed;
      const auto d = synth::separable(sp);
      save_dataset(out, d.data);
      write_text_file(out + ".truth.json", json{{"kind", "separable"}, {"hidden_weights", d.hidden_weights}}.dump() + "\n");
      files = {out, out + ".truth.json"};
    } else if (kind == "planted-mtl") {
      pp.seed = cfg.rng_seed;
      const auto p = mtl::planted(pp);
      fs::create_directories(out);
      for (std::size_t m = 0; m < p.train.size(); ++m) {
        const auto tr = (fs::path(out) / ("train_" + std::to_string(m) + ".csv")).string();
        const auto te = (fs::path(out) / ("test_" + std::to_string(m) + ".csv")).string();
        mtl::save_task_csv(tr, p.train[m]);
        mtl::save_task_csv(te, p.test[m]);
        files.push_back(tr);
        files.push_back(te);
      }
      const auto g = (fs::path(out) / "groups.json").string();
      write_text_file(g, mtl::groups_to_json(p.groups));
      mtl::Model truth{p.L, p.S, {}, p.groups};
      const auto t = (fs::path(out) / "truth.json").string();
      mtl::save_model(t, truth);
      files.push_back(g);
      files.push_back(t);
    } else {
      cp.dimension = pp.dimension;
      cp.seed = cfg.rng_seed;
      const auto b = synth::pattern_patches(cp);
      cluster::save_features(out, b.features, binary);
      std::string truth = "image_id,patch_index,pattern\n";
      for (std::size_t i = 0; i < b.features.size(); ++i) {
        truth += b.features.refs[i].image_id + "," + std::to_string(b.features.refs[i].patch_index) + "," +
                 std::to_string(b.labels[i]) + "\n";
      }
      write_text_file(out + ".truth.csv", truth);
      files = {out, out + ".truth.csv"};
    }
    emit({{"command", "data-synth"}, {"kind", kind}, {"files", files}});
  } else if (pairs->parsed()) {
    const auto data = load_dataset(data_path);
    const auto p = make_pairs(data, cfg.pairs.c1, cfg.pairs.c2, cfg.pairs.max_pairs, cfg.rng_seed);
    save_pairs(out, data, p);
    emit({{"command", "pairs"}, {"p1", p.p1.size()}, {"p2", p.p2.size()}});
  } else if (init->parsed()) {
    if (!data_path.empty()) vars = dataset_width(load_dataset(data_path));
    if (vars == 0) throw UsageError("spn-init needs --vars or --data");
    const auto g = init_structure(vars, cfg.structure);
    save_spn(out, g);
    emit({{"command", "spn-init"}, {"variables", vars}, {"nodes", g.size()}, {"edges", g.edge_count()}});
  } else if (em->parsed()) {
    const auto data = load_dataset(data_path);
    HardEmReport rep;
    auto g = hard_em_refine(load_spn(spn_path), select_top_fraction(data, cfg.em.top_fraction), cfg.em.hard_em, &rep);
    save_spn(out, g);
    emit({{"command", "spn-em"}, {"log_likelihood", rep.log_likelihood}, {"node_count", rep.node_count},
          {"removed_edges", rep.removed_edges}, {"edges", g.edge_count()}});
  } else if (trn->parsed()) {
    const auto data = load_dataset(data_path);
    const auto p = pairs_for(cfg, data, pairs_path);
    const auto res = train(load_spn(spn_path), data, p, cfg.rank);
    save_spn(out, res.graph);
    if (!history_path.empty()) write_text_file(history_path, history_csv(res.history));
    json prunes = json::array();
    for (const auto& r : res.prune_reports) prunes.push_back(prune_json(r));
    const auto& last = res.history.back();
    emit({{"command", "spn-train"}, {"p1", p.p1.size()}, {"p2", p.p2.size()}, {"objective", last.objective.value},
          {"train_pair_accuracy", last.train_pair_accuracy}, {"edges", res.graph.edge_count()}, {"prune", prunes}});
  } else if (prn->parsed()) {
    const auto data = load_dataset(data_path);
    const auto p = pairs_for(cfg, data, pairs_path);
    PruneReport rep;
    const auto g = prune(load_spn(spn_path), data, p, cfg.rank, &rep);
    save_spn(out, g);
    json j = prune_json(rep);
    j["command"] = "spn-prune";
    emit(j);
  } else if (ev->parsed()) {
    const auto data = load_dataset(data_path);
    const auto scores = score_all(load_spn(spn_path), data);
    json reports = json::array();
    std::string curve = "theta,pair_count,correct,ties,accuracy\n";
    for (auto theta : cfg.thetas) {
      const auto r = evaluate_ranking(data, scores, theta);
      reports.push_back(eval_json(r));
      curve += std::to_string(theta) + "," + std::to_string(r.pair_count) + "," + std::to_string(r.correct) + "," +
              std::to_string(r.ties) + "," + format_double(r.accuracy) + "\n";
    }
    const json j{{"command", "spn-eval"}, {"reports", reports}};
    if (!curve_path.empty()) write_text_file(curve_path, curve);
    if (!out.empty()) write_text_file(out, j.dump() + "\n");
    emit(j);
  } else if (rnk->parsed()) {
    const auto data = load_dataset(data_path);
    const auto g = load_spn(spn_path);
    if (!id_a.empty()) {
      const auto index = index_by_id(data);
      auto find = [&](const std::string& id) {
        const auto it = index.find(id);
        if (it == index.end()) throw DataError("no item with id '" + id + "'");
        return it->second;
      };
      const double sa = score(g, data[find(id_a)]);
      const double sb = score(g, data[find(id_b)]);
      emit({{"command", "spn-rank"}, {"a", id_a}, {"b", id_b}, {"score_a", number(sa)}, {"score_b", number(sb)},
            {"order", to_string(order_scores(sa, sb))}});
    } else {
      const auto scores = score_all(g, data);
      std::vector<std::size_t> order(data.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
      std::string csv = "rank,id,like_count,score\n";
      for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& item = data[order[r]];
        csv += std::to_string(r + 1) + "," + item.id + "," + std::to_string(item.like_count) + "," +
               format_double(scores[order[r]]) + "\n";
      }
      if (out.empty()) {
        std::cout << csv;
      } else {
        write_text_file(out, csv);
      }
    }
  } else if (probe->parsed()) {
    std::vector<AttributeSet> sets;
    for (const auto& s : set_args) sets.push_back(parse_index_list(s, "--set"));
    if (!sets_file.empty()) {
      std::istringstream in(read_text_file(sets_file));
      std::string line;
      std::size_t n = 0;
      while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        try {
          sets.push_back(parse_index_list(line, sets_file + ":" + std::to_string(n)));
        } catch (const UsageError& e) {
          throw DataError(e.what());
        }
      }
    }
    if (sets.empty()) throw UsageError("probe-attrset needs --set or --sets-file");
    std::string csv = "set,log_value,rank\n";
    for (const auto& r : probe_sets(load_spn(spn_path), sets)) {
      csv += join(r.set, ' ') + "," + format_double(r.log_value) + "," + std::to_string(r.rank) + "\n";
    }
    if (out.empty()) {
      std::cout << csv;
    } else {
      write_text_file(out, csv);
    }
  } else if (disc->parsed()) {
    const auto features = cluster::load_features(features_path);
    const auto transform = cluster::make_transform(cfg.cluster.transform);
    const auto res = cluster::discover(features, dc, *transform);
    cluster::save_model(out, res.model);
    if (!log_path.empty()) {
      std::string csv = "iteration,kmeans_clusters,kmeans_iterations,kmeans_inertia,dropped,agglomerated,kept,coverage\n";
      for (const auto& l : res.log) {
        csv += std::to_string(l.iteration) + "," + std::to_string(l.kmeans_clusters) + "," +
               std::to_string(l.kmeans_iterations) + "," + format_double(l.kmeans_inertia) + "," +
               std::to_string(l.dropped) + "," + std::to_string(l.agglomerated) + "," + std::to_string(l.kept) + "," +
               format_double(l.coverage) + "\n";
      }
      write_text_file(log_path, csv);
    }
    emit({{"command", "cluster-discover"}, {"clusters", res.model.size()}, {"dimension", res.model.centroids.cols()}});
  } else if (asg->parsed()) {
    const auto model = cluster::load_model(model_path);
    const auto features = cluster::load_features(features_path);
    const auto likes = likes_path.empty() ? std::unordered_map<std::string, std::int64_t>{} : load_likes(likes_path);
    const auto sem = semantic_path.empty() ? std::unordered_map<std::string, std::vector<std::uint8_t>>{}
                                           : load_semantic(semantic_path);
    const auto ds = cluster::attribute_dataset(model, features, likes, sem);
    save_dataset(out, ds);
    emit({{"command", "cluster-assign"}, {"items", ds.size()}, {"width", ds.empty() ? 0 : ds[0].bits.size()}});
  } else if (mtr->parsed()) {
    const auto data = mtl::load_tasks(task_paths);
    const auto groups = groups_path.empty() ? mtl::TaskGroups::single(data.size())
                                            : mtl::groups_from_json(read_text_file(groups_path), data.size());
    const auto res = mtl::train(data, groups, cfg.mtl.hyper, cfg.mtl.solver);
    mtl::save_model(out, res.model);
    if (!history_path.empty()) {
      std::string csv = "iteration,objective,hinge,group,l1,ridge,step_s,step_l\n";
      for (const auto& h : res.history) {
        csv += std::to_string(h.iteration) + "," + format_double(h.objective.total()) + "," +
               format_double(h.objective.hinge) + "," + format_double(h.objective.group) + "," +
               format_double(h.objective.l1) + "," + format_double(h.objective.ridge) + "," +
               format_double(h.step_s) + "," + format_double(h.step_l) + "\n";
      }
      write_text_file(history_path, csv);
    }
    emit({{"command", "mtl-train"}, {"iterations", res.history.size() - 1}, {"converged", res.converged},
          {"objective", res.history.back().objective.total()}, {"train_accuracy", mtl::task_accuracy(res.model, data)}});
  } else if (mpr->parsed()) {
    const auto model = mtl::load_model(model_path);
    const auto data = mtl::load_tasks(task_paths);
    const auto acc = mtl::task_accuracy(model, data);
    std::string csv = "task,row,label,margin,tie,truth\n";
    for (std::size_t m = 0; m < data.size(); ++m) {
      for (Eigen::Index i = 0; i < data[m].x.rows(); ++i) {
        const auto p = mtl::predict(model, data[m].x.row(i).transpose(), m);
        csv += std::to_string(m) + "," + std::to_string(i) + "," + std::to_string(p.label) + "," +
               format_double(p.margin) + "," + (p.tie ? "1" : "0") + "," + (data[m].y[i] > 0 ? "1" : "-1") + "\n";
      }
    }
    if (!out.empty()) write_text_file(out, csv);
    emit({{"command", "mtl-predict"}, {"accuracy", acc}, {"mean_accuracy", mtl::mean_accuracy(model, data)}});
  }
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
