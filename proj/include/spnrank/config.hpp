#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spnrank/cluster/discover.hpp"
#include "spnrank/error.hpp"
#include "spnrank/files.hpp"
#include "spnrank/mtl/train.hpp"
#include "spnrank/rank/learner.hpp"
#include "spnrank/rank/linear_baseline.hpp"
#include "spnrank/structure/hard_em.hpp"
#include "spnrank/structure/init.hpp"

namespace spnrank {

struct PairConfig {
  std::int64_t c1 = 10;
  std::int64_t c2 = 0;
  std::size_t max_pairs = 0;  // per set; 0 keeps all
};

struct EmConfig {
  HardEmConfig hard_em;
  double top_fraction = 0.1;  // most-liked share of the data used as EM examples
};

struct ClusterRunConfig {
  cluster::DiscoveryConfig discovery;
  std::string transform = "identity";
};

struct MtlRunConfig {
  mtl::Hyper hyper;
  mtl::SolverConfig solver;
};

// Every tunable of every command. File layout mirrors the members:
//   {"rng_seed": 0, "threads": 1, "structure": {...}, "em": {...},
//    "pairs": {...}, "rank": {...}, "linear": {...}, "cluster": {...},
//    "mtl": {...}, "eval": {"thetas": [10, 20]}}
struct RunConfig {
  std::uint64_t rng_seed = 0;
  std::size_t threads = 1;
  StructureConfig structure;
  EmConfig em;
  PairConfig pairs;
  RankTrainConfig rank;
  LinearTrainConfig linear;
  ClusterRunConfig cluster;
  MtlRunConfig mtl;
  std::vector<std::int64_t> thetas{10, 20};
};

namespace detail {

// Reads known keys out of one JSON object and rejects the rest.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw UsageError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config: '" + where(key) + "' has the wrong type");
    }
  }

  Section sub(const std::string& key) {
    known_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, where(key));
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!known_.count(key)) throw UsageError("config: unknown key '" + where(key) + "'");
    }
  }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> known_;
};

}  // namespace detail

// Overlays the values present in `text` onto `config`.
inline void apply_config_json(const std::string& text, RunConfig& config) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  detail::Section root(j, "");
  root.get("rng_seed", config.rng_seed);
  root.get("threads", config.threads);
  {
    auto s = root.sub("structure");
    s.get("k", config.structure.k);
    s.get("num_decompositions_per_region", config.structure.num_decompositions_per_region);
    s.get("max_region_size_for_leaf", config.structure.max_region_size_for_leaf);
    s.get("node_budget", config.structure.node_budget);
    s.finish();
  }
  {
    auto s = root.sub("em");
    s.get("iterations", config.em.hard_em.iterations);
    s.get("smoothing", config.em.hard_em.smoothing);
    s.get("top_fraction", config.em.top_fraction);
    s.finish();
  }
  {
    auto s = root.sub("pairs");
    s.get("c1", config.pairs.c1);
    s.get("c2", config.pairs.c2);
    s.get("max_pairs", config.pairs.max_pairs);
    s.finish();
  }
  {
    auto s = root.sub("rank");
    auto& r = config.rank;
    s.get("alpha1", r.alpha1);
    s.get("alpha2", r.alpha2);
    s.get("lambda1", r.lambda1);
    s.get("lambda2", r.lambda2);
    s.get("edge_budget", r.edge_budget);
    s.get("prune_weight_threshold", r.prune_weight_threshold);
    s.get("iterations", r.iterations);
    s.get("min_weight_floor", r.min_weight_floor);
    s.get("delta_n_cap_percentile", r.delta_n_cap_percentile);
    s.get("prune_eval_pairs", r.prune_eval_pairs);
    s.get("batch_size", r.batch_size);
    s.get("prune", r.prune);
    std::string rule = r.update_rule == UpdateRule::Additive ? "additive" : "log";
    s.get("update_rule", rule);
    if (rule == "additive") {
      r.update_rule = UpdateRule::Additive;
    } else if (rule == "log") {
      r.update_rule = UpdateRule::LogSpace;
    } else {
      throw UsageError("config: rank.update_rule must be 'additive' or 'log'");
    }
    s.finish();
  }
  {
    auto s = root.sub("linear");
    s.get("epochs", config.linear.epochs);
    s.get("lambda", config.linear.lambda);
    s.finish();
  }
  {
    auto s = root.sub("cluster");
    auto& d = config.cluster.discovery;
    s.get("k_over", d.k_over);
    s.get("n_c", d.n_c);
    s.get("coverage", d.coverage);
    s.get("drop_min_size", d.drop_min_size);
    s.get("drop_distance_factor", d.drop_distance_factor);
    s.get("outer_iterations", d.outer_iterations);
    s.get("kmeans_max_iterations", d.kmeans_max_iterations);
    s.get("activation_percentile", d.activation_percentile);
    s.get("transform", config.cluster.transform);
    s.finish();
  }
  {
    auto s = root.sub("mtl");
    s.get("mu", config.mtl.hyper.mu);
    s.get("gamma", config.mtl.hyper.gamma);
    s.get("lambda", config.mtl.hyper.lambda);
    s.get("latent", config.mtl.solver.latent);
    s.get("max_outer", config.mtl.solver.max_outer);
    s.get("tol", config.mtl.solver.tol);
    s.get("inner_steps", config.mtl.solver.inner_steps);
    s.finish();
  }
  {
    auto s = root.sub("eval");
    s.get("thetas", config.thetas);
    s.finish();
  }
  root.finish();
}

inline RunConfig load_config(const std::string& path) {
  RunConfig c;
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  apply_config_json(text, c);
  return c;
}

}  // namespace spnrank
