#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/spn/evidence.hpp"
#include "spnrank/spn/graph.hpp"

namespace spnrank {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

namespace detail {

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

inline void check_inputs(const SpnGraph& graph, const Evidence& evidence) {
  require_valid(graph);
  require_dimension(graph, evidence);
}

// Log node values with sum semantics (log-sum-exp at sums).
inline void log_sum_values(const SpnGraph& graph, const Evidence& ev, std::vector<double>& values) {
  values.resize(graph.size());
  const auto& nodes = graph.nodes();
  for (NodeId id : graph.topological_order()) {
    const Node& n = nodes[id];
    switch (n.kind) {
      case NodeKind::Leaf:
        values[id] = ev.indicator(n.var, n.polarity) ? 0.0 : kNegInf;
        break;
      case NodeKind::Product: {
        double acc = 0.0;
        for (NodeId c : n.children) acc += values[c];
        values[id] = acc;
        break;
      }
      case NodeKind::Sum: {
        double top = kNegInf;
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          top = std::max(top, safe_log(n.weights[i]) + values[n.children[i]]);
        }
        if (top == kNegInf) {
          values[id] = kNegInf;
          break;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          acc += std::exp(safe_log(n.weights[i]) + values[n.children[i]] - top);
        }
        values[id] = top + std::log(acc);
        break;
      }
    }
  }
}

// Log node values with max semantics. When `choice` is non-null it receives,
// for every sum node, the position of the maximising child (lowest child
// NodeId among ties).
inline void log_max_values(const SpnGraph& graph, const Evidence& ev, std::vector<double>& values,
                           std::vector<std::uint32_t>* choice = nullptr) {
  values.resize(graph.size());
  if (choice) choice->assign(graph.size(), 0);
  const auto& nodes = graph.nodes();
  for (NodeId id : graph.topological_order()) {
    const Node& n = nodes[id];
    switch (n.kind) {
      case NodeKind::Leaf:
        values[id] = ev.indicator(n.var, n.polarity) ? 0.0 : kNegInf;
        break;
      case NodeKind::Product: {
        double acc = 0.0;
        for (NodeId c : n.children) acc += values[c];
        values[id] = acc;
        break;
      }
      case NodeKind::Sum: {
        std::size_t best = 0;
        double best_value = safe_log(n.weights[0]) + values[n.children[0]];
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          const double v = safe_log(n.weights[i]) + values[n.children[i]];
          if (v > best_value || (v == best_value && n.children[i] < n.children[best])) {
            best = i;
            best_value = v;
          }
        }
        values[id] = best_value;
        if (choice) (*choice)[id] = static_cast<std::uint32_t>(best);
        break;
      }
    }
  }
}

inline void linear_sum_values(const SpnGraph& graph, const Evidence& ev, std::vector<double>& values) {
  values.resize(graph.size());
  const auto& nodes = graph.nodes();
  for (NodeId id : graph.topological_order()) {
    const Node& n = nodes[id];
    switch (n.kind) {
      case NodeKind::Leaf:
        values[id] = ev.indicator(n.var, n.polarity) ? 1.0 : 0.0;
        break;
      case NodeKind::Product: {
        double acc = 1.0;
        for (NodeId c : n.children) acc *= values[c];
        values[id] = acc;
        break;
      }
      case NodeKind::Sum: {
        double acc = 0.0;
        for (std::size_t i = 0; i < n.children.size(); ++i) acc += n.weights[i] * values[n.children[i]];
        values[id] = acc;
        break;
      }
    }
  }
}

}  // namespace detail

// Log of the root value. This is the default numeric path: it does not
// underflow on SPNs over thousands of variables.
inline double log_evaluate(const SpnGraph& graph, const Evidence& evidence) {
  detail::check_inputs(graph, evidence);
  std::vector<double> values;
  detail::log_sum_values(graph, evidence, values);
  return values[graph.root()];
}

// Root value in linear space.
inline double evaluate(const SpnGraph& graph, const Evidence& evidence) {
  detail::check_inputs(graph, evidence);
  std::vector<double> values;
  detail::linear_sum_values(graph, evidence, values);
  return values[graph.root()];
}

// Max-product network: same topology and weights as the SPN it came from,
// sum nodes evaluate as max over weight × child value.
class Mpn {
 public:
  explicit Mpn(SpnGraph graph) : graph_(std::move(graph)) { require_valid(graph_); }

  const SpnGraph& graph() const { return graph_; }
  SpnGraph& graph() { return graph_; }
  SpnGraph release() && { return std::move(graph_); }

 private:
  SpnGraph graph_;
};

inline Mpn to_mpn(const SpnGraph& graph) { return Mpn(graph); }

inline double log_max_evaluate(const Mpn& mpn, const Evidence& evidence) {
  require_dimension(mpn.graph(), evidence);
  std::vector<double> values;
  detail::log_max_values(mpn.graph(), evidence, values);
  return values[mpn.graph().root()];
}

inline double max_evaluate(const Mpn& mpn, const Evidence& evidence) {
  return std::exp(log_max_evaluate(mpn, evidence));
}

struct MpeResult {
  double log_root_value = kNegInf;
  std::vector<std::uint8_t> assignment;
  // Indexed by weighted-edge index (SpnGraph::edge_offset).
  std::vector<std::uint64_t> traversal_counts;

  double root_value() const { return std::exp(log_root_value); }
};

// Reusable buffers for repeated MPE passes over one graph.
struct MpeWorkspace {
  std::vector<double> values;
  std::vector<std::uint32_t> choice;
  std::vector<std::uint64_t> visits;
};

namespace detail {

inline void mpe_trace(const SpnGraph& graph, const Evidence& evidence, MpeWorkspace& ws, MpeResult& out) {
  log_max_values(graph, evidence, ws.values, &ws.choice);
  out.log_root_value = ws.values[graph.root()];
  out.traversal_counts.assign(graph.weighted_edge_count(), 0);
  out.assignment.assign(graph.num_variables(), 0);
  for (std::size_t v = 0; v < evidence.size(); ++v) out.assignment[v] = evidence[v] == VarState::True;

  // Top-down: every node is processed after all of its parents, and its
  // visit count is the number of distinct trace paths reaching it.
  ws.visits.assign(graph.size(), 0);
  ws.visits[graph.root()] = 1;
  const auto order = graph.topological_order();
  const auto& nodes = graph.nodes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId id = *it;
    const std::uint64_t visits = ws.visits[id];
    if (visits == 0) continue;
    const Node& n = nodes[id];
    switch (n.kind) {
      case NodeKind::Leaf:
        if (evidence[n.var] == VarState::Marginalized) {
          out.assignment[n.var] = n.polarity == Polarity::Positive;
        }
        break;
      case NodeKind::Product:
        for (NodeId c : n.children) ws.visits[c] += visits;
        break;
      case NodeKind::Sum: {
        const std::uint32_t pos = ws.choice[id];
        ws.visits[n.children[pos]] += visits;
        out.traversal_counts[graph.edge_offset(id) + pos] += visits;
        break;
      }
    }
  }
}

}  // namespace detail

// Bottom-up max pass followed by a top-down argmax trace. Unobserved
// variables the trace never reaches default to False.
inline MpeResult mpe_infer(const Mpn& mpn, const Evidence& evidence, MpeWorkspace& workspace) {
  require_dimension(mpn.graph(), evidence);
  MpeResult result;
  detail::mpe_trace(mpn.graph(), evidence, workspace, result);
  return result;
}

inline MpeResult mpe_infer(const Mpn& mpn, const Evidence& evidence) {
  MpeWorkspace ws;
  return mpe_infer(mpn, evidence, ws);
}

}  // namespace spnrank
