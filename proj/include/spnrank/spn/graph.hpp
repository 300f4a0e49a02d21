#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spnrank/error.hpp"

namespace spnrank {

using NodeId = std::uint32_t;

enum class NodeKind : std::uint8_t { Leaf, Sum, Product };
enum class Polarity : std::uint8_t { Positive, Negative };

// One vertex of a sum-product network. Leaves are the indicators x_v
// (Positive) and x̄_v (Negative); sum nodes carry one weight per child.
struct Node {
  NodeKind kind = NodeKind::Leaf;
  std::uint32_t var = 0;
  Polarity polarity = Polarity::Positive;
  std::vector<NodeId> children;
  std::vector<double> weights;

  static Node leaf(std::uint32_t var, Polarity polarity) {
    Node n;
    n.kind = NodeKind::Leaf;
    n.var = var;
    n.polarity = polarity;
    return n;
  }
  static Node sum(std::vector<NodeId> children, std::vector<double> weights) {
    Node n;
    n.kind = NodeKind::Sum;
    n.children = std::move(children);
    n.weights = std::move(weights);
    return n;
  }
  static Node product(std::vector<NodeId> children) {
    Node n;
    n.kind = NodeKind::Product;
    n.children = std::move(children);
    return n;
  }

  bool is_leaf() const { return kind == NodeKind::Leaf; }
  bool is_sum() const { return kind == NodeKind::Sum; }
  bool is_product() const { return kind == NodeKind::Product; }

  friend bool operator==(const Node&, const Node&) = default;
};

struct Violation {
  enum class Kind { Cycle, Unreachable, Completeness, Decomposability };
  Kind kind;
  NodeId node;
  std::string detail;
};

inline const char* to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::Cycle: return "cycle";
    case Violation::Kind::Unreachable: return "unreachable";
    case Violation::Kind::Completeness: return "completeness";
    case Violation::Kind::Decomposability: return "decomposability";
  }
  return "?";
}

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(Violation::Kind kind, NodeId node) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.kind == kind && v.node == node; });
  }
  std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += std::string(to_string(v.kind)) + " at node " + std::to_string(v.node);
      if (!v.detail.empty()) out += " (" + v.detail + ")";
    }
    return out;
  }
};

// Flat, index-based SPN. Node-local invariants (indices in range, non-empty
// child lists, finite non-negative weights) are enforced on construction and
// throw DataError; graph-level properties (acyclicity, reachability,
// completeness, decomposability) are computed once and reported by
// validate(). Structural edits rebuild the graph, weight edits do not.
class SpnGraph {
 public:
  SpnGraph() = default;

  SpnGraph(std::vector<Node> nodes, NodeId root, std::size_t num_variables)
      : nodes_(std::move(nodes)), root_(root), num_variables_(num_variables) {
    check_nodes();
    analyse();
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t num_variables() const { return num_variables_; }
  NodeId root() const { return root_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }

  bool acyclic() const { return acyclic_; }
  bool valid() const { return report_.ok(); }
  const ValidationReport& validation() const { return report_; }

  // Children-before-parents order over every node; empty when cyclic.
  std::span<const NodeId> topological_order() const { return order_; }

  // Sorted variable indices below `id`. Only meaningful when acyclic.
  std::span<const std::uint32_t> scope(NodeId id) const { return scopes_.at(id); }

  // Weighted edges (sum node → child) are numbered densely: the edges of
  // sum node s occupy [edge_offset(s), edge_offset(s) + children.size()).
  std::size_t weighted_edge_count() const { return weighted_edges_; }
  std::size_t edge_offset(NodeId sum_node) const { return edge_offset_.at(sum_node); }

  // All edges, sum and product.
  std::size_t edge_count() const { return total_edges_; }

  // (sum node, child position) for a weighted-edge index.
  std::pair<NodeId, std::size_t> edge_at(std::size_t edge) const {
    const auto it = std::upper_bound(sum_offsets_.begin(), sum_offsets_.end(), edge,
                                     [](std::size_t e, const auto& p) { return e < p.first; });
    const auto& [offset, node] = *std::prev(it);
    return {node, edge - offset};
  }

  double weight(std::size_t edge) const {
    const auto [n, pos] = edge_at(edge);
    return nodes_[n].weights[pos];
  }

  void set_weight(NodeId sum_node, std::size_t position, double w) {
    Node& n = nodes_.at(sum_node);
    if (!n.is_sum() || position >= n.weights.size()) {
      throw DataError("set_weight: node " + std::to_string(sum_node) + " has no weighted edge " +
                      std::to_string(position));
    }
    if (!std::isfinite(w) || w < 0.0) {
      throw InvariantError("set_weight: weight of edge " + std::to_string(sum_node) + "->" +
                           std::to_string(n.children[position]) + " is not finite and non-negative");
    }
    n.weights[position] = w;
  }

  // Removes every sum-node child for which drop(node, position) is true,
  // then deletes nodes no longer reachable from the root. A sum node never
  // loses its last child. Returns the number of weighted edges removed.
  std::size_t remove_sum_children(const std::function<bool(NodeId, std::size_t)>& drop) {
    std::size_t removed = 0;
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      Node& n = nodes_[id];
      if (!n.is_sum()) continue;
      std::vector<NodeId> kept_children;
      std::vector<double> kept_weights;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (drop(id, i)) continue;
        kept_children.push_back(n.children[i]);
        kept_weights.push_back(n.weights[i]);
      }
      if (kept_children.empty() || kept_children.size() == n.children.size()) continue;
      removed += n.children.size() - kept_children.size();
      n.children = std::move(kept_children);
      n.weights = std::move(kept_weights);
    }
    if (removed > 0) compact();
    return removed;
  }

  // Drops nodes unreachable from the root and renumbers the survivors
  // densely, preserving their relative order.
  void compact() {
    std::vector<char> reachable(nodes_.size(), 0);
    std::vector<NodeId> stack{root_};
    reachable[root_] = 1;
    while (!stack.empty()) {
      const NodeId id = stack.back();
      stack.pop_back();
      for (NodeId c : nodes_[id].children) {
        if (!reachable[c]) {
          reachable[c] = 1;
          stack.push_back(c);
        }
      }
    }
    std::vector<NodeId> remap(nodes_.size(), 0);
    std::vector<Node> kept;
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      if (!reachable[id]) continue;
      remap[id] = static_cast<NodeId>(kept.size());
      kept.push_back(std::move(nodes_[id]));
    }
    for (Node& n : kept) {
      for (NodeId& c : n.children) c = remap[c];
    }
    const NodeId root = remap[root_];
    *this = SpnGraph(std::move(kept), root, num_variables_);
  }

  friend bool operator==(const SpnGraph& a, const SpnGraph& b) {
    return a.root_ == b.root_ && a.num_variables_ == b.num_variables_ && a.nodes_ == b.nodes_;
  }

 private:
  void check_nodes() const {
    if (num_variables_ == 0) throw DataError("SPN must have at least one variable");
    if (nodes_.empty()) throw DataError("SPN has no nodes");
    if (root_ >= nodes_.size()) throw DataError("root id " + std::to_string(root_) + " out of range");
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      const Node& n = nodes_[id];
      const std::string where = "node " + std::to_string(id);
      if (n.is_leaf()) {
        if (n.var >= num_variables_) throw DataError(where + ": variable index out of range");
        if (!n.children.empty()) throw DataError(where + ": leaf with children");
        continue;
      }
      if (n.children.empty()) throw DataError(where + ": empty children list");
      for (NodeId c : n.children) {
        if (c >= nodes_.size()) throw DataError(where + ": child id " + std::to_string(c) + " out of range");
      }
      if (n.is_sum()) {
        if (n.weights.size() != n.children.size()) throw DataError(where + ": weight/child count mismatch");
        for (double w : n.weights) {
          if (!std::isfinite(w) || w < 0.0) throw DataError(where + ": weight not finite and non-negative");
        }
      } else if (!n.weights.empty()) {
        throw DataError(where + ": product node with weights");
      }
    }
  }

  void analyse() {
    const std::size_t n = nodes_.size();
    edge_offset_.assign(n, 0);
    sum_offsets_.clear();
    weighted_edges_ = 0;
    total_edges_ = 0;
    for (NodeId id = 0; id < n; ++id) {
      total_edges_ += nodes_[id].children.size();
      if (nodes_[id].is_sum()) {
        edge_offset_[id] = weighted_edges_;
        sum_offsets_.emplace_back(weighted_edges_, id);
        weighted_edges_ += nodes_[id].children.size();
      }
    }

    report_ = {};
    order_.clear();
    scopes_.assign(n, {});

    // Iterative DFS post-order; a grey node met again closes a cycle.
    std::vector<std::uint8_t> colour(n, 0);
    std::vector<std::pair<NodeId, std::size_t>> stack;
    acyclic_ = true;
    auto visit_from = [&](NodeId start) {
      if (colour[start]) return;
      stack.emplace_back(start, 0);
      colour[start] = 1;
      while (!stack.empty()) {
        auto& [id, next] = stack.back();
        const auto& children = nodes_[id].children;
        if (next < children.size()) {
          const NodeId c = children[next++];
          if (colour[c] == 0) {
            colour[c] = 1;
            stack.emplace_back(c, 0);
          } else if (colour[c] == 1) {
            acyclic_ = false;
            report_.violations.push_back({Violation::Kind::Cycle, id, "back edge to " + std::to_string(c)});
          }
        } else {
          colour[id] = 2;
          order_.push_back(id);
          stack.pop_back();
        }
      }
    };
    visit_from(root_);
    for (NodeId id = 0; id < n; ++id) {
      if (colour[id] == 0) {
        report_.violations.push_back({Violation::Kind::Unreachable, id, ""});
      }
    }
    for (NodeId id = 0; id < n; ++id) visit_from(id);

    if (!acyclic_) {
      order_.clear();
      return;
    }

    for (NodeId id : order_) {
      const Node& node = nodes_[id];
      auto& scope = scopes_[id];
      if (node.is_leaf()) {
        scope = {node.var};
        continue;
      }
      std::size_t total = 0;
      for (NodeId c : node.children) {
        const auto& cs = scopes_[c];
        std::vector<std::uint32_t> merged;
        merged.reserve(scope.size() + cs.size());
        std::set_union(scope.begin(), scope.end(), cs.begin(), cs.end(), std::back_inserter(merged));
        scope = std::move(merged);
        total += cs.size();
      }
      if (node.is_sum()) {
        const auto& first = scopes_[node.children.front()];
        for (NodeId c : node.children) {
          if (scopes_[c] != first) {
            report_.violations.push_back({Violation::Kind::Completeness, id,
                                          "child " + std::to_string(c) + " scope differs"});
            break;
          }
        }
      } else if (total != scope.size()) {
        report_.violations.push_back({Violation::Kind::Decomposability, id, "children scopes overlap"});
      }
    }
  }

  std::vector<Node> nodes_;
  NodeId root_ = 0;
  std::size_t num_variables_ = 0;

  bool acyclic_ = false;
  ValidationReport report_;
  std::vector<NodeId> order_;
  std::vector<std::vector<std::uint32_t>> scopes_;
  std::vector<std::size_t> edge_offset_;
  std::vector<std::pair<std::size_t, NodeId>> sum_offsets_;
  std::size_t weighted_edges_ = 0;
  std::size_t total_edges_ = 0;
};

inline const ValidationReport& validate(const SpnGraph& graph) { return graph.validation(); }

inline void require_valid(const SpnGraph& graph) {
  if (!graph.valid()) throw InvariantError("invalid SPN: " + graph.validation().summary());
}

}  // namespace spnrank
