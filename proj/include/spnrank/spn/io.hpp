#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "spnrank/error.hpp"
#include "spnrank/files.hpp"
#include "spnrank/spn/graph.hpp"

namespace spnrank {

inline constexpr int kSpnFormatVersion = 1;

// Writes the versioned SPN document. The layout is fixed (one node per
// line, keys in a fixed order) so equal graphs serialize to equal bytes.
inline std::string to_json(const SpnGraph& graph) {
  std::string out;
  out += "{\"version\":" + std::to_string(kSpnFormatVersion);
  out += ",\"num_variables\":" + std::to_string(graph.num_variables());
  out += ",\"root\":" + std::to_string(graph.root());
  out += ",\"nodes\":[\n";
  const auto& nodes = graph.nodes();
  for (NodeId id = 0; id < nodes.size(); ++id) {
    const Node& n = nodes[id];
    out += "{\"id\":" + std::to_string(id) + ",\"kind\":";
    if (n.is_leaf()) {
      out += "\"leaf\",\"var\":" + std::to_string(n.var) + ",\"polarity\":";
      out += n.polarity == Polarity::Positive ? "\"positive\"" : "\"negative\"";
    } else {
      out += n.is_sum() ? "\"sum\"" : "\"product\"";
      out += ",\"children\":[";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(n.children[i]);
      }
      out += ']';
      if (n.is_sum()) {
        out += ",\"weights\":[";
        for (std::size_t i = 0; i < n.weights.size(); ++i) {
          if (i) out += ',';
          out += format_double(n.weights[i]);
        }
        out += ']';
      }
    }
    out += '}';
    if (id + 1 < nodes.size()) out += ',';
    out += '\n';
  }
  out += "]}\n";
  return out;
}

inline SpnGraph from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("SPN file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw DataError("SPN document must be a JSON object");
    const int version = doc.at("version").get<int>();
    if (version != kSpnFormatVersion) {
      throw DataError("unsupported SPN format version " + std::to_string(version));
    }
    const auto num_variables = doc.at("num_variables").get<std::size_t>();
    const auto root = doc.at("root").get<NodeId>();
    const auto& items = doc.at("nodes");
    std::vector<Node> nodes(items.size());
    std::vector<char> seen(items.size(), 0);
    for (const auto& item : items) {
      const auto id = item.at("id").get<std::size_t>();
      if (id >= nodes.size() || seen[id]) {
        throw DataError("node id " + std::to_string(id) + " is out of range or repeated");
      }
      seen[id] = 1;
      const auto kind = item.at("kind").get<std::string>();
      if (kind == "leaf") {
        const auto pol = item.at("polarity").get<std::string>();
        if (pol != "positive" && pol != "negative") throw DataError("bad polarity '" + pol + "'");
        nodes[id] = Node::leaf(item.at("var").get<std::uint32_t>(),
                               pol == "positive" ? Polarity::Positive : Polarity::Negative);
      } else if (kind == "sum") {
        nodes[id] = Node::sum(item.at("children").get<std::vector<NodeId>>(),
                              item.at("weights").get<std::vector<double>>());
      } else if (kind == "product") {
        nodes[id] = Node::product(item.at("children").get<std::vector<NodeId>>());
      } else {
        throw DataError("unknown node kind '" + kind + "'");
      }
    }
    return SpnGraph(std::move(nodes), root, num_variables);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed SPN document: ") + e.what());
  }
}

inline SpnGraph load_spn(const std::string& path) { return from_json(read_text_file(path)); }
inline void save_spn(const std::string& path, const SpnGraph& graph) { write_text_file(path, to_json(graph)); }

}  // namespace spnrank
