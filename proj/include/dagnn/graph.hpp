#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagnn/tensor.hpp"

namespace dagnn::data {

struct Edge {
  int src = 0;
  int dst = 0;
  Eigen::RowVectorXd features;
};

// One labeled molecular-style graph: the unit of prediction. Undirected
// chemistry graphs are stored as symmetric directed edge pairs so message
// passing needs no special casing.
struct LabeledGraph {
  std::string id;
  Eigen::MatrixXd node_features;  // [n_nodes x d_node]
  std::vector<Edge> edges;
  int label = 0;  // 0 = negative, 1 = toxic/positive

  Eigen::Index n_nodes() const { return node_features.rows(); }
  Eigen::Index d_node() const { return node_features.cols(); }
};

enum class SplitTag { kTrain, kTestIid, kTestOod1, kTestOod2, kCustom };

inline std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kTestIid: return "test-iid";
    case SplitTag::kTestOod1: return "test-ood1";
    case SplitTag::kTestOod2: return "test-ood2";
    default: return "custom";
  }
}

struct Dataset {
  std::vector<LabeledGraph> graphs;
  SplitTag split_tag = SplitTag::kCustom;
  Eigen::Index d_node = 0;
  Eigen::Index d_edge = 0;

  std::size_t size() const { return graphs.size(); }
};

inline void validate_graph(const LabeledGraph& g, const std::string& where) {
  num::require(g.n_nodes() >= 1, where + ": graph must have at least one node");
  num::require(g.label == 0 || g.label == 1, where + ": label outside {0,1}");
  for (const auto& e : g.edges) {
    num::require(e.src >= 0 && e.src < g.n_nodes() && e.dst >= 0 && e.dst < g.n_nodes(),
                 where + ": node index out of range in edge (" +
                     std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
  }
  if (!g.node_features.allFinite())
    throw std::invalid_argument(where + ": non-finite node features");
}

// Dataset-level invariants: non-empty, uniform feature widths, unique ids.
inline void validate_dataset(Dataset& ds, const std::string& where) {
  num::require(!ds.graphs.empty(), where + ": dataset is empty");
  ds.d_node = ds.graphs.front().d_node();
  ds.d_edge = -1;
  std::set<std::string> ids;
  for (const auto& g : ds.graphs) {
    validate_graph(g, where + " (graph " + g.id + ")");
    num::require(g.d_node() == ds.d_node,
                 where + ": inconsistent node feature width in graph " + g.id);
    for (const auto& e : g.edges) {
      if (ds.d_edge < 0) ds.d_edge = e.features.cols();
      num::require(e.features.cols() == ds.d_edge,
                   where + ": inconsistent edge feature width in graph " + g.id);
    }
    num::require(ids.insert(g.id).second, where + ": duplicate graph id " + g.id);
  }
  if (ds.d_edge < 0) ds.d_edge = 0;  // dataset without any edges
}

// Canonical JSONL record: {"edges": [[src,dst,[f...]],...], "id": str,
// "label": 0|1, "nodes": [[f...],...]} with sorted keys and shortest
// round-trip float formatting, one record per line.
inline nlohmann::json graph_to_json(const LabeledGraph& g) {
  nlohmann::json rec;
  rec["id"] = g.id;
  rec["label"] = g.label;
  nlohmann::json nodes = nlohmann::json::array();
  for (Eigen::Index r = 0; r < g.n_nodes(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < g.d_node(); ++c) row.push_back(g.node_features(r, c));
    nodes.push_back(std::move(row));
  }
  rec["nodes"] = std::move(nodes);
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges) {
    nlohmann::json feats = nlohmann::json::array();
    for (Eigen::Index c = 0; c < e.features.cols(); ++c) feats.push_back(e.features(c));
    edges.push_back(nlohmann::json::array({e.src, e.dst, std::move(feats)}));
  }
  rec["edges"] = std::move(edges);
  return rec;
}

inline LabeledGraph graph_from_json(const nlohmann::json& rec, const std::string& where) {
  using num::require;
  require(rec.is_object(), where + ": record is not an object");
  for (const auto& [key, _] : rec.items()) {
    require(key == "id" || key == "nodes" || key == "edges" || key == "label",
            where + ": unknown key '" + key + "'");
  }
  require(rec.contains("id") && rec["id"].is_string(), where + ": missing string 'id'");
  require(rec.contains("label") && rec["label"].is_number_integer(),
          where + ": missing integer 'label'");
  require(rec.contains("nodes") && rec["nodes"].is_array() && !rec["nodes"].empty(),
          where + ": 'nodes' must be a non-empty array");
  require(rec.contains("edges") && rec["edges"].is_array(), where + ": missing 'edges'");

  LabeledGraph g;
  g.id = rec["id"].get<std::string>();
  g.label = rec["label"].get<int>();
  require(g.label == 0 || g.label == 1, where + ": label outside {0,1}");

  const auto& nodes = rec["nodes"];
  const std::size_t n = nodes.size();
  std::size_t d_node = nodes[0].is_array() ? nodes[0].size() : 0;
  require(nodes[0].is_array(), where + ": node row is not an array");
  g.node_features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_node));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = nodes[r];
    require(row.is_array() && row.size() == d_node,
            where + ": inconsistent node feature width");
    for (std::size_t c = 0; c < d_node; ++c) {
      require(row[c].is_number(), where + ": node feature is not a number");
      g.node_features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          row[c].get<double>();
    }
  }
  for (const auto& er : rec["edges"]) {
    require(er.is_array() && er.size() == 3 && er[0].is_number_integer() &&
                er[1].is_number_integer() && er[2].is_array(),
            where + ": edge record must be [int, int, [floats]]");
    Edge e;
    e.src = er[0].get<int>();
    e.dst = er[1].get<int>();
    require(e.src >= 0 && e.src < static_cast<int>(n) && e.dst >= 0 &&
                e.dst < static_cast<int>(n),
            where + ": edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                ") references node index out of range (n_nodes=" + std::to_string(n) + ")");
    e.features.resize(static_cast<Eigen::Index>(er[2].size()));
    for (std::size_t c = 0; c < er[2].size(); ++c) {
      require(er[2][c].is_number(), where + ": edge feature is not a number");
      e.features(static_cast<Eigen::Index>(c)) = er[2][c].get<double>();
    }
    g.edges.push_back(std::move(e));
  }
  return g;
}

// Ingestion is deterministic and order-preserving; every parse error reports
// the 1-based line number.
inline Dataset load_dataset(const std::string& path,
                            SplitTag tag = SplitTag::kCustom) {
  std::ifstream in(path);
  num::require(in.good(), "load_dataset: cannot open " + path);
  Dataset ds;
  ds.split_tag = tag;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument(where + ": malformed JSON (" + e.what() + ")");
    }
    ds.graphs.push_back(graph_from_json(rec, where));
  }
  validate_dataset(ds, "load_dataset(" + path + ")");
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  num::require(out.good(), "save_dataset: cannot open " + path);
  for (const auto& g : ds.graphs) {
    out << graph_to_json(g).dump() << '\n';
  }
  num::require(out.good(), "save_dataset: write failed for " + path);
}

}  // namespace dagnn::data
