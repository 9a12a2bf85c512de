#pragma once

#include <string>
#include <vector>

#include "dagnn/graph.hpp"
#include "dagnn/rng.hpp"

namespace dagnn::data {

// Desk-scale stand-in for a real shifted molecular benchmark. A graph is a
// random chain of typed fragments (short chains and rings drawn from a fixed
// library, with occasional point mutations), so substructures recur across
// graphs the way scaffolds recur across molecules. Toxicity is exact motif
// presence, giving a closed-form label oracle. The ood level mixes in
// fragments over an enlarged node-type vocabulary and attaches decorating
// chains of novel types: most ood graphs end up far (fingerprint distance
// > 0.7) from any iid graph by construction, while graphs that happen to
// draw only base fragments stay close.
struct SynthConfig {
  int n_graphs = 1;
  enum class Shift { kIid, kOod } shift = Shift::kIid;
  std::uint64_t seed = 0;
};

namespace synth_detail {

inline constexpr int kBaseTypes = 8;    // iid vocabulary: types 0..7
inline constexpr int kNovelTypes = 4;   // ood adds types 8..11
inline constexpr int kNodeWidth = kBaseTypes + kNovelTypes;
inline constexpr int kEdgeWidth = 3;    // 0 = chain, 1 = ring/bond, 2 = decoration
inline constexpr double kOodNovelFragProb = 0.55;
inline constexpr double kToxicPlantProb = 0.5;
inline constexpr double kOodNovelMotifProb = 0.5;
inline constexpr double kMutationProb = 0.06;

struct UEdge {
  int u, v, type;
};

// a fragment is a typed chain, optionally ring-closed end-to-end
struct Fragment {
  std::vector<int> types;
  bool ring;
};

inline const std::vector<Fragment>& base_fragments() {
  static const std::vector<Fragment> frags = {
      {{0, 1, 0}, false},       {{1, 0, 0, 1}, false},  {{0, 1, 0, 1, 2}, true},
      {{2, 4, 0}, false},       {{0, 7, 1}, false},     {{0, 0, 1, 0, 1, 4}, true},
      {{4, 1}, false},          {{0, 2, 6, 0}, false},  {{1, 1, 0, 3}, false},
      {{5, 0, 1, 0, 0}, true},  {{0, 3, 0}, false},     {{7, 0, 2}, false},
  };
  return frags;
}

inline const std::vector<Fragment>& novel_fragments() {
  static const std::vector<Fragment> frags = {
      {{8, 9, 8}, false},       {{9, 8, 10, 8}, false}, {{8, 10, 8, 9, 11}, true},
      {{11, 8, 9}, false},      {{10, 9, 8, 8}, true},  {{8, 11}, false},
  };
  return frags;
}

inline int mutate_type(int t, bool ood_vocab, num::Rng& rng) {
  if (!rng.coin(kMutationProb)) return t;
  return ood_vocab ? rng.uniform_int(0, kNodeWidth - 1)
                   : rng.uniform_int(0, kBaseTypes - 1);
}

// The fixed toxic motif set. Two motifs live in the base vocabulary; two are
// their novel-vocabulary counterparts, the "novel toxic signatures" that can
// only occur under shift (iid graphs never draw novel types).
//   bond motifs:   a type-1 bond joining node types {3, 5} or {8, 10}
//   center motifs: a type-6 (type-11) node with >= 2 neighbors of type 2
//                  (type 9) over type-0 bonds
inline constexpr int kBondMotifs[2][2] = {{3, 5}, {8, 10}};
inline constexpr int kCenterMotifs[2][2] = {{6, 2}, {11, 9}};  // {center, leaf}

inline bool contains_toxic_motif(const std::vector<int>& types,
                                 const std::vector<UEdge>& edges) {
  for (const auto& e : edges) {
    if (e.type != 1) continue;
    const int a = types[static_cast<std::size_t>(e.u)];
    const int b = types[static_cast<std::size_t>(e.v)];
    for (const auto& m : kBondMotifs) {
      if ((a == m[0] && b == m[1]) || (a == m[1] && b == m[0])) return true;
    }
  }
  for (const auto& m : kCenterMotifs) {
    std::vector<int> leaf_nbrs(types.size(), 0);
    for (const auto& e : edges) {
      if (e.type != 0) continue;
      if (types[static_cast<std::size_t>(e.u)] == m[0] &&
          types[static_cast<std::size_t>(e.v)] == m[1])
        ++leaf_nbrs[static_cast<std::size_t>(e.u)];
      if (types[static_cast<std::size_t>(e.v)] == m[0] &&
          types[static_cast<std::size_t>(e.u)] == m[1])
        ++leaf_nbrs[static_cast<std::size_t>(e.v)];
    }
    for (std::size_t v = 0; v < types.size(); ++v) {
      if (types[v] == m[0] && leaf_nbrs[v] >= 2) return true;
    }
  }
  return false;
}

}  // namespace synth_detail

inline Dataset synth_generate(const SynthConfig& cfg) {
  using namespace synth_detail;
  num::require(cfg.n_graphs >= 1, "synth_generate: n_graphs must be >= 1");
  const bool ood = cfg.shift == SynthConfig::Shift::kOod;
  num::Rng rng(cfg.seed, ood ? 0x00Du : 0x11Du);

  Dataset ds;
  ds.split_tag = SplitTag::kCustom;
  for (int gi = 0; gi < cfg.n_graphs; ++gi) {
    std::vector<int> types;
    std::vector<UEdge> edges;

    // chain 2..3 fragments; consecutive fragments joined by a type-0 bond
    const int n_frags = rng.uniform_int(2, 3);
    int prev_tail = -1;
    for (int fi = 0; fi < n_frags; ++fi) {
      const bool novel = ood && rng.coin(kOodNovelFragProb);
      const auto& lib = novel ? novel_fragments() : base_fragments();
      const auto& frag = lib[rng.below(lib.size())];
      const int head = static_cast<int>(types.size());
      for (std::size_t i = 0; i < frag.types.size(); ++i) {
        types.push_back(mutate_type(frag.types[i], ood, rng));
        if (i > 0)
          edges.push_back({head + static_cast<int>(i) - 1,
                           head + static_cast<int>(i), 0});
      }
      if (frag.ring && frag.types.size() >= 3)
        edges.push_back({head, static_cast<int>(types.size()) - 1, 1});
      if (prev_tail >= 0) edges.push_back({prev_tail, head, 0});
      prev_tail = static_cast<int>(types.size()) - 1;
    }
    const int n_core = static_cast<int>(types.size());

    // Plant a toxic motif on roughly half the graphs. Under shift, half the
    // planted motifs are the novel-signature variants.
    if (rng.coin(kToxicPlantProb)) {
      const int family = (ood && rng.coin(kOodNovelMotifProb)) ? 1 : 0;
      if (rng.coin(0.5)) {
        auto& e = edges[rng.below(edges.size())];
        e.type = 1;
        types[static_cast<std::size_t>(e.u)] = kBondMotifs[family][0];
        types[static_cast<std::size_t>(e.v)] = kBondMotifs[family][1];
      } else {
        // center on a node with >= 2 neighbors when one exists
        std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(n_core));
        for (std::size_t ei = 0; ei < edges.size(); ++ei) {
          adj[static_cast<std::size_t>(edges[ei].u)].push_back(ei);
          adj[static_cast<std::size_t>(edges[ei].v)].push_back(ei);
        }
        int center_node = -1;
        const int start = rng.uniform_int(0, n_core - 1);
        for (int off = 0; off < n_core; ++off) {
          const int v = (start + off) % n_core;
          if (adj[static_cast<std::size_t>(v)].size() >= 2) {
            center_node = v;
            break;
          }
        }
        if (center_node >= 0) {
          types[static_cast<std::size_t>(center_node)] = kCenterMotifs[family][0];
          int placed = 0;
          for (std::size_t ei : adj[static_cast<std::size_t>(center_node)]) {
            if (placed == 2) break;
            auto& e = edges[ei];
            e.type = 0;
            const int other = (e.u == center_node) ? e.v : e.u;
            types[static_cast<std::size_t>(other)] = kCenterMotifs[family][1];
            ++placed;
          }
        }
      }
    }

    // ood decorations: pendant chains of novel types
    int n_total = n_core;
    if (ood) {
      const int n_dec = rng.uniform_int(0, 2);
      for (int dch = 0; dch < n_dec; ++dch) {
        int attach = rng.uniform_int(0, n_core - 1);
        const int len = rng.uniform_int(1, 2);
        for (int step = 0; step < len; ++step) {
          const int fresh = n_total++;
          types.push_back(kBaseTypes + rng.uniform_int(0, kNovelTypes - 1));
          edges.push_back({attach, fresh, 2});
          attach = fresh;
        }
      }
    }

    LabeledGraph g;
    g.id = std::string(ood ? "ood" : "iid") + "-s" + std::to_string(cfg.seed) + "-g" +
           std::to_string(gi);
    g.node_features = Eigen::MatrixXd::Zero(n_total, kNodeWidth);
    for (int v = 0; v < n_total; ++v)
      g.node_features(v, types[static_cast<std::size_t>(v)]) = 1.0;
    for (const auto& e : edges) {
      Eigen::RowVectorXd feat = Eigen::RowVectorXd::Zero(kEdgeWidth);
      feat(e.type) = 1.0;
      g.edges.push_back({e.u, e.v, feat});
      g.edges.push_back({e.v, e.u, feat});
    }
    g.label = contains_toxic_motif(types, edges) ? 1 : 0;
    ds.graphs.push_back(std::move(g));
  }
  validate_dataset(ds, "synth_generate");
  return ds;
}

}  // namespace dagnn::data
