#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagnn/graph.hpp"

namespace dagnn::fp {

namespace detail {

// FNV-1a 64-bit with a pinned seed constant: fingerprints must be identical
// across runs and platforms.
inline constexpr std::uint64_t kHashSeed = 0x5d6e8f1a2b3c4d5eULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t hash_begin() { return kFnvOffset ^ kHashSeed; }

inline void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

inline void hash_u64(std::uint64_t& h, std::uint64_t v) { hash_bytes(h, &v, 8); }

// shortest round-trip decimal formatting; feature rows are hashed by these
// exact bytes, so callers quantize real-valued features if fuzzy matching is
// wanted
inline void hash_double(std::uint64_t& h, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  hash_bytes(h, buf, static_cast<std::size_t>(end - buf));
  hash_bytes(h, "|", 1);
}

template <typename RowLike>
inline std::uint64_t hash_feature_row(const RowLike& row) {
  std::uint64_t h = hash_begin();
  for (Eigen::Index c = 0; c < row.cols(); ++c) hash_double(h, row(0, c));
  return h;
}

}  // namespace detail

// Circular (Morgan-style) fingerprint: a fixed-width bitset over hashed node
// neighborhoods at radii 0..radius.
struct Fingerprint {
  int width = 2048;  // power of two
  int radius = 2;
  std::vector<std::uint64_t> words;

  void set(std::uint64_t hash) {
    const std::uint64_t bit = hash & static_cast<std::uint64_t>(width - 1);
    words[bit >> 6] |= (std::uint64_t{1} << (bit & 63));
  }

  bool test(int bit) const {
    return (words[static_cast<std::size_t>(bit >> 6)] >>
            (static_cast<std::size_t>(bit) & 63)) & 1u;
  }

  int popcount() const {
    int n = 0;
    for (auto w : words) n += std::popcount(w);
    return n;
  }
};

inline Fingerprint compute_fingerprint(const data::LabeledGraph& g, int radius = 2,
                                       int width = 2048) {
  num::require(radius >= 0, "compute_fingerprint: radius must be >= 0");
  num::require(width > 0 && (width & (width - 1)) == 0,
               "compute_fingerprint: width must be a power of two");
  data::validate_graph(g, "compute_fingerprint");

  Fingerprint fprint;
  fprint.width = width;
  fprint.radius = radius;
  fprint.words.assign(static_cast<std::size_t>(std::max(1, width / 64)), 0);

  const auto n = static_cast<std::size_t>(g.n_nodes());
  std::vector<std::uint64_t> h(n);
  for (std::size_t v = 0; v < n; ++v) {
    h[v] = detail::hash_feature_row(g.node_features.row(static_cast<Eigen::Index>(v)));
    fprint.set(h[v]);
  }

  // per-edge feature hashes, grouped by source node
  std::vector<std::vector<std::pair<std::uint64_t, std::size_t>>> out_edges(n);
  for (const auto& e : g.edges) {
    out_edges[static_cast<std::size_t>(e.src)].push_back(
        {detail::hash_feature_row(e.features), static_cast<std::size_t>(e.dst)});
  }

  std::vector<std::uint64_t> next(n);
  for (int r = 1; r <= radius; ++r) {
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> nbrs;
      nbrs.reserve(out_edges[v].size());
      for (const auto& [ehash, w] : out_edges[v]) nbrs.push_back({ehash, h[w]});
      std::sort(nbrs.begin(), nbrs.end());
      std::uint64_t hv = detail::hash_begin();
      detail::hash_u64(hv, h[v]);
      for (const auto& [eh, nh] : nbrs) {
        detail::hash_u64(hv, eh);
        detail::hash_u64(hv, nh);
      }
      next[v] = hv;
      fprint.set(hv);
    }
    h = next;
  }
  return fprint;
}

// 1 - |a AND b| / |a OR b|; two empty bitsets count as distance 0.
inline double tanimoto_distance(const Fingerprint& a, const Fingerprint& b) {
  num::require(a.width == b.width, "tanimoto_distance: width mismatch");
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.words.size(); ++i) {
    inter += std::popcount(a.words[i] & b.words[i]);
    uni += std::popcount(a.words[i] | b.words[i]);
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

// Mean Tanimoto distance to the k nearest training fingerprints. Stable
// tie-break by (distance, training id) keeps the selection deterministic.
inline double distance_to_train(const Fingerprint& query,
                                const std::vector<Fingerprint>& train_fps,
                                const std::vector<std::string>& train_ids, int k) {
  num::require(!train_fps.empty(), "distance_to_train: empty train set");
  num::require(k >= 1, "distance_to_train: k must be >= 1");
  std::vector<std::pair<double, const std::string*>> dists;
  dists.reserve(train_fps.size());
  for (std::size_t i = 0; i < train_fps.size(); ++i) {
    dists.push_back({tanimoto_distance(query, train_fps[i]), &train_ids[i]});
  }
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), dists.size());
  std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(kk),
                    dists.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first < b.first;
                      return *a.second < *b.second;
                    });
  double sum = 0.0;
  for (std::size_t i = 0; i < kk; ++i) sum += dists[i].first;
  return sum / static_cast<double>(kk);
}

inline std::vector<Fingerprint> fingerprints_of(const data::Dataset& ds, int radius = 2,
                                                int width = 2048) {
  std::vector<Fingerprint> fps;
  fps.reserve(ds.size());
  for (const auto& g : ds.graphs) fps.push_back(compute_fingerprint(g, radius, width));
  return fps;
}

inline double distance_to_train(const data::LabeledGraph& g, const data::Dataset& train,
                                int k = 8, int radius = 2, int width = 2048) {
  std::vector<std::string> ids;
  ids.reserve(train.size());
  for (const auto& t : train.graphs) ids.push_back(t.id);
  return distance_to_train(compute_fingerprint(g, radius, width),
                           fingerprints_of(train, radius, width), ids, k);
}

// Close/far partition of a test set by mean distance to the k nearest
// training graphs: close iff distance < threshold.
struct DistanceSplit {
  std::set<std::string> close_ids;
  std::set<std::string> far_ids;
  std::map<std::string, double> distances;
  double threshold = 0.7;
  int k_neighbors = 8;
};

inline nlohmann::json split_to_json(const DistanceSplit& split) {
  nlohmann::json j;
  j["close"] = split.close_ids;
  j["far"] = split.far_ids;
  j["distances"] = split.distances;
  j["threshold"] = split.threshold;
  j["k_neighbors"] = split.k_neighbors;
  return j;
}

inline DistanceSplit split_from_json(const nlohmann::json& j) {
  DistanceSplit split;
  for (const auto& id : j.at("close")) split.close_ids.insert(id.get<std::string>());
  for (const auto& id : j.at("far")) split.far_ids.insert(id.get<std::string>());
  for (const auto& [id, d] : j.at("distances").items())
    split.distances[id] = d.get<double>();
  if (j.contains("threshold")) split.threshold = j["threshold"].get<double>();
  if (j.contains("k_neighbors")) split.k_neighbors = j["k_neighbors"].get<int>();
  return split;
}

inline DistanceSplit split_by_distance(const data::Dataset& test,
                                       const data::Dataset& train,
                                       double threshold = 0.7, int k = 8,
                                       int radius = 2, int width = 2048) {
  num::require(!test.graphs.empty() && !train.graphs.empty(),
               "split_by_distance: datasets must be non-empty");
  DistanceSplit split;
  split.threshold = threshold;
  split.k_neighbors = k;
  std::vector<std::string> train_ids;
  train_ids.reserve(train.size());
  for (const auto& t : train.graphs) train_ids.push_back(t.id);
  const auto train_fps = fingerprints_of(train, radius, width);
  for (const auto& g : test.graphs) {
    const double d = distance_to_train(compute_fingerprint(g, radius, width), train_fps,
                                       train_ids, k);
    split.distances[g.id] = d;
    if (d < threshold)
      split.close_ids.insert(g.id);
    else
      split.far_ids.insert(g.id);
  }
  return split;
}

}  // namespace dagnn::fp
