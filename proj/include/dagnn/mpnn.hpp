#pragma once

#include <string>
#include <vector>

#include "dagnn/graph.hpp"
#include "dagnn/gru.hpp"
#include "dagnn/tape.hpp"

namespace dagnn::mpnn {

enum class Variant { kBaseline, kResidualSn };

struct MpnnConfig {
  int hidden_dim = 32;
  int n_steps = 3;
  Variant variant = Variant::kBaseline;
  double sn_bound = 1.0;  // residual_sn only
  int readout_dim = 32;

  void validate() const {
    num::require(hidden_dim >= 1 && n_steps >= 1 && readout_dim >= 1 && sn_bound > 0,
                 "MpnnConfig: hidden_dim, n_steps, readout_dim >= 1 and sn_bound > 0");
  }
};

// graph embedding plus per-node final states, retained for diagnostics
struct GraphEmbedding {
  Eigen::RowVectorXd readout;
  Eigen::MatrixXd node_finals;
};

template <typename T>
inline void create_mpnn(num::ParamStore<T>& store, const MpnnConfig& cfg,
                        num::Index d_node, num::Index d_edge, num::Rng& rng) {
  cfg.validate();
  const auto d = static_cast<num::Index>(cfg.hidden_dim);
  const auto rd = static_cast<num::Index>(cfg.readout_dim);
  store.create_gaussian("embed.W", d_node, d, T(1) / std::sqrt(static_cast<T>(d_node)),
                        rng);
  store.create_gaussian("msg.W", 2 * d + d_edge, d,
                        T(1) / std::sqrt(static_cast<T>(2 * d + d_edge)), rng);
  num::create_gru(store, "gru", d, rng);
  store.create_gaussian("readout.W2", 2 * d, rd, T(1) / std::sqrt(static_cast<T>(2 * d)),
                        rng);
  store.create_gaussian("readout.W3", d, rd, T(1) / std::sqrt(static_cast<T>(d)), rng);
}

template <typename T>
struct MpnnNodes {
  int readout;      // [1 x readout_dim]
  int node_finals;  // [n x d]
};

// Message passing forward pass on the tape:
//   h0_v  = x_v W_embed
//   m_v   = sum_{(w,v,e)} [h_v || h_w || e] W_msg        (in-neighbor sum)
//   h_v  <- GRU(h_v, m_v)            (+ h_v residual for the SN variant)
//   R     = sum_v sigmoid([h_v || h0_v] W2) .* (h_v W3)
// sn_scale multiplies W_msg and is a constant of the step (the caller
// refreshes it via power iteration between optimizer steps).
template <typename T>
inline MpnnNodes<T> embed_graph(num::Tape<T>& t, const data::LabeledGraph& g,
                                const MpnnConfig& cfg, T sn_scale = T(1)) {
  num::require(g.n_nodes() >= 1, "embed_graph: empty graph");
  const auto n_edges = static_cast<num::Index>(g.edges.size());

  num::Mat<T> X = g.node_features.template cast<T>();
  const int x = t.constant(std::move(X));
  const int h0 = t.matmul(x, t.param("embed.W"));

  int msg_w = t.param("msg.W");
  if (cfg.variant == Variant::kResidualSn && sn_scale != T(1))
    msg_w = t.scale(msg_w, sn_scale);
  // edge width from the message weights so zero-edge graphs stay shape-correct
  const num::Index d_edge = t.val(msg_w).rows() - 2 * cfg.hidden_dim;
  std::vector<num::Index> src, dst;
  src.reserve(g.edges.size());
  dst.reserve(g.edges.size());
  num::Mat<T> E(n_edges, d_edge);
  for (num::Index i = 0; i < n_edges; ++i) {
    const auto& e = g.edges[static_cast<std::size_t>(i)];
    src.push_back(e.src);
    dst.push_back(e.dst);
    E.row(i) = e.features.template cast<T>();
  }
  const int e_feat = t.constant(std::move(E));
  const num::GruLeaves gru = num::gru_leaves(t, num::GruNames::at("gru"));

  int h = h0;
  for (int step = 0; step < cfg.n_steps; ++step) {
    const int recv = t.gather_rows(h, dst);
    const int send = t.gather_rows(h, src);
    const int messages = t.matmul(t.concat_cols({recv, send, e_feat}), msg_w);
    const int agg = t.scatter_add_rows(messages, dst, g.n_nodes());
    const int updated = gru_cell(t, h, agg, gru);
    h = (cfg.variant == Variant::kResidualSn) ? t.add(updated, h) : updated;
  }

  const int gate = t.sigmoid(t.matmul(t.concat_cols({h, h0}), t.param("readout.W2")));
  const int scaled = t.matmul(h, t.param("readout.W3"));
  const int readout = t.sum_rows(t.hadamard(gate, scaled));
  return {readout, h};
}

template <typename T>
inline void create_dense_head(num::ParamStore<T>& store, num::Index readout_dim,
                              num::Rng& rng) {
  store.create_gaussian("head.W", readout_dim, 2,
                        T(1) / std::sqrt(static_cast<T>(readout_dim)), rng);
  store.create("head.b", 1, 2);
}

// affine map readout_dim -> 2
template <typename T>
inline int predict_logits_dense(num::Tape<T>& t, int readout) {
  return t.add_rowvec(t.matmul(readout, t.param("head.W")), t.param("head.b"));
}

}  // namespace dagnn::mpnn
