#pragma once

#include <string>

#include "dagnn/config.hpp"
#include "dagnn/gp_head.hpp"
#include "dagnn/graph.hpp"
#include "dagnn/mpnn.hpp"
#include "dagnn/specnorm.hpp"

namespace dagnn::harness {

// One architecture variant with its parameters, spectral-norm state and
// (for GP variants) the RFF head. Owns the ParamStore for a single run.
template <typename T>
class Model {
 public:
  Model(const ExperimentConfig& cfg, num::Index d_node, num::Index d_edge,
        std::uint64_t seed)
      : cfg_(cfg) {
    num::Rng init_rng(seed, num::stream::kParamInit);
    mpnn::create_mpnn(store, cfg.mpnn, d_node, d_edge, init_rng);
    if (has_gp_head(cfg.model)) {
      num::Rng rff_rng(seed, num::stream::kRff);
      head_ = gp::RffHead<T>::create(store, cfg.gp,
                                     static_cast<num::Index>(cfg.mpnn.readout_dim),
                                     rff_rng);
    } else {
      mpnn::create_dense_head(store, static_cast<num::Index>(cfg.mpnn.readout_dim),
                              init_rng);
    }
    if (is_sngp()) {
      num::Rng sn_rng(seed, num::stream::kSpectralNorm);
      auto st = sn::SnState<T>::init(store.value("msg.W").rows(),
                                     store.value("msg.W").cols(), sn_rng);
      store.create("sn.u", st.u.size(), 1, false) = st.u;
      store.create("sn.v", st.v.size(), 1, false) = st.v;
      store.create("sn.scale", 1, 1, false)(0, 0) = T(1);
      sn_state_ = std::move(st);
      sn_state_.bound = static_cast<T>(cfg.mpnn.sn_bound);
      sn_state_.iters_train = cfg.sn.iters_train;
      sn_state_.iters_eval = cfg.sn.iters_eval;
    }
  }

  // rebuild from a saved checkpoint; the config must match the one the
  // checkpoint was trained with
  static Model load(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    Model m(PrivateTag{}, cfg);
    m.store = num::ParamStore<T>::load(checkpoint_path);
    if (has_gp_head(cfg.model)) m.head_ = gp::RffHead<T>::attach(m.store, cfg.gp);
    if (m.is_sngp()) {
      m.sn_state_.u = m.store.value("sn.u").col(0);
      m.sn_state_.v = m.store.value("sn.v").col(0);
      m.sn_state_.bound = static_cast<T>(cfg.mpnn.sn_bound);
      m.sn_state_.iters_train = cfg.sn.iters_train;
      m.sn_state_.iters_eval = cfg.sn.iters_eval;
    }
    return m;
  }

  bool is_sngp() const { return cfg_.model == ModelVariant::kGnnSngp; }
  bool gp_head() const { return has_gp_head(cfg_.model); }
  const ExperimentConfig& config() const { return cfg_; }
  const gp::RffHead<T>& rff_head() const { return head_; }

  // Power-iterate on the current message weights and cache the projection
  // scale for the step. Called once per optimizer step during training and
  // once (with the longer iteration budget) before evaluation or saving.
  void refresh_sn(bool eval_mode) {
    if (!is_sngp()) return;
    const int iters = eval_mode ? sn_state_.iters_eval : sn_state_.iters_train;
    const T sigma = sn::power_iterate(store.value("msg.W"), sn_state_, iters);
    store.value("sn.u").col(0) = sn_state_.u;
    store.value("sn.v").col(0) = sn_state_.v;
    store.value("sn.scale")(0, 0) = sn::sn_scale_factor(sigma, sn_state_.bound);
  }

  T sn_scale() const {
    return is_sngp() ? store.value("sn.scale")(0, 0) : T(1);
  }

  // effective message weights after the spectral-norm projection
  num::Mat<T> effective_message_weights() const {
    return store.value("msg.W") * sn_scale();
  }

  // training-time graph -> loss on a tape bound to this model's store
  int loss_node(num::Tape<T>& tape, const data::LabeledGraph& g) const {
    return tape.softmax_xent(logits_node(tape, g), g.label);
  }

  int logits_node(num::Tape<T>& tape, const data::LabeledGraph& g) const {
    const auto nodes = mpnn::embed_graph(tape, g, cfg_.mpnn, sn_scale());
    if (gp_head())
      return head_.logits_node(tape, head_.features_node(tape, store, nodes.readout));
    return mpnn::predict_logits_dense(tape, nodes.readout);
  }

  mpnn::GraphEmbedding embed(const data::LabeledGraph& g) const {
    num::Tape<T> tape(const_cast<num::ParamStore<T>*>(&store));
    const auto nodes = mpnn::embed_graph(tape, g, cfg_.mpnn, sn_scale());
    mpnn::GraphEmbedding emb;
    emb.readout = tape.val(nodes.readout).template cast<double>();
    emb.node_finals = tape.val(nodes.node_finals).template cast<double>();
    return emb;
  }

  // Mean-field predictive for GP variants (requires laplace_finalize or a
  // loaded checkpoint); plain softmax with zero variance for the baseline.
  gp::PredictiveOutput predict(const data::LabeledGraph& g) const {
    num::Tape<T> tape(const_cast<num::ParamStore<T>*>(&store));
    const auto nodes = mpnn::embed_graph(tape, g, cfg_.mpnn, sn_scale());
    const num::RowVec<T> readout = tape.val(nodes.readout).row(0);
    if (gp_head()) return gp::gp_predict(store, head_, readout);
    const num::RowVec<T> logits =
        readout * store.value("head.W") + store.value("head.b").row(0);
    return gp::mean_field_output(logits.template cast<double>(), 0.0);
  }

  // One full pass over the training set accumulating the Laplace precision;
  // run after the final epoch, with eval-mode SN already cached.
  void laplace_finalize(const data::Dataset& train) {
    if (!gp_head()) return;
    const auto n = static_cast<num::Index>(train.size());
    num::Mat<T> phi(n, cfg_.gp.rff_dim);
    num::Vec<T> p_pos(n);
    for (num::Index i = 0; i < n; ++i) {
      num::Tape<T> tape(&store);
      const auto nodes =
          mpnn::embed_graph(tape, train.graphs[static_cast<std::size_t>(i)], cfg_.mpnn,
                            sn_scale());
      const num::RowVec<T> f = head_.features(store, tape.val(nodes.readout).row(0));
      phi.row(i) = f;
      const num::RowVec<T> means = f * store.value("gp.beta");
      p_pos(i) = num::softmax_row<T>(means)(1);
    }
    gp::laplace_fit(store, cfg_.gp, phi, p_pos);
  }

  void save(const std::string& path) const { store.save(path); }

  num::ParamStore<T> store;

 private:
  struct PrivateTag {};
  Model(PrivateTag, const ExperimentConfig& cfg) : cfg_(cfg) {}

  ExperimentConfig cfg_;
  gp::RffHead<T> head_;
  sn::SnState<T> sn_state_;
};

}  // namespace dagnn::harness
