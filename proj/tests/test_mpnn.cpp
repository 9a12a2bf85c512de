#include <catch2/catch_amalgamated.hpp>

#include "dagnn/gradcheck.hpp"
#include "dagnn/mpnn.hpp"
#include "dagnn/synth.hpp"

using namespace dagnn;
using num::Index;
using num::Mat;
using num::ParamStore;
using num::Rng;
using num::Tape;

namespace {

data::LabeledGraph random_graph(Rng& rng, int d_node, int d_edge) {
  data::LabeledGraph g;
  g.id = "r";
  const int n = rng.uniform_int(2, 8);
  g.node_features = Eigen::MatrixXd::Zero(n, d_node);
  for (int v = 0; v < n; ++v) g.node_features(v, rng.uniform_int(0, d_node - 1)) = 1.0;
  for (int v = 1; v < n; ++v) {
    const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
    Eigen::RowVectorXd ef = Eigen::RowVectorXd::Zero(d_edge);
    ef(rng.uniform_int(0, d_edge - 1)) = 1.0;
    g.edges.push_back({p, v, ef});
    g.edges.push_back({v, p, ef});
  }
  g.label = rng.coin(0.5) ? 1 : 0;
  return g;
}

data::LabeledGraph permuted(const data::LabeledGraph& g, const std::vector<int>& perm) {
  data::LabeledGraph out;
  out.id = g.id;
  out.label = g.label;
  out.node_features = Eigen::MatrixXd::Zero(g.n_nodes(), g.d_node());
  for (Eigen::Index v = 0; v < g.n_nodes(); ++v)
    out.node_features.row(perm[static_cast<std::size_t>(v)]) = g.node_features.row(v);
  for (const auto& e : g.edges)
    out.edges.push_back({perm[static_cast<std::size_t>(e.src)],
                         perm[static_cast<std::size_t>(e.dst)], e.features});
  return out;
}

Eigen::RowVectorXd embed_readout(ParamStore<double>& store, const data::LabeledGraph& g,
                                 const mpnn::MpnnConfig& cfg, double sn_scale = 1.0) {
  Tape<double> t(&store);
  const auto nodes = mpnn::embed_graph(t, g, cfg, sn_scale);
  return t.val(nodes.readout).row(0);
}

}  // namespace

TEST_CASE("single-node graph matches a scalar hand trace at d=1", "[mpnn][oracle]") {
  ParamStore<double> store;
  Rng rng(5);
  mpnn::MpnnConfig cfg;
  cfg.hidden_dim = 1;
  cfg.n_steps = 3;
  cfg.readout_dim = 1;
  mpnn::create_mpnn(store, cfg, 1, 1, rng);

  data::LabeledGraph g;
  g.id = "solo";
  g.node_features = Eigen::MatrixXd(1, 1);
  g.node_features << 0.7;

  const double we = store.value("embed.W")(0, 0);
  const double uz = store.value("gru.Uz")(0, 0), bz = store.value("gru.bz")(0, 0);
  const double ur = store.value("gru.Ur")(0, 0), br = store.value("gru.br")(0, 0);
  const double uh = store.value("gru.Uh")(0, 0), bh = store.value("gru.bh")(0, 0);
  const double w2a = store.value("readout.W2")(0, 0), w2b = store.value("readout.W2")(1, 0);
  const double w3 = store.value("readout.W3")(0, 0);

  const auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double h0 = 0.7 * we;
  double h = h0;
  for (int step = 0; step < 3; ++step) {
    // message sum is empty, so the GRU sees m = 0
    const double z = sigmoid(h * uz + bz);
    const double r = sigmoid(h * ur + br);
    const double cand = std::tanh(r * h * uh + bh);
    h = (1.0 - z) * h + z * cand;
  }
  const double expected = sigmoid(h * w2a + h0 * w2b) * (h * w3);

  const auto readout = embed_readout(store, g, cfg);
  REQUIRE(readout(0) == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("readout is invariant under node permutation", "[mpnn][property]") {
  Rng rng(7);
  for (auto variant : {mpnn::Variant::kBaseline, mpnn::Variant::kResidualSn}) {
    for (int trial = 0; trial < 50; ++trial) {
      ParamStore<double> store;
      mpnn::MpnnConfig cfg;
      cfg.hidden_dim = 6;
      cfg.n_steps = 3;
      cfg.readout_dim = 5;
      cfg.variant = variant;
      mpnn::create_mpnn(store, cfg, 4, 2, rng);
      const auto g = random_graph(rng, 4, 2);
      std::vector<int> perm(static_cast<std::size_t>(g.n_nodes()));
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
      for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);

      const auto r1 = embed_readout(store, g, cfg, 0.9);
      const auto r2 = embed_readout(store, permuted(g, perm), cfg, 0.9);
      REQUIRE((r1 - r2).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("two disconnected copies double the readout", "[mpnn]") {
  Rng rng(11);
  ParamStore<double> store;
  mpnn::MpnnConfig cfg;
  cfg.hidden_dim = 4;
  cfg.n_steps = 2;
  cfg.readout_dim = 3;
  mpnn::create_mpnn(store, cfg, 3, 2, rng);
  const auto g = random_graph(rng, 3, 2);

  data::LabeledGraph doubled = g;
  const int n = static_cast<int>(g.n_nodes());
  doubled.node_features.conservativeResize(2 * n, Eigen::NoChange);
  doubled.node_features.bottomRows(n) = g.node_features;
  for (const auto& e : g.edges)
    doubled.edges.push_back({e.src + n, e.dst + n, e.features});

  const auto r1 = embed_readout(store, g, cfg);
  const auto r2 = embed_readout(store, doubled, cfg);
  REQUIRE((r2 - 2.0 * r1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empty graphs and width mismatches are rejected", "[mpnn]") {
  Rng rng(13);
  ParamStore<double> store;
  mpnn::MpnnConfig cfg;
  cfg.hidden_dim = 4;
  mpnn::create_mpnn(store, cfg, 3, 2, rng);

  data::LabeledGraph empty;
  empty.node_features = Eigen::MatrixXd(0, 3);
  Tape<double> t(&store);
  REQUIRE_THROWS_AS(mpnn::embed_graph(t, empty, cfg), std::invalid_argument);

  const auto wrong = random_graph(rng, 5, 2);  // node width 5 vs params built for 3
  Tape<double> t2(&store);
  REQUIRE_THROWS_AS(mpnn::embed_graph(t2, wrong, cfg), std::invalid_argument);
}

TEST_CASE("dense head: zero weights give the uniform softmax", "[mpnn]") {
  ParamStore<double> store;
  store.create("head.W", 3, 2);
  store.create("head.b", 1, 2);
  Tape<double> t(&store);
  const int r = t.constant(Mat<double>::Random(1, 3));
  const int logits = mpnn::predict_logits_dense(t, r);
  REQUIRE(t.val(logits)(0, 0) == 0.0);
  REQUIRE(t.val(logits)(0, 1) == 0.0);
  const auto probs = num::softmax_row<double>(t.val(logits).row(0));
  REQUIRE(probs(0) == Catch::Approx(0.5));
  REQUIRE(probs(1) == Catch::Approx(0.5));
}

TEST_CASE("softmax is shift invariant", "[mpnn]") {
  Rng rng(17);
  for (int i = 0; i < 30; ++i) {
    num::RowVec<double> z(2);
    z << rng.normal() * 3, rng.normal() * 3;
    num::RowVec<double> shifted = z.array() + rng.normal() * 10;
    const auto p1 = num::softmax_row<double>(z);
    const auto p2 = num::softmax_row<double>(shifted);
    REQUIRE((p1 - p2).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("embedding plus dense head pass gradcheck", "[mpnn][oracle]") {
  Rng rng(19);
  for (auto variant : {mpnn::Variant::kBaseline, mpnn::Variant::kResidualSn}) {
    ParamStore<double> store;
    mpnn::MpnnConfig cfg;
    cfg.hidden_dim = 3;
    cfg.n_steps = 2;
    cfg.readout_dim = 3;
    cfg.variant = variant;
    mpnn::create_mpnn(store, cfg, 3, 2, rng);
    mpnn::create_dense_head(store, 3, rng);
    const auto g = random_graph(rng, 3, 2);
    const double frozen_scale = 0.8;  // gradcheck runs with the SN scale frozen

    const auto closure = [&](bool bwd) {
      Tape<double> t(&store);
      const auto nodes = mpnn::embed_graph(t, g, cfg, frozen_scale);
      const int loss = t.softmax_xent(mpnn::predict_logits_dense(t, nodes.readout), g.label);
      if (bwd) t.backward(loss);
      return t.val(loss)(0, 0);
    };
    const auto report = gradcheck(store, closure);
    INFO("variant " << static_cast<int>(variant) << " worst " << report.worst_param);
    REQUIRE(report.max_rel_err < 1e-4);
  }
}
