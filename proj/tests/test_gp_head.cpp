#include <catch2/catch_amalgamated.hpp>
#include <algorithm>

#include "dagnn/gp_head.hpp"
#include "dagnn/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace dagnn;
using num::Index;
using num::Mat;
using num::ParamStore;
using num::Rng;
using num::RowVec;
using num::Tape;



TEST_CASE("rff features: zero frequencies give sqrt(2)", "[gp_head]") {
  ParamStore<double> store;
  gp::GpConfig cfg;
  cfg.rff_dim = 1;
  Rng rng(1);
  auto head = gp::RffHead<double>::create(store, cfg, 3, rng);
  store.value("gp.omega").setZero();
  store.value("gp.b").setZero();
  RowVec<double> r(3);
  r << 0.4, -1.0, 2.0;
  const auto phi = head.features(store, r);
  REQUIRE(phi.size() == 1);
  REQUIRE(phi(0) == Catch::Approx(std::sqrt(2.0)));
}

TEST_CASE("rff norm is bounded by sqrt(2)", "[gp_head][property]") {
  ParamStore<double> store;
  gp::GpConfig cfg;
  cfg.rff_dim = 64;
  Rng rng(2);
  auto head = gp::RffHead<double>::create(store, cfg, 4, rng);
  for (int i = 0; i < 100; ++i) {
    RowVec<double> r(4);
    for (int c = 0; c < 4; ++c) r(c) = rng.normal() * 5.0;
    REQUIRE(head.features(store, r).norm() <= std::sqrt(2.0) + 1e-12);
  }
}

TEST_CASE("rff inner products approximate the Gaussian kernel", "[gp_head][oracle]") {
  ParamStore<double> store;
  gp::GpConfig cfg;
  cfg.rff_dim = 4096;
  cfg.lengthscale = 1.0;
  Rng rng(20240817);
  auto head = gp::RffHead<double>::create(store, cfg, 8, rng);

  Rng pair_rng(5);
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    RowVec<double> x(8), dir(8);
    for (int c = 0; c < 8; ++c) {
      x(c) = pair_rng.normal();
      dir(c) = pair_rng.normal();
    }
    dir.normalize();
    const double dist = pair_rng.uniform(0.0, 3.0);
    const RowVec<double> y = x + dist * dir;
    const double dot = head.features(store, x).dot(head.features(store, y));
    const double kernel = std::exp(-dist * dist / 2.0);
    worst = std::max(worst, std::abs(dot - kernel));
  }
  INFO("worst |phi.phi - k| = " << worst);
  REQUIRE(worst <= 0.05);

  // self inner product approaches 1
  RowVec<double> x(8);
  for (int c = 0; c < 8; ++c) x(c) = pair_rng.normal();
  const auto phi = head.features(store, x);
  REQUIRE(std::abs(phi.dot(phi) - 1.0) <= 0.05);
}

TEST_CASE("same seed rebuilds identical features", "[gp_head]") {
  gp::GpConfig cfg;
  cfg.rff_dim = 32;
  ParamStore<double> s1, s2;
  Rng r1(77, num::stream::kRff), r2(77, num::stream::kRff);
  auto h1 = gp::RffHead<double>::create(s1, cfg, 5, r1);
  auto h2 = gp::RffHead<double>::create(s2, cfg, 5, r2);
  Rng qr(3);
  for (int i = 0; i < 20; ++i) {
    RowVec<double> q(5);
    for (int c = 0; c < 5; ++c) q(c) = qr.normal();
    REQUIRE(h1.features(s1, q) == h2.features(s2, q));
  }
}

TEST_CASE("gp logits: zero beta and finite-difference gradient", "[gp_head][oracle]") {
  ParamStore<double> store;
  gp::GpConfig cfg;
  cfg.rff_dim = 16;
  Rng rng(9);
  auto head = gp::RffHead<double>::create(store, cfg, 3, rng);

  RowVec<double> r(3);
  r << 1.0, -0.5, 0.2;
  {
    Tape<double> t(&store);
    const int logits = head.logits_node(t, head.features_node(t, store, t.constant(r)));
    REQUIRE(t.val(logits)(0, 0) == 0.0);
    REQUIRE(t.val(logits)(0, 1) == 0.0);
  }

  // loss gradient w.r.t. beta (and through the feature map) vs central differences
  store.create_gaussian("readout", 1, 3, 1.0, rng);
  store.value("gp.beta") = Mat<double>::Random(16, 2) * 0.3;
  const auto closure = [&](bool bwd) {
    Tape<double> t(&store);
    const int phi = head.features_node(t, store, t.param("readout"));
    const int loss = t.softmax_xent(head.logits_node(t, phi), 1);
    if (bwd) t.backward(loss);
    return t.val(loss)(0, 0);
  };
  const auto report = gradcheck(store, closure);
  INFO("worst " << report.worst_param);
  REQUIRE(report.max_rel_err < 1e-4);
}

TEST_CASE("beta training solves linearly separable features", "[gp_head]") {
  Rng rng(11);
  ParamStore<double> store;
  store.create("gp.beta", 8, 2);

  // frozen synthetic feature rows, separable by the first coordinate
  const int n = 40;
  Mat<double> phi(n, 8);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    labels[static_cast<std::size_t>(i)] = y;
    for (int c = 0; c < 8; ++c) phi(i, c) = rng.normal() * 0.01;
    phi(i, 0) = y == 1 ? 1.0 : -1.0;
  }
  num::AdamConfig adam;
  adam.lr = 0.05;
  for (int epoch = 0; epoch < 200; ++epoch) {
    store.zero_grad();
    auto& grad = store.grad("gp.beta");
    for (int i = 0; i < n; ++i) {
      const Eigen::RowVector2d logits = phi.row(i) * store.value("gp.beta");
      Eigen::RowVector2d d = num::softmax_row<double>(logits);
      d(labels[static_cast<std::size_t>(i)]) -= 1.0;
      grad.noalias() += phi.row(i).transpose() * d / n;
    }
    store.adam_step(adam);
  }
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::RowVector2d logits = phi.row(i) * store.value("gp.beta");
    correct += (logits(1) > logits(0)) == (labels[static_cast<std::size_t>(i)] == 1);
  }
  REQUIRE(correct == n);
}

TEST_CASE("laplace: no data means the prior, one example contracts one axis",
          "[gp_head]") {
  const int D = 6;
  {
    ParamStore<double> store;
    store.create("gp.beta", D, 2);
    store.create("gp.sigma", D, D, false);
    gp::GpConfig cfg;
    cfg.ridge = 2.0;
    gp::laplace_fit(store, cfg, Mat<double>(0, D), num::Vec<double>(0));
    REQUIRE(store.value("gp.sigma").isApprox(Mat<double>::Identity(D, D) / 2.0, 1e-12));
  }
  {
    ParamStore<double> store;
    store.create("gp.beta", D, 2);
    store.create("gp.sigma", D, D, false);
    gp::GpConfig cfg;  // ridge 1
    Mat<double> phi = Mat<double>::Zero(1, D);
    phi(0, 0) = 1.0;
    num::Vec<double> p(1);
    p << 0.5;
    gp::laplace_fit(store, cfg, phi, p);
    Mat<double> expected = Mat<double>::Identity(D, D);
    expected(0, 0) = 0.8;  // 1 / (1 + 0.25)
    REQUIRE(store.value("gp.sigma").isApprox(expected, 1e-12));
  }
}

TEST_CASE("laplace covariance matches a dense-inverse oracle", "[gp_head][oracle]") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int D = 24, n = 40;
    ParamStore<double> store;
    store.create("gp.beta", D, 2);
    store.create("gp.sigma", D, D, false);
    gp::GpConfig cfg;
    cfg.ridge = 1.3;
    Mat<double> phi(n, D);
    num::Vec<double> p(n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < D; ++c) phi(i, c) = rng.normal();
      p(i) = rng.uniform(0.05, 0.95);
    }
    gp::laplace_fit(store, cfg, phi, p);

    Mat<double> lambda = cfg.ridge * Mat<double>::Identity(D, D);
    for (int i = 0; i < n; ++i)
      lambda += p(i) * (1 - p(i)) * phi.row(i).transpose() * phi.row(i);
    const Mat<double> oracle = lambda.inverse();  // LU route, independent of the LLT
    REQUIRE((store.value("gp.sigma") - oracle).cwiseAbs().maxCoeff() < 1e-8);

    // Sigma * Lambda = I within 1e-6
    REQUIRE((store.value("gp.sigma") * lambda - Mat<double>::Identity(D, D))
                .cwiseAbs()
                .maxCoeff() < 1e-6);
  }
}

TEST_CASE("mean-field: zero variance is plain softmax, lambda*var=3 halves the logits",
          "[gp_head]") {
  Eigen::RowVector2d means(2.0, 0.0);
  const auto plain = gp::mean_field_output(means, 0.0);
  const auto softmax = num::softmax_row<double>(means);
  REQUIRE(std::abs(plain.probs(0) - softmax(0)) < 1e-12);
  REQUIRE(std::abs(plain.probs(1) - softmax(1)) < 1e-12);

  const double variance = 3.0 / gp::kMeanFieldLambda;
  const auto scaled = gp::mean_field_output(means, variance);
  const auto expected = num::softmax_row<double>(Eigen::RowVector2d(1.0, 0.0));
  REQUIRE(scaled.probs(0) == Catch::Approx(expected(0)).margin(1e-12));

  REQUIRE_THROWS_AS(gp::mean_field_output(means, -1e-6), std::runtime_error);
  REQUIRE(gp::mean_field_output(means, -1e-11).logit_variance == 0.0);
}

TEST_CASE("confidence decays monotonically to 0.5 as variance grows",
          "[gp_head][property]") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::RowVector2d means(rng.normal() * 3, rng.normal() * 3);
    double prev = 1.0;
    for (double v : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1e4, 1e8}) {
      const auto out = gp::mean_field_output(means, v);
      const double conf = out.probs.maxCoeff();
      REQUIRE(conf <= prev + 1e-12);
      prev = conf;
    }
    REQUIRE(prev == Catch::Approx(0.5).margin(1e-3));
  }
}

TEST_CASE("predictive variance grows along rays leaving the training cluster",
          "[gp_head][property]") {
  ParamStore<double> store;
  gp::GpConfig cfg;
  cfg.rff_dim = 512;
  cfg.lengthscale = 1.0;
  Rng rng(21);
  auto head = gp::RffHead<double>::create(store, cfg, 2, rng);

  // cluster at the origin; beta stays zero so p_hat = 0.5 everywhere
  const int n = 60;
  Mat<double> phi(n, cfg.rff_dim);
  num::Vec<double> p = num::Vec<double>::Constant(n, 0.5);
  Rng cluster(3);
  for (int i = 0; i < n; ++i) {
    RowVec<double> x(2);
    x << cluster.normal() * 0.3, cluster.normal() * 0.3;
    phi.row(i) = head.features(store, x);
  }
  gp::laplace_fit(store, cfg, phi, p);

  const double prior_bound = 2.0 / cfg.ridge;
  Rng ray_rng(7);
  for (int ray = 0; ray < 10; ++ray) {
    RowVec<double> dir(2);
    dir << ray_rng.normal(), ray_rng.normal();
    dir.normalize();
    // 20 radii spanning the transition from the cluster to ~3 lengthscales
    std::vector<double> radii, variances;
    for (int step = 0; step < 20; ++step) {
      const double radius = 0.15 * step;
      const auto out = gp::gp_predict(store, head, (radius * dir).eval());
      radii.push_back(radius);
      variances.push_back(out.logit_variance);
      REQUIRE(out.logit_variance <= prior_bound + 1e-9);
    }
    REQUIRE(oracles::spearman(radii, variances) > 0.9);
  }
}
