#pragma once

#include <cmath>
#include <string>

#include "dagnn/params.hpp"
#include "dagnn/predictive.hpp"
#include "dagnn/rng.hpp"
#include "dagnn/tape.hpp"

namespace dagnn::gp {

struct GpConfig {
  int rff_dim = 1024;        // D
  double lengthscale = 2.0;  // applied as input scaling R / lengthscale
  double ridge = 1.0;        // unit Gaussian prior on beta
  double mean_field_lambda = kMeanFieldLambda;
};

// Random-Fourier-feature GP output layer. Omega ~ N(0,1) and b ~ U(0, 2*pi)
// are sampled once from a pinned stream and frozen; beta is the only
// trainable part. After laplace_fit the head is immutable.
template <typename T>
struct RffHead {
  GpConfig cfg;
  num::Index readout_dim = 0;

  // store names: gp.omega [D x rd] (buffer), gp.b [1 x D] (buffer),
  // gp.beta [D x 2] (param), gp.sigma [D x D] (buffer, fitted covariance)
  static RffHead create(num::ParamStore<T>& store, const GpConfig& cfg,
                        num::Index readout_dim, num::Rng& rng) {
    num::require(cfg.rff_dim >= 1 && cfg.lengthscale > 0 && cfg.ridge > 0,
                 "GpConfig: rff_dim >= 1, lengthscale > 0, ridge > 0");
    const auto D = static_cast<num::Index>(cfg.rff_dim);
    auto& omega = store.create("gp.omega", D, readout_dim, /*trainable=*/false);
    for (num::Index r = 0; r < D; ++r)
      for (num::Index c = 0; c < readout_dim; ++c)
        omega(r, c) = static_cast<T>(rng.normal());
    auto& b = store.create("gp.b", 1, D, /*trainable=*/false);
    for (num::Index i = 0; i < D; ++i)
      b(0, i) = static_cast<T>(rng.uniform(0.0, 6.283185307179586477));
    store.create("gp.beta", D, 2, /*trainable=*/true);
    store.create("gp.sigma", D, D, /*trainable=*/false);
    return attach(store, cfg);
  }

  static RffHead attach(num::ParamStore<T>& store, const GpConfig& cfg) {
    RffHead head;
    head.cfg = cfg;
    head.readout_dim = store.value("gp.omega").cols();
    return head;
  }

  // phi(R) = sqrt(2/D) * cos(Omega (R/l) + b), as a row vector [1 x D]
  num::RowVec<T> features(const num::ParamStore<T>& store,
                          const num::RowVec<T>& readout) const {
    num::require(readout.cols() == readout_dim, "rff features: width mismatch");
    const auto D = static_cast<T>(cfg.rff_dim);
    num::RowVec<T> z =
        (readout / static_cast<T>(cfg.lengthscale)) * store.value("gp.omega").transpose() +
        store.value("gp.b").row(0);
    return std::sqrt(T(2) / D) * z.array().cos().matrix();
  }

  // tape version used inside the end-to-end trainable model
  int features_node(num::Tape<T>& t, const num::ParamStore<T>& store, int readout) const {
    const int omega_t = t.constant(
        (store.value("gp.omega") / static_cast<T>(cfg.lengthscale)).transpose());
    const int z = t.add_rowvec(t.matmul(readout, omega_t), t.constant(store.value("gp.b")));
    return t.scale(t.cos(z), std::sqrt(T(2) / static_cast<T>(cfg.rff_dim)));
  }

  // logit means = phi beta; trained exactly like a dense head
  int logits_node(num::Tape<T>& t, int phi) const {
    return t.matmul(phi, t.param("gp.beta"));
  }
};

// Laplace covariance over the RFF posterior, one full pass over the training
// features: Lambda = s I + sum_i p_i (1 - p_i) phi_i phi_i^T with p_i the
// predicted positive-class probability; Sigma = Lambda^{-1} via an SPD solve.
template <typename T>
inline void laplace_fit(num::ParamStore<T>& store, const GpConfig& cfg,
                        const num::Mat<T>& train_phi, const num::Vec<T>& train_p_pos) {
  const num::Index D = store.value("gp.beta").rows();
  num::require(train_phi.cols() == D, "laplace_fit: feature width mismatch");
  num::require(train_phi.rows() == train_p_pos.size(), "laplace_fit: row mismatch");
  num::Vec<T> w = train_p_pos.array() * (T(1) - train_p_pos.array());
  num::Mat<T> lambda = static_cast<T>(cfg.ridge) * num::Mat<T>::Identity(D, D);
  lambda.noalias() += train_phi.transpose() * w.asDiagonal() * train_phi;
  Eigen::LLT<num::Mat<T>> llt(lambda);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("laplace_fit: SPD solve failed (ill-conditioned Lambda)");
  store.value("gp.sigma") = llt.solve(num::Mat<T>::Identity(D, D));
}

// sigma^2(R) = phi^T Sigma phi; probabilities via the mean-field adjustment.
template <typename T>
inline PredictiveOutput gp_predict(const num::ParamStore<T>& store, const RffHead<T>& head,
                                   const num::RowVec<T>& readout) {
  const num::RowVec<T> phi = head.features(store, readout);
  const Eigen::RowVector2d means =
      (phi * store.value("gp.beta")).template cast<double>();
  const double variance =
      static_cast<double>(phi * store.value("gp.sigma") * phi.transpose());
  return mean_field_output(means, variance, head.cfg.mean_field_lambda);
}

}  // namespace dagnn::gp
