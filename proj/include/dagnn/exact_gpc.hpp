#pragma once

#include <cmath>
#include <vector>

#include "dagnn/predictive.hpp"
#include "dagnn/tensor.hpp"

namespace dagnn::gpc {

struct RbfKernel {
  double amplitude = 1.0;    // a
  double lengthscale = 1.0;  // l

  double operator()(const Eigen::RowVectorXd& x1, const Eigen::RowVectorXd& x2) const {
    const double d2 = (x1 - x2).squaredNorm();
    return amplitude * amplitude * std::exp(-d2 / (2.0 * lengthscale * lengthscale));
  }
};

namespace detail {

inline double log_sigmoid(double z) {
  // -softplus(-z), stable on both tails
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

// Exact GP binary classifier with a Laplace-approximated posterior and
// logistic likelihood. Dense O(n^3), intended for desk scale (n <= 5000).
struct GpcModel {
  Eigen::MatrixXd X;        // [n x d] train features
  Eigen::VectorXd y;        // labels in {-1, +1}
  RbfKernel kernel;
  double jitter = 1e-6;

  Eigen::VectorXd f_hat;           // posterior mode
  Eigen::VectorXd grad_at_mode;    // t - sigmoid(f_hat)
  Eigen::VectorXd w_sqrt;          // sqrt of logistic Hessian diagonal
  Eigen::MatrixXd L;               // chol(I + W^1/2 K W^1/2)
  double stationarity = 0.0;       // ||f - K grad||_inf at the mode
  std::vector<double> psi_trace;   // log posterior per Newton iteration
};

// Newton iteration on the log posterior psi(f) = -1/2 f^T K^-1 f + log p(y|f)
// with backtracking, until mode stationarity ||f - K grad||_inf < tol.
inline GpcModel gpc_fit(const Eigen::MatrixXd& X, const Eigen::VectorXi& labels01,
                        const RbfKernel& kernel, double jitter = 1e-6,
                        double tol = 1e-8, int max_iters = 100) {
  const Eigen::Index n = X.rows();
  num::require(n >= 1, "gpc_fit: need at least one training point");
  num::require(labels01.size() == n, "gpc_fit: label count mismatch");

  GpcModel model;
  model.X = X;
  model.kernel = kernel;
  model.jitter = jitter;
  model.y.resize(n);
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    num::require(labels01(i) == 0 || labels01(i) == 1, "gpc_fit: labels must be 0/1");
    model.y(i) = labels01(i) == 1 ? 1.0 : -1.0;
    t(i) = labels01(i);
  }

  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      K(i, j) = kernel(X.row(i), X.row(j));
      K(j, i) = K(i, j);
    }
  K.diagonal().array() += jitter * kernel.amplitude * kernel.amplitude;

  Eigen::LLT<Eigen::MatrixXd> kllt(K);
  if (kllt.info() != Eigen::Success)
    throw std::runtime_error("gpc_fit: kernel matrix not PD after jitter " +
                             std::to_string(jitter));

  const auto log_lik = [&](const Eigen::VectorXd& f) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += detail::log_sigmoid(model.y(i) * f(i));
    return s;
  };
  const auto psi = [&](const Eigen::VectorXd& f) {
    return -0.5 * f.dot(kllt.solve(f)) + log_lik(f);
  };

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  double cur_psi = psi(f);
  model.psi_trace.push_back(cur_psi);

  bool converged = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::VectorXd pi = f.unaryExpr([](double v) { return detail::sigmoid(v); });
    Eigen::VectorXd w = pi.array() * (1.0 - pi.array());
    Eigen::VectorXd ws = w.array().sqrt();
    Eigen::VectorXd grad = t - pi;

    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
    B.noalias() += ws.asDiagonal() * K * ws.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> bllt(B);
    if (bllt.info() != Eigen::Success)
      throw std::runtime_error("gpc_fit: inner system not PD");

    const Eigen::VectorXd b = w.asDiagonal() * f + grad;
    const Eigen::VectorXd a =
        b - ws.asDiagonal() * bllt.solve((ws.asDiagonal() * (K * b)).eval());
    const Eigen::VectorXd f_new = K * a;

    // Backtrack if the full Newton step genuinely overshoots. psi differences
    // below the evaluation noise floor are treated as flat: the posterior is
    // log-concave, so near the mode only rounding can make a step look worse.
    const double noise = 1e-9 * (1.0 + std::abs(cur_psi));
    Eigen::VectorXd step = f_new - f;
    double tau = 1.0;
    double next_psi = psi(f + tau * step);
    int halvings = 0;
    while (next_psi < cur_psi - noise && halvings < 40) {
      tau *= 0.5;
      next_psi = psi(f + tau * step);
      ++halvings;
    }
    if (next_psi < cur_psi - noise) break;
    f += tau * step;
    cur_psi = next_psi;
    model.psi_trace.push_back(cur_psi);

    pi = f.unaryExpr([](double v) { return detail::sigmoid(v); });
    grad = t - pi;
    model.stationarity = (f - K * grad).template lpNorm<Eigen::Infinity>();
    if (model.stationarity < tol) {
      converged = true;
      break;
    }
  }
  if (!converged && n > 0) {
    Eigen::VectorXd pi = f.unaryExpr([](double v) { return detail::sigmoid(v); });
    model.stationarity = (f - K * (t - pi)).template lpNorm<Eigen::Infinity>();
    if (model.stationarity >= tol)
      throw std::runtime_error("gpc_fit: Newton did not converge, residual " +
                               std::to_string(model.stationarity));
  }

  Eigen::VectorXd pi = f.unaryExpr([](double v) { return detail::sigmoid(v); });
  model.f_hat = f;
  model.grad_at_mode = t - pi;
  model.w_sqrt = (pi.array() * (1.0 - pi.array())).sqrt();
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  B.noalias() += model.w_sqrt.asDiagonal() * K * model.w_sqrt.asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> bllt(B);
  if (bllt.info() != Eigen::Success)
    throw std::runtime_error("gpc_fit: final system not PD");
  model.L = bllt.matrixL();
  return model;
}

// Laplace predictive: latent mean k*^T grad, variance k** - v^T v with
// v = L^-1 W^1/2 k*; class probability through the same pi/8 mean-field
// squashing used by the RFF head.
inline gp::PredictiveOutput gpc_predict(const GpcModel& model,
                                        const Eigen::RowVectorXd& x) {
  num::require(x.cols() == model.X.cols(), "gpc_predict: dimension mismatch");
  const Eigen::Index n = model.X.rows();
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i) kstar(i) = model.kernel(model.X.row(i), x);
  const double mean = kstar.dot(model.grad_at_mode);
  const Eigen::VectorXd v = model.L.triangularView<Eigen::Lower>().solve(
      (model.w_sqrt.asDiagonal() * kstar).eval());
  const double prior_var = model.kernel.amplitude * model.kernel.amplitude;
  const double variance = prior_var - v.squaredNorm();
  Eigen::RowVector2d means;
  means << 0.0, mean;
  return gp::mean_field_output(means, variance);
}

// Deterministic hyperparameter selection on validation NLL over a fixed grid.
struct GpcGridResult {
  GpcModel model;
  RbfKernel chosen;
  double val_nll = 0.0;
};

inline GpcGridResult gpc_fit_grid(const Eigen::MatrixXd& Xtr,
                                  const Eigen::VectorXi& ytr,
                                  const Eigen::MatrixXd& Xval,
                                  const Eigen::VectorXi& yval,
                                  double jitter = 1e-6) {
  const std::vector<double> amplitudes = {0.5, 1.0, 2.0};
  const std::vector<double> lengthscales = {0.5, 1.0, 2.0, 4.0};
  GpcGridResult best;
  bool have = false;
  for (double a : amplitudes) {
    for (double l : lengthscales) {
      RbfKernel k{a, l};
      GpcModel m = gpc_fit(Xtr, ytr, k, jitter);
      double nll = 0.0;
      for (Eigen::Index i = 0; i < Xval.rows(); ++i) {
        const auto out = gpc_predict(m, Xval.row(i));
        const double p = yval(i) == 1 ? out.probs(1) : out.probs(0);
        nll -= std::log(std::max(p, 1e-12));
      }
      nll /= static_cast<double>(Xval.rows());
      if (!have || nll < best.val_nll) {
        best.model = std::move(m);
        best.chosen = k;
        best.val_nll = nll;
        have = true;
      }
    }
  }
  return best;
}

}  // namespace dagnn::gpc
