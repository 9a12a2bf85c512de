// Test-only reference implementations: brute-force oracles kept independent
// of the code paths they check, plus small statistics helpers.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "dagnn/metrics.hpp"
#include "dagnn/rng.hpp"

namespace oracles {

// O(n^2) pairwise AUROC with half credit for ties
inline double auroc_pairwise(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    ++n_pos;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      if (s[i] > s[j])
        wins += 1.0;
      else if (s[i] == s[j])
        wins += 0.5;
    }
  }
  for (int v : y) n_neg += (v == 0);
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// per-sample binning route for the expected calibration error
inline double ece_oracle(const dagnn::metrics::PredictionSet& preds, int bins) {
  std::vector<double> conf(preds.size()), acc(preds.size());
  std::vector<int> bin(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    conf[i] = preds[i].confidence();
    acc[i] = preds[i].predicted_class() == preds[i].y_true ? 1.0 : 0.0;
    bin[i] = std::min(bins - 1, static_cast<int>(std::floor(conf[i] * bins)));
  }
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    double cs = 0, as = 0, n = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (bin[i] != b) continue;
      cs += conf[i];
      as += acc[i];
      n += 1;
    }
    if (n > 0)
      total += (n / static_cast<double>(preds.size())) * std::abs(as / n - cs / n);
  }
  return total;
}

// largest singular value by eigendecomposition of W^T W
inline double spectral_norm_oracle(const Eigen::MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W.transpose() * W);
  return std::sqrt(es.eigenvalues().maxCoeff());
}

// random matrix with a controlled spectral gap: sigma_2/sigma_1 <= gap
inline Eigen::MatrixXd gapped_random(dagnn::num::Rng& rng, Eigen::Index r,
                                     Eigen::Index c, double gap) {
  const auto normal_mat = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
  };
  const Eigen::Index k = std::min(r, c);
  const Eigen::MatrixXd qu =
      Eigen::HouseholderQR<Eigen::MatrixXd>(normal_mat(r, r)).householderQ();
  const Eigen::MatrixXd qv =
      Eigen::HouseholderQR<Eigen::MatrixXd>(normal_mat(c, c)).householderQ();
  Eigen::VectorXd s(k);
  const double top = rng.uniform(0.5, 4.0);
  s(0) = top;
  for (Eigen::Index i = 1; i < k; ++i) s(i) = rng.uniform() * gap * top;
  return qu.leftCols(k) * s.asDiagonal() * qv.leftCols(k).transpose();
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(da * db);
}

// Exact-posterior predictive for a GP binary classifier with n <= 3 training
// points: dense latent grid for the posterior, fine trapezoid for the
// predictive squash. Independent of the Laplace/mean-field path.
inline double gpc_quadrature_predictive(const Eigen::MatrixXd& X,
                                        const Eigen::VectorXi& y01, double amplitude,
                                        double lengthscale, double jitter,
                                        const Eigen::RowVectorXd& xstar) {
  const auto kernel = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    return amplitude * amplitude *
           std::exp(-(a - b).squaredNorm() / (2.0 * lengthscale * lengthscale));
  };
  const auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) K(i, j) = kernel(X.row(i), X.row(j));
  K.diagonal().array() += jitter * amplitude * amplitude;
  const Eigen::MatrixXd Kinv = K.inverse();

  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i) kstar(i) = kernel(X.row(i), xstar);
  const double kss = amplitude * amplitude;
  const double vstar = kss - kstar.dot(Kinv * kstar);

  const auto inner = [&](double mu) {
    if (vstar < 1e-12) return sigmoid(mu);
    const int m = 240;
    const double lo = mu - 8.0 * std::sqrt(vstar), hi = mu + 8.0 * std::sqrt(vstar);
    const double h = (hi - lo) / m;
    double acc = 0.0;
    for (int i = 0; i <= m; ++i) {
      const double f = lo + h * i;
      const double w = (i == 0 || i == m) ? 0.5 : 1.0;
      acc += w * sigmoid(f) * std::exp(-(f - mu) * (f - mu) / (2.0 * vstar));
    }
    return acc * h / std::sqrt(2.0 * M_PI * vstar);
  };

  const double span = 9.0 * amplitude;
  const int steps = 60;
  const double h = 2.0 * span / steps;
  Eigen::VectorXd f(n);
  double z = 0.0, acc = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  const auto eval_point = [&]() {
    for (Eigen::Index d = 0; d < n; ++d)
      f(d) = -span + h * idx[static_cast<std::size_t>(d)];
    double w = std::exp(-0.5 * f.dot(Kinv * f));
    for (Eigen::Index i = 0; i < n; ++i)
      w *= sigmoid((y01(i) == 1 ? 1.0 : -1.0) * f(i));
    z += w;
    acc += w * inner(kstar.dot(Kinv * f));
  };
  for (idx[0] = 0; idx[0] <= steps; ++idx[0]) {
    if (n == 1) {
      eval_point();
      continue;
    }
    for (idx[1] = 0; idx[1] <= steps; ++idx[1]) {
      if (n == 2) {
        eval_point();
        continue;
      }
      for (idx[2] = 0; idx[2] <= steps; ++idx[2]) eval_point();
    }
  }
  return acc / z;
}

}  // namespace oracles
