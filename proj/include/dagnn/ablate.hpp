#pragma once

#include <map>
#include <string>
#include <vector>

#include "dagnn/exact_gpc.hpp"
#include "dagnn/gp_head.hpp"
#include "dagnn/metrics.hpp"
#include "dagnn/train.hpp"

namespace dagnn::harness {

// Binary logistic regression solved by full-batch Newton with a small L2
// term (1e-4, on all coefficients). Deterministic convex optimization: the
// dense ablation rows carry zero error bars.
struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;

  double positive_prob(const Eigen::RowVectorXd& x) const {
    const double z = x.dot(weights) + bias;
    return 1.0 / (1.0 + std::exp(-z));
  }
};

inline LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                                  double l2 = 1e-4, double tol = 1e-10,
                                  int max_iters = 100) {
  const Eigen::Index n = X.rows(), d = X.cols();
  num::require(n >= 1 && y.size() == n, "fit_logistic: bad shapes");
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    num::require(y(i) == 0 || y(i) == 1, "fit_logistic: labels must be 0/1");
    (y(i) == 1 ? has1 : has0) = true;
  }
  num::require(has0 && has1, "fit_logistic: degenerate single-class training data");

  Eigen::MatrixXd Xa(n, d + 1);
  Xa.leftCols(d) = X;
  Xa.col(d).setOnes();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd t = y.cast<double>();

  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::VectorXd z = Xa * w;
    Eigen::VectorXd p = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Eigen::VectorXd grad = Xa.transpose() * (p - t) + l2 * w;
    if (grad.lpNorm<Eigen::Infinity>() < tol) break;
    Eigen::VectorXd s = p.array() * (1.0 - p.array());
    Eigen::MatrixXd H = Xa.transpose() * s.asDiagonal() * Xa;
    H.diagonal().array() += l2;
    w -= H.ldlt().solve(grad);
  }
  LogisticModel model;
  model.weights = w.head(d);
  model.bias = w(d);
  return model;
}

// --- ablation grid: feature sources x heads x test sets ---

struct AblateSource {
  Eigen::MatrixXd train_X;
  Eigen::VectorXi train_y;
  std::vector<std::string> train_ids;
  // per test-set name
  std::map<std::string, Eigen::MatrixXd> test_X;
  std::map<std::string, std::vector<std::string>> test_ids;
  std::map<std::string, Eigen::VectorXi> test_y;
};

struct AblateSettings {
  std::vector<std::string> heads = {"dense", "gp", "gpc"};
  std::vector<std::uint64_t> seeds = {1, 2, 3};  // gp head only
  int gp_rff_dim = 256;
  double gp_lengthscale = 2.0;
  double gp_ridge = 1.0;
  int gp_epochs = 80;
  int gp_batch = 32;
  double gp_lr = 1e-2;
  int gpc_train_cap = 1000;     // dense O(n^3) fit cap; evenly-spaced subsample
  double gpc_val_fraction = 0.2;
};

struct AblateCell {
  std::map<std::string, metrics::MetricStat> metrics;
  std::vector<std::string> flags;
  double mean_uncertainty_far = std::numeric_limits<double>::quiet_NaN();
  double mean_uncertainty_close = std::numeric_limits<double>::quiet_NaN();
};

struct AblateRow {
  std::string features;
  std::string head;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, AblateCell> testsets;
};

struct AblateReport {
  std::vector<AblateRow> rows;

  nlohmann::json to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& row : rows) {
      nlohmann::json cells;
      for (const auto& [name, cell] : row.testsets) {
        nlohmann::json ms;
        for (const auto& [metric, stat] : cell.metrics)
          ms[metric] = {{"mean", stat.mean},
                        {"std", stat.std_dev},
                        {"per_seed", stat.per_seed}};
        nlohmann::json c = {{"metrics", std::move(ms)}, {"flags", cell.flags}};
        if (std::isfinite(cell.mean_uncertainty_far))
          c["mean_uncertainty_far"] = cell.mean_uncertainty_far;
        if (std::isfinite(cell.mean_uncertainty_close))
          c["mean_uncertainty_close"] = cell.mean_uncertainty_close;
        cells[name] = std::move(c);
      }
      rows_json.push_back({{"features", row.features},
                           {"head", row.head},
                           {"seeds", row.seeds},
                           {"testsets", std::move(cells)}});
    }
    return {{"rows", std::move(rows_json)}};
  }
};

namespace ablate_detail {

inline metrics::PredictionSet tag_predictions(metrics::PredictionSet preds,
                                              const fp::DistanceSplit* split) {
  if (split == nullptr) return preds;
  for (auto& p : preds) {
    auto it = split->distances.find(p.id);
    if (it == split->distances.end()) continue;
    p.distance_to_train = it->second;
    p.far = split->far_ids.contains(p.id);
  }
  return preds;
}

inline void fill_cell(AblateCell& cell,
                      const std::vector<metrics::PredictionSet>& per_seed_preds) {
  std::map<std::string, std::vector<double>> per_metric;
  for (const auto& preds : per_seed_preds) {
    const auto scalars = metrics::scalar_metrics(preds, &cell.flags);
    for (const auto& [k, v] : scalars) per_metric[k].push_back(v);
  }
  for (const auto& [k, values] : per_metric)
    cell.metrics[k] = metrics::aggregate(values);
  std::sort(cell.flags.begin(), cell.flags.end());
  cell.flags.erase(std::unique(cell.flags.begin(), cell.flags.end()), cell.flags.end());

  // far/close mean uncertainty from the last seed (identical across seeds for
  // the deterministic heads)
  double far_sum = 0.0, close_sum = 0.0;
  std::size_t far_n = 0, close_n = 0;
  for (const auto& p : per_seed_preds.back()) {
    if (!p.far.has_value()) continue;
    if (*p.far) {
      far_sum += p.uncertainty();
      ++far_n;
    } else {
      close_sum += p.uncertainty();
      ++close_n;
    }
  }
  if (far_n > 0) cell.mean_uncertainty_far = far_sum / static_cast<double>(far_n);
  if (close_n > 0) cell.mean_uncertainty_close = close_sum / static_cast<double>(close_n);
}

// beta training on frozen features is plain softmax regression; features are
// precomputed once since omega/b are frozen
inline void train_beta_on_features(num::ParamStore<double>& store,
                                   const Eigen::MatrixXd& phi, const Eigen::VectorXi& y,
                                   const AblateSettings& s, std::uint64_t seed) {
  num::Rng shuffle(seed, num::stream::kShuffle);
  const auto n = static_cast<std::size_t>(phi.rows());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  num::AdamConfig adam;
  adam.lr = s.gp_lr;
  for (int epoch = 0; epoch < s.gp_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(s.gp_batch)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(s.gp_batch));
      store.zero_grad();
      auto& grad = store.grad("gp.beta");
      const auto& beta = store.value("gp.beta");
      for (std::size_t b = start; b < stop; ++b) {
        const auto i = static_cast<Eigen::Index>(order[b]);
        const Eigen::RowVector2d logits = phi.row(i) * beta;
        const Eigen::RowVector2d probs = num::softmax_row<double>(logits);
        Eigen::RowVector2d d = probs;
        d(y(i)) -= 1.0;
        grad.noalias() += phi.row(i).transpose() * d / static_cast<double>(stop - start);
      }
      store.adam_step(adam);
    }
  }
}

}  // namespace ablate_detail

// Grid-trains each head on each frozen feature source. dense and gpc use
// deterministic optimization and run once; the gp head runs per seed.
inline AblateReport ablate(const std::map<std::string, AblateSource>& sources,
                           const std::map<std::string, fp::DistanceSplit>& splits,
                           const AblateSettings& settings) {
  AblateReport report;
  for (const auto& [source_name, src] : sources) {
    for (const auto& head : settings.heads) {
      AblateRow row;
      row.features = source_name;
      row.head = head;

      // test name -> per-seed prediction sets
      std::map<std::string, std::vector<metrics::PredictionSet>> collected;

      auto predict_tests = [&](auto&& predict_one) {
        for (const auto& [test_name, X] : src.test_X) {
          metrics::PredictionSet preds;
          const auto& ids = src.test_ids.at(test_name);
          const auto& y = src.test_y.at(test_name);
          for (Eigen::Index i = 0; i < X.rows(); ++i) {
            metrics::Prediction p;
            p.id = ids[static_cast<std::size_t>(i)];
            p.y_true = y(i);
            p.probs = predict_one(X.row(i));
            preds.push_back(std::move(p));
          }
          auto it = splits.find(test_name);
          collected[test_name].push_back(ablate_detail::tag_predictions(
              std::move(preds), it == splits.end() ? nullptr : &it->second));
        }
      };

      if (head == "dense") {
        row.seeds = {0};
        const LogisticModel lm = fit_logistic(src.train_X, src.train_y);
        predict_tests([&](const Eigen::RowVectorXd& x) {
          const double p = lm.positive_prob(x);
          return Eigen::RowVector2d(1.0 - p, p);
        });
      } else if (head == "gp") {
        row.seeds = settings.seeds;
        for (std::uint64_t seed : settings.seeds) {
          num::ParamStore<double> store;
          gp::GpConfig gcfg;
          gcfg.rff_dim = settings.gp_rff_dim;
          gcfg.lengthscale = settings.gp_lengthscale;
          gcfg.ridge = settings.gp_ridge;
          num::Rng rff_rng(seed, num::stream::kRff);
          const auto head_state =
              gp::RffHead<double>::create(store, gcfg, src.train_X.cols(), rff_rng);
          Eigen::MatrixXd phi(src.train_X.rows(), gcfg.rff_dim);
          for (Eigen::Index i = 0; i < src.train_X.rows(); ++i)
            phi.row(i) = head_state.features(store, src.train_X.row(i));
          ablate_detail::train_beta_on_features(store, phi, src.train_y, settings, seed);
          Eigen::VectorXd p_pos(phi.rows());
          for (Eigen::Index i = 0; i < phi.rows(); ++i)
            p_pos(i) = num::softmax_row<double>(
                (phi.row(i) * store.value("gp.beta")).eval())(1);
          gp::laplace_fit(store, gcfg, phi, p_pos);
          predict_tests([&](const Eigen::RowVectorXd& x) {
            return gp::gp_predict(store, head_state, x).probs;
          });
        }
      } else if (head == "gpc") {
        row.seeds = {0};
        // evenly-spaced deterministic subsample, validation tail for the grid
        const Eigen::Index n = src.train_X.rows();
        const auto cap = static_cast<Eigen::Index>(settings.gpc_train_cap);
        std::vector<Eigen::Index> pick;
        if (n <= cap) {
          for (Eigen::Index i = 0; i < n; ++i) pick.push_back(i);
        } else {
          for (Eigen::Index i = 0; i < cap; ++i) pick.push_back(i * n / cap);
        }
        const auto n_val = static_cast<Eigen::Index>(
            std::max<std::size_t>(1, static_cast<std::size_t>(
                static_cast<double>(pick.size()) * settings.gpc_val_fraction)));
        const auto n_fit = static_cast<Eigen::Index>(pick.size()) - n_val;
        num::require(n_fit >= 1, "ablate: gpc train subsample too small");
        Eigen::MatrixXd Xfit(n_fit, src.train_X.cols()), Xval(n_val, src.train_X.cols());
        Eigen::VectorXi yfit(n_fit), yval(n_val);
        for (Eigen::Index i = 0; i < n_fit; ++i) {
          Xfit.row(i) = src.train_X.row(pick[static_cast<std::size_t>(i)]);
          yfit(i) = src.train_y(pick[static_cast<std::size_t>(i)]);
        }
        for (Eigen::Index i = 0; i < n_val; ++i) {
          Xval.row(i) = src.train_X.row(pick[static_cast<std::size_t>(n_fit + i)]);
          yval(i) = src.train_y(pick[static_cast<std::size_t>(n_fit + i)]);
        }
        const auto grid = gpc::gpc_fit_grid(Xfit, yfit, Xval, yval);
        predict_tests([&](const Eigen::RowVectorXd& x) {
          return gpc::gpc_predict(grid.model, x).probs;
        });
      } else {
        throw std::invalid_argument("ablate: unknown head '" + head + "'");
      }

      for (auto& [test_name, per_seed] : collected)
        ablate_detail::fill_cell(row.testsets[test_name], per_seed);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// Raw fingerprint bit-vectors (as 0/1 reals) as a perfectly
// distance-preserving feature source.
inline Eigen::MatrixXd fingerprint_features(const data::Dataset& ds, int radius,
                                            int width) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(ds.size()), width);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto fprint = fp::compute_fingerprint(ds.graphs[i], radius, width);
    for (int b = 0; b < width; ++b)
      X(static_cast<Eigen::Index>(i), b) = fprint.test(b) ? 1.0 : 0.0;
  }
  return X;
}

}  // namespace dagnn::harness
