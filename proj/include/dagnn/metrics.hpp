#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagnn/tensor.hpp"

namespace dagnn::metrics {

// One scored test sample. distance / far tag are attached when a distance
// split is available.
struct Prediction {
  std::string id;
  Eigen::RowVector2d probs = Eigen::RowVector2d::Constant(0.5);
  int y_true = 0;
  std::optional<double> distance_to_train;
  std::optional<bool> far;

  double positive_prob() const { return probs(1); }
  double confidence() const { return probs.maxCoeff(); }
  double uncertainty() const { return 1.0 - probs.maxCoeff(); }
  int predicted_class() const { return probs(1) > probs(0) ? 1 : 0; }
};

using PredictionSet = std::vector<Prediction>;

// Mann-Whitney U with midrank tie handling: the probability that a random
// positive outranks a random negative, ties at half credit.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  num::require(scores.size() == labels.size() && !scores.empty(),
               "auroc: size mismatch or empty input");
  std::size_t n_pos = 0;
  for (int y : labels) {
    num::require(y == 0 || y == 1, "auroc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = scores.size() - n_pos;
  num::require(n_pos > 0 && n_neg > 0, "auroc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) rank_sum_pos += midrank;
    }
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Equal-width confidence binning on [0,1]; empty bins contribute nothing.
inline double ece(const PredictionSet& preds, int n_bins = 15) {
  num::require(n_bins >= 1, "ece: n_bins must be >= 1");
  num::require(!preds.empty(), "ece: empty prediction set");
  std::vector<double> conf_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(n_bins), 0);
  for (const auto& p : preds) {
    const double c = p.confidence();
    auto bin = static_cast<std::size_t>(std::min<int>(
        n_bins - 1, static_cast<int>(std::floor(c * n_bins))));
    conf_sum[bin] += c;
    acc_sum[bin] += (p.predicted_class() == p.y_true) ? 1.0 : 0.0;
    ++count[bin];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    total += (nb / static_cast<double>(preds.size())) *
             std::abs(acc_sum[b] / nb - conf_sum[b] / nb);
  }
  return total;
}

inline double brier(const PredictionSet& preds) {
  num::require(!preds.empty(), "brier: empty prediction set");
  double total = 0.0;
  for (const auto& p : preds) {
    for (int k = 0; k < 2; ++k) {
      const double target = (p.y_true == k) ? 1.0 : 0.0;
      total += (p.probs(k) - target) * (p.probs(k) - target);
    }
  }
  return total / static_cast<double>(preds.size());
}

inline double nll(const PredictionSet& preds) {
  num::require(!preds.empty(), "nll: empty prediction set");
  double total = 0.0;
  for (const auto& p : preds)
    total -= std::log(std::max(p.probs(p.y_true), 1e-12));
  return total / static_cast<double>(preds.size());
}

// Overconfident false negatives / positives, in percent. A zero denominator
// is reported as 0 with the empty flag set so aggregation stays total but
// auditable.
struct OverconfidenceResult {
  double pct = 0.0;
  bool empty_denominator = false;
};

inline OverconfidenceResult ofn_pct(const PredictionSet& preds, double threshold = 0.1) {
  std::size_t denom = 0, num = 0;
  for (const auto& p : preds) {
    if (p.positive_prob() < threshold) {
      ++denom;
      if (p.y_true == 1) ++num;
    }
  }
  if (denom == 0) return {0.0, true};
  return {100.0 * static_cast<double>(num) / static_cast<double>(denom), false};
}

inline OverconfidenceResult ofp_pct(const PredictionSet& preds, double threshold = 0.9) {
  std::size_t denom = 0, num = 0;
  for (const auto& p : preds) {
    if (p.positive_prob() > threshold) {
      ++denom;
      if (p.y_true == 0) ++num;
    }
  }
  if (denom == 0) return {0.0, true};
  return {100.0 * static_cast<double>(num) / static_cast<double>(denom), false};
}

// AUROC of predictive uncertainty as a classifier of far (label 1) vs close
// (label 0) samples.
inline double da_auc(const PredictionSet& preds) {
  std::vector<double> u;
  std::vector<int> far;
  for (const auto& p : preds) {
    if (!p.far.has_value()) continue;
    u.push_back(p.uncertainty());
    far.push_back(*p.far ? 1 : 0);
  }
  num::require(!u.empty(), "da_auc: no close/far tags attached");
  bool has_far = false, has_close = false;
  for (int f : far) (f ? has_far : has_close) = true;
  num::require(has_far && has_close, "da_auc: need both close and far samples");
  return auroc(u, far);
}

// Per-sample uncertainty increase ratios of a model over a baseline, keyed
// by id. Samples whose baseline uncertainty is ~0 are excluded and flagged.
struct UirResult {
  std::map<std::string, double> ratios;
  std::vector<std::string> excluded_ids;
  double fraction_above_one = 0.0;
};

inline UirResult uir(const std::map<std::string, double>& u_model,
                     const std::map<std::string, double>& u_baseline) {
  num::require(u_model.size() == u_baseline.size(), "uir: id sets differ in size");
  UirResult result;
  std::size_t above = 0;
  for (const auto& [id, um] : u_model) {
    auto it = u_baseline.find(id);
    num::require(it != u_baseline.end(), "uir: id missing from baseline: " + id);
    if (it->second <= 1e-12) {
      result.excluded_ids.push_back(id);
      continue;
    }
    const double ratio = um / it->second;
    result.ratios[id] = ratio;
    if (ratio > 1.0) ++above;
  }
  if (!result.ratios.empty())
    result.fraction_above_one =
        static_cast<double>(above) / static_cast<double>(result.ratios.size());
  return result;
}

// Empirical CDF over train-set distance, restricted to the OFN samples.
inline std::vector<std::pair<double, double>> ofn_distance_cdf(
    const PredictionSet& preds, double threshold = 0.1) {
  std::vector<double> dists;
  for (const auto& p : preds) {
    if (p.positive_prob() < threshold && p.y_true == 1 && p.distance_to_train)
      dists.push_back(*p.distance_to_train);
  }
  std::sort(dists.begin(), dists.end());
  std::vector<std::pair<double, double>> cdf;
  const double n = static_cast<double>(dists.size());
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const double frac = static_cast<double>(i + 1) / n;
    if (!cdf.empty() && cdf.back().first == dists[i])
      cdf.back().second = frac;
    else
      cdf.push_back({dists[i], frac});
  }
  return cdf;
}

// --- aggregation across seeds ---

struct MetricStat {
  double mean = 0.0;
  double std_dev = 0.0;
  std::vector<double> per_seed;
};

inline MetricStat aggregate(const std::vector<double>& per_seed) {
  MetricStat s;
  s.per_seed = per_seed;
  if (per_seed.empty()) return s;
  double sum = 0.0;
  for (double v : per_seed) sum += v;
  s.mean = sum / static_cast<double>(per_seed.size());
  double ss = 0.0;
  for (double v : per_seed) ss += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(ss / static_cast<double>(per_seed.size()));
  return s;
}

// Per-test-set metric table; std is 0 when there is a single seed.
struct EvalReport {
  std::string model;
  std::string testset;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, MetricStat> metrics;
  std::vector<std::string> flags;
  // per-seed OFN distance CDFs, plot-ready (may be empty)
  std::vector<std::vector<std::pair<double, double>>> ofn_cdfs;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["testset"] = testset;
    j["seeds"] = seeds;
    nlohmann::json ms;
    for (const auto& [name, stat] : metrics) {
      ms[name] = {{"mean", stat.mean}, {"std", stat.std_dev}, {"per_seed", stat.per_seed}};
    }
    j["metrics"] = std::move(ms);
    j["flags"] = flags;
    if (!ofn_cdfs.empty()) {
      nlohmann::json cdfs = nlohmann::json::array();
      for (const auto& cdf : ofn_cdfs) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& [d, f] : cdf) pts.push_back({d, f});
        cdfs.push_back(std::move(pts));
      }
      j["ofn_distance_cdf"] = std::move(cdfs);
    }
    return j;
  }
};

// All scalar metrics for one seed's predictions on one test set.
inline std::map<std::string, double> scalar_metrics(const PredictionSet& preds,
                                                    std::vector<std::string>* flags,
                                                    int ece_bins = 15) {
  std::map<std::string, double> out;
  std::vector<double> scores;
  std::vector<int> labels;
  bool both = false, seen0 = false, seen1 = false;
  for (const auto& p : preds) {
    scores.push_back(p.positive_prob());
    labels.push_back(p.y_true);
    (p.y_true ? seen1 : seen0) = true;
  }
  both = seen0 && seen1;
  if (both)
    out["auroc"] = auroc(scores, labels);
  else if (flags)
    flags->push_back("auroc_undefined_single_class");
  out["ece"] = ece(preds, ece_bins);
  out["brier"] = brier(preds);
  out["nll"] = nll(preds);
  const auto ofn = ofn_pct(preds);
  out["ofn_pct"] = ofn.pct;
  if (ofn.empty_denominator && flags) flags->push_back("ofn_empty_denominator");
  const auto ofp = ofp_pct(preds);
  out["ofp_pct"] = ofp.pct;
  if (ofp.empty_denominator && flags) flags->push_back("ofp_empty_denominator");
  bool has_far_tag = false, has_close_tag = false;
  for (const auto& p : preds) {
    if (!p.far.has_value()) continue;
    (*p.far ? has_far_tag : has_close_tag) = true;
  }
  if (has_far_tag && has_close_tag)
    out["da_auc"] = da_auc(preds);
  else if (flags)
    flags->push_back((has_far_tag || has_close_tag) ? "da_auc_undefined_single_tag"
                                                    : "no_distance_split");
  return out;
}

}  // namespace dagnn::metrics
