#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <string>

#include "dagnn/params.hpp"
#include "dagnn/tensor.hpp"

namespace dagnn::num {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::map<std::string, double> per_param;
};

// Central finite differences against the analytic gradients. The closure
// must be a deterministic function of the store's trainable values; it
// returns the scalar loss and, when asked, also backpropagates into the
// store's gradient slots.
//
// Relative error uses max(|analytic|, |numeric|, floor) as denominator so a
// uniformly-zero gradient reports zero error.
inline GradCheckReport gradcheck(ParamStore<double>& store,
                                 const std::function<double(bool)>& loss,
                                 double eps = 1e-5, double floor = 1e-6) {
  store.zero_grad();
  (void)loss(true);

  std::map<std::string, Mat<double>> analytic;
  for (const auto& name : store.names()) {
    if (store.trainable(name)) analytic[name] = store.grad(name);
  }

  GradCheckReport report;
  for (const auto& [name, ga] : analytic) {
    Mat<double>& w = store.value(name);
    double worst = 0.0;
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) {
        const double keep = w(r, c);
        w(r, c) = keep + eps;
        const double lp = loss(false);
        w(r, c) = keep - eps;
        const double lm = loss(false);
        w(r, c) = keep;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double a = ga(r, c);
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        worst = std::max(worst, rel);
      }
    }
    report.per_param[name] = worst;
    if (worst >= report.max_rel_err) {
      report.max_rel_err = worst;
      report.worst_param = name;
    }
  }
  return report;
}

}  // namespace dagnn::num
