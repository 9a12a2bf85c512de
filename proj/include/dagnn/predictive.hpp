#pragma once

#include <cmath>

#include "dagnn/tape.hpp"
#include "dagnn/tensor.hpp"

namespace dagnn::gp {

// the standard mean-field logit-scaling constant
inline constexpr double kMeanFieldLambda = 0.39269908169872414;  // pi / 8

// Per-class logit means, one shared logit variance, and the calibrated
// probabilities derived from them.
struct PredictiveOutput {
  Eigen::RowVector2d logit_means = Eigen::RowVector2d::Zero();
  double logit_variance = 0.0;
  Eigen::RowVector2d probs = Eigen::RowVector2d::Constant(0.5);
  double uncertainty = 0.5;  // 1 - max prob

  double positive_prob() const { return probs(1); }
};

// probs = softmax(means / sqrt(1 + lambda * variance)); negative variance
// beyond -1e-10 signals a broken covariance, tiny negatives clamp to zero
inline PredictiveOutput mean_field_output(const Eigen::RowVector2d& means,
                                          double variance,
                                          double lambda = kMeanFieldLambda) {
  if (variance < -1e-10)
    throw std::runtime_error("mean_field_output: negative logit variance");
  if (variance < 0.0) variance = 0.0;
  PredictiveOutput out;
  out.logit_means = means;
  out.logit_variance = variance;
  const Eigen::RowVector2d adjusted = means / std::sqrt(1.0 + lambda * variance);
  out.probs = num::softmax_row<double>(adjusted);
  out.uncertainty = 1.0 - out.probs.maxCoeff();
  return out;
}

}  // namespace dagnn::gp
