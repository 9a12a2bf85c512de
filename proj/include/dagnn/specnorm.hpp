#pragma once

#include <cmath>

#include "dagnn/rng.hpp"
#include "dagnn/tensor.hpp"

namespace dagnn::sn {

// Power-iteration state for one weight matrix. u and v persist across steps
// (warm start): one iteration per training step, 50 at evaluation.
template <typename T>
struct SnState {
  num::Vec<T> u;  // [rows], unit norm
  num::Vec<T> v;  // [cols], unit norm
  int iters_train = 1;
  int iters_eval = 50;
  T bound = T(1);

  static SnState init(num::Index rows, num::Index cols, num::Rng& rng) {
    SnState st;
    st.u.resize(rows);
    st.v.resize(cols);
    for (num::Index i = 0; i < rows; ++i) st.u(i) = static_cast<T>(rng.normal());
    for (num::Index i = 0; i < cols; ++i) st.v(i) = static_cast<T>(rng.normal());
    st.u.normalize();
    st.v.normalize();
    return st;
  }
};

// u <- normalize(W v), v <- normalize(W^T u), repeated; sigma = u^T W v.
// The estimate never exceeds the true spectral norm. A zero matrix reports
// sigma = 0 and leaves the state untouched.
template <typename T>
inline T power_iterate(const num::Mat<T>& W, SnState<T>& state, int n_iters) {
  if (W.isZero(T(0))) return T(0);
  num::require(W.rows() == state.u.size() && W.cols() == state.v.size(),
               "power_iterate: state shape mismatch");
  for (int i = 0; i < n_iters; ++i) {
    state.u = W * state.v;
    const T un = state.u.norm();
    if (un == T(0)) break;
    state.u /= un;
    state.v = W.transpose() * state.u;
    const T vn = state.v.norm();
    if (vn == T(0)) break;
    state.v /= vn;
  }
  return state.u.dot(W * state.v);
}

// Hard projection onto the spectral-norm ball of radius c: W * min(1, c/sigma).
// Identity when the matrix is already compliant. The scale is treated as a
// constant of the step during backprop.
template <typename T>
inline T sn_scale_factor(T sigma, T c) {
  if (sigma <= c || sigma == T(0)) return T(1);
  return c / sigma;
}

template <typename T>
inline num::Mat<T> apply_sn(const num::Mat<T>& W, T sigma, T c) {
  return W * sn_scale_factor(sigma, c);
}

}  // namespace dagnn::sn
