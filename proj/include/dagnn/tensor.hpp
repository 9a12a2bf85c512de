#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dagnn::num {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

// NaN/Inf fail fast at op boundaries; silent propagation would poison the
// calibration metrics downstream.
template <typename T>
inline void require_finite(const Mat<T>& m, const char* where) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string("non-finite values in ") + where);
  }
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace dagnn::num
