#pragma once

#include <Eigen/Core>

namespace psc::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

inline MatMap as_matrix(double* p, Eigen::Index rows, Eigen::Index cols) { return MatMap(p, rows, cols); }
inline ConstMatMap as_matrix(const double* p, Eigen::Index rows, Eigen::Index cols) {
  return ConstMatMap(p, rows, cols);
}

}  // namespace psc::detail
