#pragma once

#include "sylfuse/core.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

namespace sylfuse {

/// Orthonormal spectral basis H (m_lambda x dim) with X = H U.
struct SubspaceBasis {
  Matrix basis;
  Vector singular_values;     // of the data matrix used to estimate the basis, descending
  bool rank_deficient = false;  // dim exceeded the numerical rank; trailing columns are padding

  [[nodiscard]] Index dim() const noexcept { return basis.cols(); }
  [[nodiscard]] Index bands() const noexcept { return basis.rows(); }
};

/// Flips each column so that its first entry with magnitude above `tol` is positive.
inline void fix_column_signs(Matrix& m, double tol = 1e-12) {
  for (Index j = 0; j < m.cols(); ++j) {
    const double scale = m.col(j).cwiseAbs().maxCoeff();
    for (Index i = 0; i < m.rows(); ++i) {
      if (std::abs(m(i, j)) > tol * scale) {
        if (m(i, j) < 0.0) m.col(j) *= -1.0;
        break;
      }
    }
  }
}

/// Top-`dim` left singular vectors of the (bands x pixels) data of `y`.
/// With `center` the per-band mean is removed first; the mean itself is not returned.
inline SubspaceBasis estimate_subspace(const ImageCube& y, Index dim, bool center = false) {
  if (dim < 1 || dim > y.bands()) {
    fail(ErrorKind::kValidation, "subspace dimension " + std::to_string(dim) + " outside [1, " +
                                     std::to_string(y.bands()) + "]");
  }
  Matrix data = y.data();
  if (center) data.colwise() -= data.rowwise().mean();
  Eigen::JacobiSVD<Matrix> svd(data, Eigen::ComputeFullU);
  SubspaceBasis out;
  out.basis = svd.matrixU().leftCols(dim);
  out.singular_values = svd.singularValues();
  fix_column_signs(out.basis);

  const double top = out.singular_values.size() > 0 ? out.singular_values(0) : 0.0;
  const double tol = static_cast<double>(std::max(data.rows(), data.cols())) *
                     std::numeric_limits<double>::epsilon() * top;
  Index rank = 0;
  for (Index i = 0; i < out.singular_values.size(); ++i) rank += out.singular_values(i) > tol ? 1 : 0;
  out.rank_deficient = dim > rank;
  return out;
}

/// U = H^T X.
inline ImageCube project(const Matrix& basis, const ImageCube& x) {
  if (basis.rows() != x.bands()) {
    fail(ErrorKind::kShape, "basis has " + std::to_string(basis.rows()) + " rows but cube has " +
                                std::to_string(x.bands()) + " bands");
  }
  return with_data(x, basis.transpose() * x.data());
}

/// X = H U.
inline ImageCube lift(const Matrix& basis, const ImageCube& u) {
  if (basis.cols() != u.bands()) {
    fail(ErrorKind::kShape, "basis has " + std::to_string(basis.cols()) + " columns but coefficients have " +
                                std::to_string(u.bands()) + " bands");
  }
  return with_data(u, basis * u.data());
}

}  // namespace sylfuse
