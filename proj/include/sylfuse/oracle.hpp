#pragma once

// Dense brute-force references for small problems. Nothing here is used by the fast
// solver; every matrix is built explicitly from its definition.

#include "sylfuse/core.hpp"
#include "sylfuse/model.hpp"
#include "sylfuse/sylvester.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

namespace sylfuse::oracle {

inline constexpr Index kMaxPixels = 4096;
inline constexpr Index kMaxUnknowns = 8192;

using ComplexMatrix = Eigen::MatrixXcd;

inline void guard(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::kSizeGuard, "oracle size guard: " + what);
}

/// Explicit operators on an (rows x cols) grid with row-major pixel order.
struct DenseOperators {
  Index rows = 0;
  Index cols = 0;
  Index d_r = 1;
  Index d_c = 1;
  ComplexMatrix f;      // unitary 2-D DFT, n x n
  Matrix s;             // decimation, n x m
  Matrix b;             // circulant blur acting on row vectors: (x B)
  Matrix permutation;   // Pi with (x Pi)_p = x_{perm[p]}
  Matrix p;             // block transform in alias order
  Matrix p_inverse;

  [[nodiscard]] Index pixels() const noexcept { return rows * cols; }
  [[nodiscard]] Index blocks() const noexcept { return d_r * d_c; }
  [[nodiscard]] Index block_size() const noexcept { return pixels() / blocks(); }
  [[nodiscard]] Matrix s_bar() const { return s * s.transpose(); }
};

inline ComplexMatrix dft_1d(Index n) {
  ComplexMatrix f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < n; ++j) {
    for (Index k = 0; k < n; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
      f(j, k) = std::polar(scale, angle);
    }
  }
  return f;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

inline DenseOperators dense_operators(Index rows, Index cols, Index d_r, Index d_c, const Matrix& kernel,
                                      Index phase_r = 0, Index phase_c = 0) {
  const Index n = rows * cols;
  guard(n <= kMaxPixels, "n = " + std::to_string(n) + " exceeds " + std::to_string(kMaxPixels));
  if (rows % d_r != 0 || cols % d_c != 0) fail(ErrorKind::kShape, "grid not divisible by decimation");
  DenseOperators ops;
  ops.rows = rows;
  ops.cols = cols;
  ops.d_r = d_r;
  ops.d_c = d_c;
  ops.f = kron(dft_1d(rows), dft_1d(cols));

  const Index mr = rows / d_r;
  const Index mc = cols / d_c;
  const Index m = mr * mc;
  ops.s = Matrix::Zero(n, m);
  for (Index r = 0; r < mr; ++r) {
    for (Index c = 0; c < mc; ++c) ops.s((r * d_r + phase_r) * cols + c * d_c + phase_c, r * mc + c) = 1.0;
  }

  // g[a] = kernel[a + center]; (x B)_p = sum_q x_q g[p - q].
  const Index ar = kernel.rows() / 2;
  const Index ac = kernel.cols() / 2;
  Matrix g = Matrix::Zero(rows, cols);
  for (Index i = 0; i < kernel.rows(); ++i) {
    for (Index j = 0; j < kernel.cols(); ++j) {
      g(((i - ar) % rows + rows) % rows, ((j - ac) % cols + cols) % cols) += kernel(i, j);
    }
  }
  ops.b.resize(n, n);
  for (Index qr = 0; qr < rows; ++qr) {
    for (Index qc = 0; qc < cols; ++qc) {
      for (Index pr = 0; pr < rows; ++pr) {
        for (Index pc = 0; pc < cols; ++pc) {
          ops.b(qr * cols + qc, pr * cols + pc) = g((pr - qr + rows) % rows, (pc - qc + cols) % cols);
        }
      }
    }
  }

  ops.permutation = Matrix::Zero(n, n);
  for (Index ir = 0; ir < d_r; ++ir) {
    for (Index ic = 0; ic < d_c; ++ic) {
      for (Index kr = 0; kr < mr; ++kr) {
        for (Index kc = 0; kc < mc; ++kc) {
          const Index position = (ir * d_c + ic) * m + kr * mc + kc;
          const Index freq = (kr + ir * mr) * cols + kc + ic * mc;
          ops.permutation(freq, position) = 1.0;
        }
      }
    }
  }

  const Index d = d_r * d_c;
  ops.p = Matrix::Identity(n, n);
  ops.p_inverse = Matrix::Identity(n, n);
  for (Index j = 1; j < d; ++j) {
    ops.p.block(j * m, 0, m, m) = -Matrix::Identity(m, m);
    ops.p_inverse.block(j * m, 0, m, m) = Matrix::Identity(m, m);
  }
  return ops;
}

/// D = F^H B F computed densely (diagonal up to rounding).
inline ComplexVector dense_blur_eigenvalues(const DenseOperators& ops) {
  const ComplexMatrix d = ops.f.adjoint() * ops.b.cast<Complex>() * ops.f;
  return d.diagonal();
}

/// ||Pi^T F^H S S^T F Pi - (1/d) J_d (x) I_m||_max.
inline double verify_lemma3(Index rows, Index cols, Index d_r, Index d_c) {
  const DenseOperators ops = dense_operators(rows, cols, d_r, d_c, Matrix::Ones(1, 1));
  const ComplexMatrix fs = ops.f.adjoint() * ops.s.cast<Complex>();
  const ComplexMatrix a = fs * fs.adjoint();  // F^H S S^T F (S real)
  const ComplexMatrix permuted = ops.permutation.transpose().cast<Complex>() * a * ops.permutation.cast<Complex>();
  const Index d = ops.blocks();
  const Index bs = ops.block_size();
  const Matrix expected = kron(Matrix(Matrix::Ones(d, d)), Matrix(Matrix::Identity(bs, bs))) /
                          static_cast<double>(d);
  return (permuted - expected.cast<Complex>()).cwiseAbs().maxCoeff();
}

/// M = P Pi^T (F^H S_bar F Omega) Pi P^{-1} with Omega = |F^H B F|^2, materialized.
inline ComplexMatrix dense_m_matrix(const DenseOperators& ops) {
  const ComplexVector d = dense_blur_eigenvalues(ops);
  const ComplexMatrix fs = ops.f.adjoint() * ops.s.cast<Complex>();
  ComplexMatrix a = fs * fs.adjoint();
  a = a * d.cwiseAbs2().cast<Complex>().asDiagonal();
  const ComplexMatrix pi = ops.permutation.cast<Complex>();
  return ops.p.cast<Complex>() * pi.transpose() * a * pi * ops.p_inverse.cast<Complex>();
}

/// Max deviation of the materialized M from its predicted first-block-row form.
inline double verify_lemma2(Index rows, Index cols, Index d_r, Index d_c, const Matrix& kernel) {
  const DenseOperators ops = dense_operators(rows, cols, d_r, d_c, kernel);
  const ComplexMatrix m_dense = dense_m_matrix(ops);
  const Vector omega = dense_blur_eigenvalues(ops).cwiseAbs2();
  const Vector omega_perm = ops.permutation.transpose() * omega;
  const Index d = ops.blocks();
  const Index m = ops.block_size();
  Matrix expected = Matrix::Zero(ops.pixels(), ops.pixels());
  Vector sum = Vector::Zero(m);
  for (Index j = 0; j < d; ++j) sum += omega_perm.segment(j * m, m);
  expected.block(0, 0, m, m) = (sum / static_cast<double>(d)).asDiagonal();
  for (Index j = 1; j < d; ++j) {
    expected.block(0, j * m, m, m) = (omega_perm.segment(j * m, m) / static_cast<double>(d)).asDiagonal();
  }
  return (m_dense - expected.cast<Complex>()).cwiseAbs().maxCoeff();
}

/// Solves C1 U + U C2 = C3 through (I (x) C1 + C2^T (x) I) vec(U) = vec(C3).
inline Matrix dense_sylvester_solve(const Matrix& c1, const Matrix& c2, const Matrix& c3) {
  const Index k = c1.rows();
  const Index n = c2.rows();
  guard(k * n <= kMaxUnknowns, std::to_string(k * n) + " unknowns exceed " + std::to_string(kMaxUnknowns));
  if (c1.cols() != k || c2.cols() != n || c3.rows() != k || c3.cols() != n) {
    fail(ErrorKind::kShape, "dense_sylvester_solve: nonconforming C1/C2/C3");
  }
  const Matrix system =
      kron(Matrix(Matrix::Identity(n, n)), c1) + kron(Matrix(c2.transpose()), Matrix(Matrix::Identity(k, k)));
  Eigen::PartialPivLU<Matrix> lu(system);
  if (!(lu.rcond() > 1e-14)) {
    fail(ErrorKind::kSingularSystem,
         "vectorized Sylvester system is singular (rcond " + std::to_string(lu.rcond()) + ")");
  }
  Vector vec = lu.solve(Eigen::Map<const Vector>(c3.data(), k * n));
  return Eigen::Map<Matrix>(vec.data(), k, n);
}

/// Bartels-Stewart on complex Schur forms; toy scale only.
inline Matrix bartels_stewart(const Matrix& c1, const Matrix& c2, const Matrix& c3) {
  guard(c1.rows() * c2.rows() <= kMaxUnknowns, "Bartels-Stewart size");
  Eigen::ComplexSchur<Matrix> s1(c1);
  Eigen::ComplexSchur<Matrix> s2(c2);
  const ComplexMatrix& t1 = s1.matrixT();
  const ComplexMatrix& t2 = s2.matrixT();
  const ComplexMatrix g = s1.matrixU().adjoint() * c3.cast<Complex>() * s2.matrixU();
  ComplexMatrix y = ComplexMatrix::Zero(c1.rows(), c2.rows());
  for (Index k = 0; k < c2.rows(); ++k) {
    ComplexVector rhs = g.col(k);
    for (Index j = 0; j < k; ++j) rhs -= t2(j, k) * y.col(j);
    ComplexMatrix tri = t1;
    tri.diagonal().array() += t2(k, k);
    y.col(k) = tri.triangularView<Eigen::Upper>().solve(rhs);
  }
  return (s1.matrixU() * y * s2.matrixU().adjoint()).real();
}

/// C1, C2, C3 of the normal equations, each built from explicit dense matrices.
struct DenseSystem {
  Matrix c1;
  Matrix c2;
  Matrix c3;
};

inline Matrix to_col_major(const BandMatrix& x) { return Matrix(x); }

inline DenseSystem dense_system(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                                const Matrix& basis, const GaussianPrior* prior = nullptr) {
  const DenseOperators ops = dense_operators(left.rows(), left.cols(), model.decim_rows, model.decim_cols,
                                             model.blur_kernel, model.phase_rows, model.phase_cols);
  const Matrix r_inv = model.noise_cov_right.inverse();
  const Matrix l_inv = model.noise_cov_left.inverse();
  const Matrix lh = model.spectral_response * basis;
  const Matrix a1 = (basis.transpose() * r_inv * basis).inverse();
  Matrix a2 = lh.transpose() * l_inv * lh;
  const Matrix bs = ops.b * ops.s;
  Matrix rhs = basis.transpose() * r_inv * to_col_major(right.data()) * bs.transpose() +
               lh.transpose() * l_inv * to_col_major(left.data());
  if (prior != nullptr) {
    a2 += prior->precision;
    rhs += prior->precision * to_col_major(prior->mean.data());
  }
  return {a1 * a2, bs * bs.transpose(), a1 * rhs};
}

/// Vectorized weighted least squares (plus Gaussian prior) solved via its normal equations.
inline Matrix dense_least_squares(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                                  const Matrix& basis, const GaussianPrior* prior = nullptr) {
  const Index n = left.pixels();
  const Index k = basis.cols();
  guard(k * n <= 2048, "dense least squares with " + std::to_string(k * n) + " unknowns");
  const DenseOperators ops = dense_operators(left.rows(), left.cols(), model.decim_rows, model.decim_cols,
                                             model.blur_kernel, model.phase_rows, model.phase_cols);
  const Matrix bs = ops.b * ops.s;
  const Index m = bs.cols();
  const Matrix a_right = kron(Matrix(bs.transpose()), basis);
  const Matrix w_right = kron(Matrix::Identity(m, m), Matrix(model.noise_cov_right.inverse()));
  const Matrix lh = model.spectral_response * basis;
  const Matrix a_left = kron(Matrix::Identity(n, n), lh);
  const Matrix w_left = kron(Matrix::Identity(n, n), Matrix(model.noise_cov_left.inverse()));

  const Matrix yr = to_col_major(right.data());
  const Matrix yl = to_col_major(left.data());
  const Eigen::Map<const Vector> vr(yr.data(), yr.size());
  const Eigen::Map<const Vector> vl(yl.data(), yl.size());

  Matrix normal = a_right.transpose() * w_right * a_right + a_left.transpose() * w_left * a_left;
  Vector rhs = a_right.transpose() * w_right * vr + a_left.transpose() * w_left * vl;
  if (prior != nullptr) {
    const Matrix p = kron(Matrix::Identity(n, n), prior->precision);
    const Matrix mu = to_col_major(prior->mean.data());
    normal += p;
    rhs += p * Eigen::Map<const Vector>(mu.data(), mu.size());
  }
  Eigen::FullPivLU<Matrix> lu(normal);
  if (lu.rank() < normal.rows()) fail(ErrorKind::kSingularSystem, "dense least squares normal matrix is singular");
  Vector u = lu.solve(rhs);
  return Eigen::Map<Matrix>(u.data(), k, n);
}

/// ||lhs - rhs|| / ||rhs|| of the normal equations, all terms dense.
inline double verify_stationarity(const ImageCube& u, const ImageCube& left, const ImageCube& right,
                                  const ObservationModel& model, const Matrix& basis,
                                  const GaussianPrior* prior = nullptr) {
  const DenseOperators ops = dense_operators(left.rows(), left.cols(), model.decim_rows, model.decim_cols,
                                             model.blur_kernel, model.phase_rows, model.phase_cols);
  const Matrix r_inv = model.noise_cov_right.inverse();
  const Matrix l_inv = model.noise_cov_left.inverse();
  const Matrix lh = model.spectral_response * basis;
  const Matrix bs = ops.b * ops.s;
  const Matrix uu = to_col_major(u.data());
  Matrix lhs = basis.transpose() * r_inv * basis * uu * bs * bs.transpose() + lh.transpose() * l_inv * lh * uu;
  Matrix rhs = basis.transpose() * r_inv * to_col_major(right.data()) * bs.transpose() +
               lh.transpose() * l_inv * to_col_major(left.data());
  if (prior != nullptr) {
    lhs += prior->precision * uu;
    rhs += prior->precision * to_col_major(prior->mean.data());
  }
  return relative_error(lhs, rhs);
}

/// 1/2 tr((Y_R - HUBS)^T R^{-1} (.)) + 1/2 tr((Y_L - LHU)^T L^{-1} (.)), dense.
inline double dense_data_objective(const ImageCube& u, const ImageCube& left, const ImageCube& right,
                                   const ObservationModel& model, const Matrix& basis) {
  const DenseOperators ops = dense_operators(left.rows(), left.cols(), model.decim_rows, model.decim_cols,
                                             model.blur_kernel, model.phase_rows, model.phase_cols);
  const Matrix uu = to_col_major(u.data());
  const Matrix er = to_col_major(right.data()) - basis * uu * ops.b * ops.s;
  const Matrix el = to_col_major(left.data()) - model.spectral_response * basis * uu;
  return 0.5 * (er.transpose() * model.noise_cov_right.inverse() * er).trace() +
         0.5 * (el.transpose() * model.noise_cov_left.inverse() * el).trace();
}

/// Q^{-1} C3 B F Pi P^{-1} with explicit matrices (alias order).
inline ComplexMatrix dense_c3_bar(const Matrix& q_inverse, const Matrix& c3, const DenseOperators& ops) {
  return q_inverse.cast<Complex>() * c3.cast<Complex>() * ops.b.cast<Complex>() * ops.f *
         ops.permutation.cast<Complex>() * ops.p_inverse.cast<Complex>();
}

}  // namespace sylfuse::oracle
