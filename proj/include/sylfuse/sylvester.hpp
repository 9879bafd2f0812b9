#pragma once

// Closed-form solution of the fusion Sylvester equation C1 U + U C2 = C3 with
// C2 = B S S^H B^H, diagonalized by the 2-D DFT and the decimation alias structure.

#include "sylfuse/core.hpp"
#include "sylfuse/fft.hpp"
#include "sylfuse/model.hpp"
#include "sylfuse/parallel.hpp"
#include "sylfuse/subspace.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace sylfuse {

/// Eigenvalues of the circulant blur: B = F diag(d_diag) F^H with unitary F.
struct BlurSpectrum {
  ComplexVector d_diag;
  Vector omega_diag;  // |d_diag|^2
  Index rows = 0;
  Index cols = 0;
};

/// DFT eigenvalues of the circulant matrix whose anchor tap sits at pixel (0, 0).
inline BlurSpectrum kernel_spectrum(const Matrix& kernel, Index rows, Index cols, Index anchor_r,
                                    Index anchor_c) {
  if (kernel.rows() > rows || kernel.cols() > cols) {
    fail(ErrorKind::kShape, "kernel " + dims_str(kernel.rows(), kernel.cols()) + " does not fit grid " +
                                dims_str(rows, cols));
  }
  BandMatrix grid = BandMatrix::Zero(1, rows * cols);
  for (Index i = 0; i < kernel.rows(); ++i) {
    for (Index j = 0; j < kernel.cols(); ++j) {
      const Index r = detail::wrap(i - anchor_r, rows);
      const Index c = detail::wrap(j - anchor_c, cols);
      grid(0, r * cols + c) += kernel(i, j);
    }
  }
  FftEngine fft(rows, cols);
  const ComplexBandMatrix spectrum = fft.forward(grid);
  BlurSpectrum out;
  out.rows = rows;
  out.cols = cols;
  out.d_diag = spectrum.row(0).transpose() * std::sqrt(static_cast<double>(rows * cols));
  out.omega_diag = out.d_diag.cwiseAbs2();
  return out;
}

inline BlurSpectrum kernel_spectrum(const Matrix& kernel, Index rows, Index cols) {
  return kernel_spectrum(kernel, rows, cols, kernel.rows() / 2, kernel.cols() / 2);
}

/// Spectrum of the effective blur, with the model's sampling phase folded into the anchor.
inline BlurSpectrum kernel_spectrum(const ObservationModel& model, Index rows, Index cols) {
  return kernel_spectrum(model.blur_kernel, rows, cols, model.anchor_rows(), model.anchor_cols());
}

/// Grouping of the n DFT bins into d blocks of m mutually aliased frequencies.
///
/// Permuted position j * m + k holds the natural frequency index of
/// (k_r + i_r * m_r, k_c + i_c * m_c), with block j = i_r * d_c + i_c and slot k = k_r * m_c + k_c.
struct AliasPartition {
  Index d_r = 1;
  Index d_c = 1;
  Index m_r = 1;
  Index m_c = 1;
  std::vector<Index> permutation;
  Matrix omega_blocks;  // (d x m); row j is Omega_{j+1}

  [[nodiscard]] Index blocks() const noexcept { return d_r * d_c; }
  [[nodiscard]] Index block_size() const noexcept { return m_r * m_c; }
  [[nodiscard]] Index size() const noexcept { return blocks() * block_size(); }
};

inline AliasPartition alias_partition(Index rows, Index cols, Index d_r, Index d_c, const Vector& omega) {
  if (rows % d_r != 0 || cols % d_c != 0) {
    fail(ErrorKind::kShape, "grid " + dims_str(rows, cols) + " not divisible by " + dims_str(d_r, d_c));
  }
  if (omega.size() != rows * cols) fail(ErrorKind::kShape, "omega length does not match grid");
  AliasPartition a;
  a.d_r = d_r;
  a.d_c = d_c;
  a.m_r = rows / d_r;
  a.m_c = cols / d_c;
  const Index m = a.block_size();
  a.permutation.resize(static_cast<std::size_t>(rows * cols));
  a.omega_blocks.resize(a.blocks(), m);
  for (Index ir = 0; ir < d_r; ++ir) {
    for (Index ic = 0; ic < d_c; ++ic) {
      const Index block = ir * d_c + ic;
      for (Index kr = 0; kr < a.m_r; ++kr) {
        for (Index kc = 0; kc < a.m_c; ++kc) {
          const Index slot = kr * a.m_c + kc;
          const Index freq = (kr + ir * a.m_r) * cols + (kc + ic * a.m_c);
          a.permutation[static_cast<std::size_t>(block * m + slot)] = freq;
          a.omega_blocks(block, slot) = omega(freq);
        }
      }
    }
  }
  return a;
}

/// Natural frequency order -> alias-block order, per band.
inline ComplexBandMatrix to_alias_order(const ComplexBandMatrix& x, const AliasPartition& a) {
  ComplexBandMatrix out(x.rows(), x.cols());
  for (Index b = 0; b < x.rows(); ++b) {
    for (Index p = 0; p < x.cols(); ++p) out(b, p) = x(b, a.permutation[static_cast<std::size_t>(p)]);
  }
  return out;
}

inline ComplexBandMatrix from_alias_order(const ComplexBandMatrix& x, const AliasPartition& a) {
  ComplexBandMatrix out(x.rows(), x.cols());
  for (Index b = 0; b < x.rows(); ++b) {
    for (Index p = 0; p < x.cols(); ++p) out(b, a.permutation[static_cast<std::size_t>(p)]) = x(b, p);
  }
  return out;
}

/// x <- x P^{-1}: every block row gets blocks 2..d added onto block 1.
inline void apply_p_inverse(ComplexBandMatrix& x, const AliasPartition& a) {
  const Index m = a.block_size();
  for (Index j = 1; j < a.blocks(); ++j) x.middleCols(0, m) += x.middleCols(j * m, m);
}

/// x <- x P: blocks 2..d are subtracted from block 1.
inline void apply_p(ComplexBandMatrix& x, const AliasPartition& a) {
  const Index m = a.block_size();
  for (Index j = 1; j < a.blocks(); ++j) x.middleCols(0, m) -= x.middleCols(j * m, m);
}

/// C1 = A1 A2 in factored form.
struct C1Factors {
  Matrix a1;          // (H^T Lambda_R^{-1} H)^{-1}, SPD
  Matrix a1_inverse;  // H^T Lambda_R^{-1} H
  Matrix a2;          // (LH)^T Lambda_L^{-1} (LH) [+ Sigma^{-1}], PSD
  Index a2_rank = 0;

  [[nodiscard]] Matrix c1() const { return a1 * a2; }
  [[nodiscard]] bool singular() const noexcept { return a2_rank < a2.rows(); }
};

inline Index numerical_rank_psd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  const double hi = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
  const double tol = 1e-12 * hi;
  Index rank = 0;
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) rank += eig.eigenvalues()(i) > tol ? 1 : 0;
  return rank;
}

inline C1Factors assemble_c1(const Matrix& basis, const Matrix& response, const Matrix& cov_left,
                             const Matrix& cov_right, const std::optional<Matrix>& prior_precision = std::nullopt) {
  if (response.cols() != basis.rows() || cov_right.rows() != basis.rows() || cov_left.rows() != response.rows()) {
    fail(ErrorKind::kShape, "assemble_c1: H " + dims_str(basis.rows(), basis.cols()) + ", L " +
                                dims_str(response.rows(), response.cols()) + ", Lambda_L " +
                                dims_str(cov_left.rows(), cov_left.cols()) + ", Lambda_R " +
                                dims_str(cov_right.rows(), cov_right.cols()) + " do not conform");
  }
  require_spd(cov_left, "Lambda_L");
  require_spd(cov_right, "Lambda_R");
  const Eigen::LLT<Matrix> right(cov_right);
  const Eigen::LLT<Matrix> left(cov_left);
  const Matrix lh = response * basis;

  C1Factors f;
  f.a1_inverse = basis.transpose() * right.solve(basis);
  f.a1_inverse = 0.5 * (f.a1_inverse + f.a1_inverse.transpose());
  require_spd(f.a1_inverse, "H^T Lambda_R^{-1} H (is H rank deficient?)");
  f.a1 = f.a1_inverse.llt().solve(Matrix::Identity(basis.cols(), basis.cols()));
  f.a1 = 0.5 * (f.a1 + f.a1.transpose());
  f.a2 = lh.transpose() * left.solve(lh);
  if (prior_precision) {
    if (prior_precision->rows() != basis.cols()) {
      fail(ErrorKind::kShape, "prior precision is " + dims_str(prior_precision->rows(), prior_precision->cols()) +
                                  " but subspace dim is " + std::to_string(basis.cols()));
    }
    require_spd(*prior_precision, "prior precision");
    f.a2 += *prior_precision;
  }
  f.a2 = 0.5 * (f.a2 + f.a2.transpose());
  f.a2_rank = numerical_rank_psd(f.a2);
  return f;
}

/// C1 = Q diag(lambda) Q^{-1} with real Q and lambda >= 0, via the symmetric similarity
/// A1^{1/2} A2 A1^{1/2} = V diag(lambda) V^T, Q = A1^{1/2} V. Eigenvalues are descending.
struct C1Eigen {
  Matrix q;
  Matrix q_inverse;
  Vector lambda;
};

inline C1Eigen eigendecompose_c1(const Matrix& a1, const Matrix& a2) {
  require_spd(a1, "A1");
  Eigen::SelfAdjointEigenSolver<Matrix> e1(a1);
  const Vector root = e1.eigenvalues().cwiseSqrt();
  const Matrix a1_sqrt = e1.eigenvectors() * root.asDiagonal() * e1.eigenvectors().transpose();
  const Matrix a1_isqrt = e1.eigenvectors() * root.cwiseInverse().asDiagonal() * e1.eigenvectors().transpose();
  Matrix sym = a1_sqrt * a2 * a1_sqrt;
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> e2(sym);

  const Index k = a1.rows();
  C1Eigen out;
  out.lambda.resize(k);
  Matrix v(k, k);
  for (Index i = 0; i < k; ++i) {  // ascending -> descending
    out.lambda(i) = e2.eigenvalues()(k - 1 - i);
    v.col(i) = e2.eigenvectors().col(k - 1 - i);
  }
  fix_column_signs(v);
  out.q = a1_sqrt * v;
  out.q_inverse = v.transpose() * a1_isqrt;
  return out;
}

/// Matrix-normal prior on the subspace coefficients: U ~ MN(mean, Sigma, I).
struct GaussianPrior {
  ImageCube mean;    // (dim x n) on the high-resolution grid
  Matrix precision;  // Sigma^{-1}, SPD
};

struct SolveOptions {
  double tau = 0.0;               // ridge for the blur inversion (D + tau I)^{-1}
  double singular_tol = 1e-12;    // relative to max eigenvalue of C1
  double blur_tol = 1e-10;        // relative to max |d_diag|
  bool stationarity = true;       // compute the operator-form stationarity residual
};

/// Data-independent part of the fast solver plus the current right-hand side.
struct SylvesterSystem {
  Index rows = 0;  // high-resolution grid
  Index cols = 0;
  BlurSpectrum spectrum;
  AliasPartition alias;
  C1Factors c1;
  C1Eigen eig;
  Matrix c4;          // Q^{-1} A1
  Matrix proj_right;  // H^T Lambda_R^{-1}
  Matrix proj_left;   // (LH)^T Lambda_L^{-1}
  std::optional<Matrix> prior_precision;
  double tau = 0.0;
  ComplexBandMatrix c3_bar;  // alias order, P^{-1} applied

  [[nodiscard]] Index dim() const noexcept { return eig.lambda.size(); }
  [[nodiscard]] Index pixels() const noexcept { return rows * cols; }
};

inline SylvesterSystem prepare_system(const ObservationModel& model, const Matrix& basis, Index rows, Index cols,
                                      const std::optional<Matrix>& prior_precision = std::nullopt,
                                      double tau = 0.0) {
  model.validate(rows, cols);
  if (basis.rows() != model.bands()) {
    fail(ErrorKind::kShape, "basis has " + std::to_string(basis.rows()) + " rows but model has " +
                                std::to_string(model.bands()) + " bands");
  }
  if (tau < 0.0) fail(ErrorKind::kValidation, "tau must be non-negative");
  SylvesterSystem s;
  s.rows = rows;
  s.cols = cols;
  s.spectrum = kernel_spectrum(model, rows, cols);
  s.alias = alias_partition(rows, cols, model.decim_rows, model.decim_cols, s.spectrum.omega_diag);
  s.c1 = assemble_c1(basis, model.spectral_response, model.noise_cov_left, model.noise_cov_right, prior_precision);
  s.eig = eigendecompose_c1(s.c1.a1, s.c1.a2);
  s.c4 = s.eig.q_inverse * s.c1.a1;
  s.proj_right = model.noise_cov_right.llt().solve(basis).transpose();
  s.proj_left = model.noise_cov_left.llt().solve(model.spectral_response * basis).transpose();
  s.prior_precision = prior_precision;
  s.tau = tau;
  return s;
}

namespace detail {

inline void check_observations(const SylvesterSystem& s, const ImageCube& left, const ImageCube& right) {
  const Index mr = s.alias.m_r;
  const Index mc = s.alias.m_c;
  if (left.rows() != s.rows || left.cols() != s.cols || left.bands() != s.proj_left.cols()) {
    fail(ErrorKind::kShape, "Y_L is " + left.shape_str() + ", expected " + std::to_string(s.proj_left.cols()) +
                                " bands x " + dims_str(s.rows, s.cols));
  }
  if (right.rows() != mr || right.cols() != mc || right.bands() != s.proj_right.cols()) {
    fail(ErrorKind::kShape, "Y_R is " + right.shape_str() + ", expected " + std::to_string(s.proj_right.cols()) +
                                " bands x " + dims_str(mr, mc));
  }
}

// x <- c4 * x, x complex (dim x n), c4 real.
inline ComplexBandMatrix mix_bands(const Matrix& mix, const ComplexBandMatrix& x) {
  return mix.cast<Complex>() * x;
}

inline void scale_columns(ComplexBandMatrix& x, const ComplexVector& diag, bool conjugate) {
  for (Index b = 0; b < x.rows(); ++b) {
    if (conjugate) {
      x.row(b).array() *= diag.transpose().array().conjugate();
    } else {
      x.row(b).array() *= diag.transpose().array();
    }
  }
}

}  // namespace detail

/// Frequency-domain data term, before the Q^{-1} A1 mixing and the D P^{-1} step:
/// (H^T Lambda_R^{-1} Y_R S^H F D^* + ((LH)^T Lambda_L^{-1} Y_L + Sigma^{-1} mu) F).
/// Exactly two forward transform batches.
inline ComplexBandMatrix data_term_spectrum(const SylvesterSystem& s, FftEngine& fft, const ImageCube& left,
                                            const ImageCube& right, const ImageCube* prior_mean) {
  detail::check_observations(s, left, right);
  const ImageCube low(s.proj_right * right.data(), right.rows(), right.cols());
  const ImageCube spread = zero_interpolate(low, s.alias.d_r, s.alias.d_c);
  BandMatrix full = s.proj_left * left.data();
  if (prior_mean != nullptr) {
    if (!s.prior_precision) fail(ErrorKind::kValidation, "prior mean given but system has no prior precision");
    if (prior_mean->bands() != s.dim() || prior_mean->pixels() != s.pixels()) {
      fail(ErrorKind::kShape, "prior mean is " + prior_mean->shape_str() + ", expected " + std::to_string(s.dim()) +
                                  " bands x " + dims_str(s.rows, s.cols));
    }
    full += *s.prior_precision * prior_mean->data();
  }
  ComplexBandMatrix term = fft.forward(spread.data());
  detail::scale_columns(term, s.spectrum.d_diag, true);
  term += fft.forward(full);
  return term;
}

/// (frequency-domain C3 F) -> C3_bar = Q^{-1} A1 (.) D P^{-1} in alias order.
inline ComplexBandMatrix finish_c3_bar(const SylvesterSystem& s, const ComplexBandMatrix& spectrum_term) {
  ComplexBandMatrix c = detail::mix_bands(s.c4, spectrum_term);
  detail::scale_columns(c, s.spectrum.d_diag, false);
  c = to_alias_order(c, s.alias);
  apply_p_inverse(c, s.alias);
  return c;
}

/// C3_bar = Q^{-1} C3 B F P^{-1} (alias order). Uses two forward FFT batches.
inline ComplexBandMatrix assemble_c3_bar(const SylvesterSystem& s, FftEngine& fft, const ImageCube& left,
                                         const ImageCube& right, const ImageCube* prior_mean = nullptr) {
  return finish_c3_bar(s, data_term_spectrum(s, fft, left, right, prior_mean));
}

/// Block-by-block solution of Lambda_C U_bar + U_bar M = C3_bar.
inline ComplexBandMatrix solve_blocks(const ComplexBandMatrix& c3_bar, const AliasPartition& alias,
                                      const Vector& lambda, double singular_tol = 1e-12) {
  const Index d = alias.blocks();
  const Index m = alias.block_size();
  if (c3_bar.cols() != d * m || c3_bar.rows() != lambda.size()) {
    fail(ErrorKind::kShape, "solve_blocks: C3_bar is " + dims_str(c3_bar.rows(), c3_bar.cols()) + ", expected " +
                                dims_str(lambda.size(), d * m));
  }
  const double inv_d = 1.0 / static_cast<double>(d);
  const Vector mean_omega = alias.omega_blocks.colwise().sum().transpose() * inv_d;
  const double lambda_max = lambda.size() > 0 ? std::max(lambda.maxCoeff(), 0.0) : 0.0;
  const double tol = singular_tol * lambda_max;

  for (Index l = 0; l < lambda.size(); ++l) {
    if (d > 1 && !(lambda(l) > tol)) {
      fail(ErrorKind::kSingularSystem,
           "Sylvester system is singular: eigenvalue " + std::to_string(l) + " of C1 is " + std::to_string(lambda(l)) +
               " (no unique solution; add a prior or regularization, e.g. method=gaussian)");
    }
    const double floor = singular_tol * (mean_omega.maxCoeff() + lambda_max);
    if ((mean_omega.array() + lambda(l)).minCoeff() <= floor) {
      fail(ErrorKind::kSingularSystem, "Sylvester system is singular in the first alias block for band " +
                                           std::to_string(l) + "; add a prior or regularization");
    }
  }

  ComplexBandMatrix u(c3_bar.rows(), c3_bar.cols());
  parallel_for(static_cast<long>(lambda.size()), [&](long l) {
    const double lam = lambda(l);
    for (Index k = 0; k < m; ++k) u(l, k) = c3_bar(l, k) / (mean_omega(k) + lam);
    for (Index j = 1; j < d; ++j) {
      for (Index k = 0; k < m; ++k) {
        u(l, j * m + k) = (c3_bar(l, j * m + k) - inv_d * u(l, k) * alias.omega_blocks(j, k)) / lam;
      }
    }
  });
  return u;
}

/// Q U_bar P (D + tau I)^{-1}: the subspace coefficients in natural frequency order (U F).
inline ComplexBandMatrix coefficients_spectrum(const Matrix& q, const ComplexBandMatrix& u_bar,
                                               const AliasPartition& alias, const BlurSpectrum& spectrum,
                                               double tau, double blur_tol = 1e-10) {
  if (tau < 0.0) fail(ErrorKind::kValidation, "tau must be non-negative");
  const double dmax = spectrum.d_diag.cwiseAbs().maxCoeff();
  if (tau == 0.0 && spectrum.d_diag.cwiseAbs().minCoeff() < blur_tol * dmax) {
    fail(ErrorKind::kIllConditioned,
         "blur spectrum has (near) zero eigenvalues; set a positive tau to regularize the inversion");
  }
  ComplexBandMatrix x = u_bar;
  apply_p(x, alias);
  x = from_alias_order(x, alias);
  const ComplexVector inv = (spectrum.d_diag.array() + tau).inverse();
  detail::scale_columns(x, inv, false);
  return detail::mix_bands(q, x);
}

/// X_hat = H Q U_bar P (D + tau I)^{-1} F^H. One inverse FFT batch.
inline ImageCube reconstruct(const Matrix& basis, const Matrix& q, const ComplexBandMatrix& u_bar,
                             const AliasPartition& alias, const BlurSpectrum& spectrum, double tau,
                             FftEngine& fft, double blur_tol = 1e-10) {
  const ComplexBandMatrix spec = coefficients_spectrum(q, u_bar, alias, spectrum, tau, blur_tol);
  ImageCube u(fft.inverse_real(spec), spectrum.rows, spectrum.cols);
  return lift(basis, u);
}

/// Relative residual of the normal equations
///   H^T R^{-1} H U B S S^H B^H + A2 U = H^T R^{-1} Y_R (BS)^H + (LH)^T L^{-1} Y_L [+ Sigma^{-1} mu]
/// evaluated with spatial-domain operators (no FFT).
inline double stationarity_residual(const ImageCube& u, const ImageCube& left, const ImageCube& right,
                                    const ObservationModel& model, const Matrix& basis,
                                    const GaussianPrior* prior = nullptr) {
  const Index ar = model.anchor_rows();
  const Index ac = model.anchor_cols();
  const Index dr = model.decim_rows;
  const Index dc = model.decim_cols;
  const Eigen::LLT<Matrix> rinv(model.noise_cov_right);
  const Eigen::LLT<Matrix> linv(model.noise_cov_left);
  const Matrix lh = model.spectral_response * basis;
  const Matrix gram_right = basis.transpose() * rinv.solve(basis);
  Matrix a2 = lh.transpose() * linv.solve(lh);
  if (prior != nullptr) a2 += prior->precision;

  const ImageCube sampled = zero_interpolate(decimate(circular_blur(model.blur_kernel, u, ar, ac), dr, dc), dr, dc);
  const ImageCube c2_term = circular_blur_adjoint(model.blur_kernel, sampled, ar, ac);
  const BandMatrix lhs = gram_right * c2_term.data() + a2 * u.data();

  const ImageCube low(rinv.solve(basis).transpose() * right.data(), right.rows(), right.cols());
  const ImageCube back = circular_blur_adjoint(model.blur_kernel, zero_interpolate(low, dr, dc), ar, ac);
  BandMatrix rhs = back.data() + linv.solve(lh).transpose() * left.data();
  if (prior != nullptr) rhs += prior->precision * prior->mean.data();
  return relative_error(lhs, rhs);
}

struct Diagnostics {
  double wall_seconds = 0.0;
  FftStats fft;
  std::vector<double> objective_trace;
  std::optional<double> stationarity_residual;
  std::optional<double> primal_residual;  // ||U - V|| / ||U|| for ADMM
  long iterations = 0;
  bool converged = true;
  double lambda_min = 0.0;  // smallest eigenvalue of C1
  double lambda_max = 0.0;
};

struct FusionResult {
  ImageCube estimate;      // X_hat, (m_lambda x n)
  ImageCube coefficients;  // U_hat, (dim x n)
  Diagnostics diagnostics;
};

namespace detail {

inline FusionResult solve_closed_form(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                                      const Matrix& basis, const GaussianPrior* prior, const SolveOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const Index rows = left.rows();
  const Index cols = left.cols();
  std::optional<Matrix> precision;
  if (prior != nullptr) precision = prior->precision;
  SylvesterSystem s = prepare_system(model, basis, rows, cols, precision, opt.tau);
  FftEngine fft(rows, cols);
  s.c3_bar = assemble_c3_bar(s, fft, left, right, prior != nullptr ? &prior->mean : nullptr);
  const ComplexBandMatrix u_bar = solve_blocks(s.c3_bar, s.alias, s.eig.lambda, opt.singular_tol);
  const ComplexBandMatrix spec = coefficients_spectrum(s.eig.q, u_bar, s.alias, s.spectrum, s.tau, opt.blur_tol);
  ImageCube u(fft.inverse_real(spec), rows, cols);

  FusionResult result;
  result.estimate = lift(basis, u);
  result.diagnostics.fft = fft.stats();
  result.diagnostics.lambda_min = s.eig.lambda.minCoeff();
  result.diagnostics.lambda_max = s.eig.lambda.maxCoeff();
  result.diagnostics.iterations = 1;
  result.diagnostics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (opt.stationarity) {
    result.diagnostics.stationarity_residual = stationarity_residual(u, left, right, model, basis, prior);
  }
  result.coefficients = std::move(u);
  return result;
}

}  // namespace detail

/// Maximum-likelihood fusion (closed form). Requires C1 invertible when d > 1.
inline FusionResult fuse_ml(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                            const Matrix& basis, const SolveOptions& opt = {}) {
  return detail::solve_closed_form(left, right, model, basis, nullptr, opt);
}

/// MAP fusion under a matrix-normal prior on the subspace coefficients (closed form).
inline FusionResult fuse_gaussian(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                                  const Matrix& basis, const GaussianPrior& prior, const SolveOptions& opt = {}) {
  return detail::solve_closed_form(left, right, model, basis, &prior, opt);
}

}  // namespace sylfuse
