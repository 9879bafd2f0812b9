#pragma once

#include "sylfuse/core.hpp"
#include "sylfuse/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sylfuse {

/// Decibel base used when converting SNR values. The source formula writes a bare "log".
inline constexpr double kSnrLogBase = 10.0;

/// Relative eigenvalue floor for the SPD gate: lambda_min > tol * lambda_max.
inline constexpr double kSpdTolerance = 1e-12;

/// Throws kDefiniteness unless `a` is symmetric positive definite.
inline void require_spd(const Matrix& a, const std::string& what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    fail(ErrorKind::kShape, what + ": expected a non-empty square matrix, got " + dims_str(a.rows(), a.cols()));
  }
  const double scale = a.cwiseAbs().maxCoeff();
  if (!a.allFinite() || (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    fail(ErrorKind::kDefiniteness, what + ": matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || !(lo > kSpdTolerance * hi)) {
    fail(ErrorKind::kDefiniteness, what + ": matrix is not positive definite (eigenvalues in [" +
                                       std::to_string(lo) + ", " + std::to_string(hi) + "])");
  }
}

/// Symmetric square root through the eigendecomposition; works for any SPD input.
inline Matrix symmetric_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

/// Degradation operators and noise description for one sensor pair.
struct ObservationModel {
  Matrix spectral_response;  // L, (n_lambda x m_lambda)
  Matrix blur_kernel;        // 2-D taps, center tap at (rows/2, cols/2)
  Index decim_rows = 1;
  Index decim_cols = 1;
  // Offset of the kept pixel inside each decimation block; (0, 0) is the top-left corner.
  Index phase_rows = 0;
  Index phase_cols = 0;
  Matrix noise_cov_left;   // Lambda_L, (n_lambda x n_lambda)
  Matrix noise_cov_right;  // Lambda_R, (m_lambda x m_lambda)

  [[nodiscard]] Index decimation() const noexcept { return decim_rows * decim_cols; }
  [[nodiscard]] Index left_bands() const noexcept { return spectral_response.rows(); }
  [[nodiscard]] Index bands() const noexcept { return spectral_response.cols(); }

  /// Tap of the kernel that lands on the sampled pixel. Absorbing the sampling phase into
  /// the anchor turns phase-shifted decimation into top-left decimation of a shifted blur.
  [[nodiscard]] Index anchor_rows() const noexcept { return blur_kernel.rows() / 2 + phase_rows; }
  [[nodiscard]] Index anchor_cols() const noexcept { return blur_kernel.cols() / 2 + phase_cols; }

  /// Checks internal consistency and compatibility with an (rows x cols) high-resolution grid.
  void validate(Index rows, Index cols) const {
    if (decim_rows <= 0 || decim_cols <= 0) fail(ErrorKind::kValidation, "decimation factors must be positive");
    if (rows % decim_rows != 0 || cols % decim_cols != 0) {
      fail(ErrorKind::kShape, "grid " + dims_str(rows, cols) + " is not divisible by decimation " +
                                  dims_str(decim_rows, decim_cols));
    }
    if (phase_rows < 0 || phase_rows >= decim_rows || phase_cols < 0 || phase_cols >= decim_cols) {
      fail(ErrorKind::kValidation, "sampling phase must lie inside the decimation block");
    }
    if (blur_kernel.size() == 0 || blur_kernel.rows() > rows || blur_kernel.cols() > cols) {
      fail(ErrorKind::kShape, "blur kernel " + dims_str(blur_kernel.rows(), blur_kernel.cols()) +
                                  " does not fit grid " + dims_str(rows, cols));
    }
    if (!std::isfinite(blur_kernel.sum())) fail(ErrorKind::kValidation, "blur kernel has non-finite entries");
    if (noise_cov_left.rows() != left_bands()) {
      fail(ErrorKind::kShape, "Lambda_L is " + dims_str(noise_cov_left.rows(), noise_cov_left.cols()) +
                                  " but L has " + std::to_string(left_bands()) + " rows");
    }
    if (noise_cov_right.rows() != bands()) {
      fail(ErrorKind::kShape, "Lambda_R is " + dims_str(noise_cov_right.rows(), noise_cov_right.cols()) +
                                  " but L has " + std::to_string(bands()) + " columns");
    }
    require_spd(noise_cov_left, "Lambda_L");
    require_spd(noise_cov_right, "Lambda_R");
  }
};

/// L X.
inline ImageCube apply_spectral_response(const Matrix& response, const ImageCube& x) {
  if (response.cols() != x.bands()) {
    fail(ErrorKind::kShape, "spectral response has " + std::to_string(response.cols()) +
                                " columns but cube has " + std::to_string(x.bands()) + " bands");
  }
  return with_data(x, response * x.data());
}

namespace detail {

inline Index wrap(Index i, Index n) {
  const Index r = i % n;
  return r < 0 ? r + n : r;
}

// y[p] = sum_t k[t] x[p - (t - anchor)] (cyclic); `adjoint` uses x[p + (t - anchor)].
inline ImageCube cyclic_filter(const Matrix& kernel, const ImageCube& x, Index anchor_r, Index anchor_c,
                               bool adjoint) {
  if (kernel.rows() > x.rows() || kernel.cols() > x.cols()) {
    fail(ErrorKind::kShape, "kernel " + dims_str(kernel.rows(), kernel.cols()) + " larger than image " +
                                dims_str(x.rows(), x.cols()));
  }
  const Index rows = x.rows();
  const Index cols = x.cols();
  BandMatrix out = BandMatrix::Zero(x.bands(), x.pixels());
  const double sign = adjoint ? -1.0 : 1.0;
  parallel_for(static_cast<long>(x.bands()), [&](long band) {
    const double* src = x.data().data() + band * x.pixels();
    double* dst = out.data() + band * x.pixels();
    for (Index ti = 0; ti < kernel.rows(); ++ti) {
      for (Index tj = 0; tj < kernel.cols(); ++tj) {
        const double w = kernel(ti, tj);
        if (w == 0.0) continue;
        const Index dr = static_cast<Index>(sign) * (ti - anchor_r);
        const Index dc = static_cast<Index>(sign) * (tj - anchor_c);
        for (Index r = 0; r < rows; ++r) {
          const Index sr = wrap(r - dr, rows);
          for (Index c = 0; c < cols; ++c) {
            dst[r * cols + c] += w * src[sr * cols + wrap(c - dc, cols)];
          }
        }
      }
    }
  });
  return with_data(x, std::move(out));
}

}  // namespace detail

/// Cyclic convolution of every band with `kernel`, its center tap anchored at pixel (0, 0).
/// This is right-multiplication by the circulant blur matrix B.
inline ImageCube circular_blur(const Matrix& kernel, const ImageCube& x) {
  return detail::cyclic_filter(kernel, x, kernel.rows() / 2, kernel.cols() / 2, false);
}

/// Same as circular_blur with an explicit anchor tap (may lie outside the kernel support).
inline ImageCube circular_blur(const Matrix& kernel, const ImageCube& x, Index anchor_r, Index anchor_c) {
  return detail::cyclic_filter(kernel, x, anchor_r, anchor_c, false);
}

/// Right-multiplication by B^T (cyclic correlation).
inline ImageCube circular_blur_adjoint(const Matrix& kernel, const ImageCube& x, Index anchor_r,
                                       Index anchor_c) {
  return detail::cyclic_filter(kernel, x, anchor_r, anchor_c, true);
}

/// Keeps pixel (i * d_r + phase_r, j * d_c + phase_c) of each block: right-multiplication by S.
inline ImageCube decimate(const ImageCube& x, Index d_r, Index d_c, Index phase_r = 0, Index phase_c = 0) {
  if (d_r <= 0 || d_c <= 0) fail(ErrorKind::kValidation, "decimation factors must be positive");
  if (x.rows() % d_r != 0 || x.cols() % d_c != 0) {
    fail(ErrorKind::kShape, "cannot decimate " + dims_str(x.rows(), x.cols()) + " by " + dims_str(d_r, d_c));
  }
  const Index mr = x.rows() / d_r;
  const Index mc = x.cols() / d_c;
  ImageCube out(x.bands(), mr, mc);
  for (Index b = 0; b < x.bands(); ++b) {
    for (Index r = 0; r < mr; ++r) {
      for (Index c = 0; c < mc; ++c) out.at(b, r, c) = x.at(b, r * d_r + phase_r, c * d_c + phase_c);
    }
  }
  return out;
}

/// Inserts zeros between samples: right-multiplication by S^H. decimate(zero_interpolate(y)) == y.
inline ImageCube zero_interpolate(const ImageCube& y, Index d_r, Index d_c, Index phase_r = 0,
                                  Index phase_c = 0) {
  if (d_r <= 0 || d_c <= 0) fail(ErrorKind::kValidation, "interpolation factors must be positive");
  ImageCube out(y.bands(), y.rows() * d_r, y.cols() * d_c);
  for (Index b = 0; b < y.bands(); ++b) {
    for (Index r = 0; r < y.rows(); ++r) {
      for (Index c = 0; c < y.cols(); ++c) out.at(b, r * d_r + phase_r, c * d_c + phase_c) = y.at(b, r, c);
    }
  }
  return out;
}

/// Pixel replication upsampling; used for baselines and solver initialization.
inline ImageCube nearest_upsample(const ImageCube& y, Index d_r, Index d_c) {
  ImageCube out(y.bands(), y.rows() * d_r, y.cols() * d_c);
  for (Index b = 0; b < y.bands(); ++b) {
    for (Index r = 0; r < out.rows(); ++r) {
      for (Index c = 0; c < out.cols(); ++c) out.at(b, r, c) = y.at(b, r / d_r, c / d_c);
    }
  }
  return out;
}

/// X + Lambda^{1/2} G with G i.i.d. standard normal drawn from a seeded mt19937_64.
inline ImageCube add_matrix_normal_noise(const ImageCube& x, const Matrix& cov, std::uint64_t seed) {
  if (cov.rows() != x.bands() || cov.cols() != x.bands()) {
    fail(ErrorKind::kShape, "noise covariance is " + dims_str(cov.rows(), cov.cols()) + " but cube has " +
                                std::to_string(x.bands()) + " bands");
  }
  require_spd(cov, "noise covariance");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  BandMatrix g(x.bands(), x.pixels());
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  BandMatrix noisy = x.data() + symmetric_sqrt(cov) * g;
  return with_data(x, std::move(noisy));
}

struct Observations {
  ImageCube left;   // Y_L: all pixels, few bands
  ImageCube right;  // Y_R: all bands, decimated
};

/// Independent stream seeds for the two sensors.
inline std::pair<std::uint64_t, std::uint64_t> noise_seeds(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x53594cu};
  std::uint64_t words[2];
  std::uint32_t raw[4];
  seq.generate(raw, raw + 4);
  words[0] = (static_cast<std::uint64_t>(raw[0]) << 32) | raw[1];
  words[1] = (static_cast<std::uint64_t>(raw[2]) << 32) | raw[3];
  return {words[0], words[1]};
}

/// Y_L = L X + N_L and Y_R = X B S + N_R.
inline Observations degrade(const ImageCube& x, const ObservationModel& model, std::uint64_t seed) {
  model.validate(x.rows(), x.cols());
  if (model.bands() != x.bands()) {
    fail(ErrorKind::kShape, "model expects " + std::to_string(model.bands()) + " bands, cube has " +
                                std::to_string(x.bands()));
  }
  const auto [seed_left, seed_right] = noise_seeds(seed);
  ImageCube left = apply_spectral_response(model.spectral_response, x);
  ImageCube right = decimate(circular_blur(model.blur_kernel, x), model.decim_rows, model.decim_cols,
                             model.phase_rows, model.phase_cols);
  return {add_matrix_normal_noise(left, model.noise_cov_left, seed_left),
          add_matrix_normal_noise(right, model.noise_cov_right, seed_right)};
}

/// Diagonal covariance whose per-entry variance gives each band the requested SNR:
/// variance_i = ||row_i||^2 / (pixels * base^(snr_i / 10)).
inline Matrix snr_to_variance(const ImageCube& clean, const std::vector<double>& snr_db,
                              double log_base = kSnrLogBase) {
  if (static_cast<Index>(snr_db.size()) != clean.bands()) {
    fail(ErrorKind::kShape, "got " + std::to_string(snr_db.size()) + " SNR values for " +
                                std::to_string(clean.bands()) + " bands");
  }
  Matrix cov = Matrix::Zero(clean.bands(), clean.bands());
  for (Index b = 0; b < clean.bands(); ++b) {
    const double energy = clean.data().row(b).squaredNorm();
    if (!(energy > 0.0) && std::isfinite(snr_db[b])) {
      fail(ErrorKind::kDegenerate, "band " + std::to_string(b) + " has zero energy; SNR is undefined");
    }
    cov(b, b) = energy / (static_cast<double>(clean.pixels()) * std::pow(log_base, snr_db[b] / 10.0));
  }
  return cov;
}

}  // namespace sylfuse
