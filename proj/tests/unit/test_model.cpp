#include "sylfuse/model.hpp"
#include "sylfuse/oracle.hpp"
#include "sylfuse/parallel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace sylfuse {
namespace {

ImageCube random_cube(Index bands, Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ImageCube x(bands, rows, cols);
  for (Index i = 0; i < x.data().size(); ++i) x.data().data()[i] = normal(rng);
  return x;
}

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kIo;
}

ObservationModel identity_model(Index bands, double eps) {
  ObservationModel m;
  m.spectral_response = Matrix::Identity(bands, bands);
  m.blur_kernel = Matrix::Ones(1, 1);
  m.noise_cov_left = eps * Matrix::Identity(bands, bands);
  m.noise_cov_right = eps * Matrix::Identity(bands, bands);
  return m;
}

// spectral response

TEST(SpectralResponse, IdentityLeavesCubeUnchanged) {
  const ImageCube x = random_cube(4, 3, 5, 1);
  EXPECT_EQ(apply_spectral_response(Matrix::Identity(4, 4), x).data(), x.data());
}

TEST(SpectralResponse, SummationRow) {
  const ImageCube x = random_cube(2, 2, 2, 2);
  const ImageCube y = apply_spectral_response(Matrix::Ones(1, 2), x);
  ASSERT_EQ(y.bands(), 1);
  EXPECT_LE((y.data().row(0) - (x.data().row(0) + x.data().row(1))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SpectralResponse, MatchesDenseProduct) {
  const Matrix l = random_matrix(2, 5, 3);
  const ImageCube x = random_cube(5, 4, 4, 4);
  const ImageCube y = apply_spectral_response(l, x);
  Matrix expected = Matrix::Zero(2, 16);
  for (Index i = 0; i < 2; ++i) {
    for (Index p = 0; p < 16; ++p) {
      for (Index k = 0; k < 5; ++k) expected(i, p) += l(i, k) * x.data()(k, p);
    }
  }
  EXPECT_LE(relative_error(Matrix(y.data()), expected), 1e-14);
}

TEST(SpectralResponse, DimensionMismatchNamesBoth) {
  try {
    apply_spectral_response(Matrix::Ones(2, 3), random_cube(4, 2, 2, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
    EXPECT_NE(std::string(e.what()).find('4'), std::string::npos);
  }
}

TEST(SpectralResponse, Linear) {
  const Matrix l = random_matrix(3, 4, 6);
  const ImageCube x = random_cube(4, 3, 3, 7);
  const ImageCube z = random_cube(4, 3, 3, 8);
  const ImageCube combo = with_data(x, 2.0 * x.data() - 0.5 * z.data());
  const BandMatrix lhs = apply_spectral_response(l, combo).data();
  const BandMatrix rhs =
      2.0 * apply_spectral_response(l, x).data() - 0.5 * apply_spectral_response(l, z).data();
  EXPECT_LE(relative_error(lhs, rhs), 1e-14);
}

// blur

TEST(CircularBlur, DeltaKernelIsIdentity) {
  const ImageCube x = random_cube(2, 4, 5, 9);
  EXPECT_EQ(circular_blur(Matrix::Ones(1, 1), x).data(), x.data());
}

TEST(CircularBlur, FullUniformKernelGivesBandMean) {
  const ImageCube x = random_cube(2, 4, 4, 10);
  const ImageCube y = circular_blur(Matrix::Constant(4, 4, 1.0 / 16.0), x);
  for (Index b = 0; b < 2; ++b) {
    const double mean = x.data().row(b).mean();
    EXPECT_LE((y.data().row(b).array() - mean).abs().maxCoeff(), 1e-14);
  }
}

TEST(CircularBlur, MatchesDenseCirculant) {
  const Matrix kernel = random_matrix(3, 3, 11);
  const ImageCube x = random_cube(1, 6, 6, 12);
  const auto ops = oracle::dense_operators(6, 6, 1, 1, kernel);
  const Matrix expected = Matrix(x.data()) * ops.b;
  EXPECT_LE(relative_error(Matrix(circular_blur(kernel, x).data()), expected), 1e-12);
}

TEST(CircularBlur, AdjointMatchesTranspose) {
  const Matrix kernel = random_matrix(3, 2, 13);
  const ImageCube x = random_cube(1, 5, 4, 14);
  const auto ops = oracle::dense_operators(5, 4, 1, 1, kernel);
  const Matrix expected = Matrix(x.data()) * ops.b.transpose();
  EXPECT_LE(relative_error(Matrix(circular_blur_adjoint(kernel, x, 1, 1).data()), expected), 1e-12);
}

TEST(CircularBlur, KernelsCommute) {
  const Matrix k1 = random_matrix(3, 3, 15);
  const Matrix k2 = random_matrix(5, 3, 16);
  const ImageCube x = random_cube(2, 8, 8, 17);
  const BandMatrix a = circular_blur(k1, circular_blur(k2, x)).data();
  const BandMatrix b = circular_blur(k2, circular_blur(k1, x)).data();
  EXPECT_LE(relative_error(a, b), 1e-12);
}

TEST(CircularBlur, KernelLargerThanImage) {
  EXPECT_EQ(kind_of([] { circular_blur(Matrix::Ones(5, 5), random_cube(1, 4, 4, 18)); }), ErrorKind::kShape);
}

// sampling

TEST(Decimate, UnitFactorIsIdentity) {
  const ImageCube x = random_cube(2, 3, 3, 19);
  EXPECT_EQ(decimate(x, 1, 1).data(), x.data());
}

TEST(Decimate, KeepsTopLeftOfEachBlock) {
  ImageCube x(1, 4, 4);
  for (Index i = 0; i < 16; ++i) x.data()(0, i) = static_cast<double>(i + 1);
  const ImageCube y = decimate(x, 2, 2);
  ASSERT_EQ(y.rows(), 2);
  ASSERT_EQ(y.cols(), 2);
  EXPECT_EQ(y.at(0, 0, 0), 1.0);
  EXPECT_EQ(y.at(0, 0, 1), 3.0);
  EXPECT_EQ(y.at(0, 1, 0), 9.0);
  EXPECT_EQ(y.at(0, 1, 1), 11.0);
}

TEST(Decimate, NonDivisibleIsShapeError) {
  EXPECT_EQ(kind_of([] { decimate(random_cube(1, 5, 4, 20), 2, 2); }), ErrorKind::kShape);
}

TEST(ZeroInterpolate, SingleBlock) {
  ImageCube y(1, 1, 1);
  y.at(0, 0, 0) = 5.0;
  const ImageCube x = zero_interpolate(y, 2, 2);
  EXPECT_EQ(x.at(0, 0, 0), 5.0);
  EXPECT_EQ(x.at(0, 0, 1), 0.0);
  EXPECT_EQ(x.at(0, 1, 0), 0.0);
  EXPECT_EQ(x.at(0, 1, 1), 0.0);
}

TEST(ZeroInterpolate, UnitFactorIsIdentity) {
  const ImageCube y = random_cube(2, 3, 4, 21);
  EXPECT_EQ(zero_interpolate(y, 1, 1).data(), y.data());
}

TEST(ZeroInterpolate, DecimateRecoversInput) {
  const ImageCube y = random_cube(3, 3, 5, 22);
  EXPECT_EQ(decimate(zero_interpolate(y, 2, 3), 2, 3).data(), y.data());
  EXPECT_EQ(decimate(zero_interpolate(y, 2, 3, 1, 2), 2, 3, 1, 2).data(), y.data());
}

TEST(ZeroInterpolate, MaskIdentity) {
  const ImageCube x = random_cube(2, 6, 4, 23);
  const ImageCube masked = zero_interpolate(decimate(x, 3, 2), 3, 2);
  for (Index r = 0; r < 6; ++r) {
    for (Index c = 0; c < 4; ++c) {
      const double m = (r % 3 == 0 && c % 2 == 0) ? 1.0 : 0.0;
      EXPECT_EQ(masked.at(1, r, c), m * x.at(1, r, c));
    }
  }
}

TEST(ZeroInterpolate, SamplingProjectorIsIdempotentAndSelfAdjoint) {
  const ImageCube x = random_cube(1, 4, 6, 24);
  const ImageCube z = random_cube(1, 4, 6, 25);
  auto proj = [](const ImageCube& v) { return zero_interpolate(decimate(v, 2, 3), 2, 3); };
  EXPECT_EQ(proj(proj(x)).data(), proj(x).data());
  EXPECT_NEAR(proj(x).data().cwiseProduct(z.data()).sum(), x.data().cwiseProduct(proj(z).data()).sum(), 1e-12);
}

TEST(ZeroInterpolate, MatchesDenseSamplingMatrix) {
  const auto ops = oracle::dense_operators(4, 6, 2, 3, Matrix::Ones(1, 1), 1, 2);
  const ImageCube x = random_cube(2, 4, 6, 26);
  EXPECT_LE(relative_error(Matrix(decimate(x, 2, 3, 1, 2).data()), Matrix(x.data()) * ops.s), 1e-15);
  EXPECT_DOUBLE_EQ((ops.s.transpose() * ops.s - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PhaseAbsorption, ShiftedAnchorEqualsPhasedSampling) {
  ObservationModel m;
  m.blur_kernel = random_matrix(3, 3, 27);
  m.decim_rows = 2;
  m.decim_cols = 4;
  m.phase_rows = 1;
  m.phase_cols = 3;
  const ImageCube x = random_cube(2, 8, 8, 28);
  const ImageCube phased = decimate(circular_blur(m.blur_kernel, x), 2, 4, 1, 3);
  const ImageCube shifted = decimate(circular_blur(m.blur_kernel, x, m.anchor_rows(), m.anchor_cols()), 2, 4);
  EXPECT_LE(relative_error(phased.data(), shifted.data()), 1e-14);
}

// noise

TEST(Noise, ZeroCovarianceRejected) {
  EXPECT_EQ(kind_of([] { add_matrix_normal_noise(random_cube(2, 2, 2, 29), Matrix::Zero(2, 2), 1); }),
            ErrorKind::kDefiniteness);
}

TEST(Noise, EmpiricalVariance) {
  const double sigma2 = 0.25;
  const ImageCube zero(2, 250, 400);
  const ImageCube y = add_matrix_normal_noise(zero, sigma2 * Matrix::Identity(2, 2), 30);
  for (Index b = 0; b < 2; ++b) {
    const double var = y.data().row(b).squaredNorm() / static_cast<double>(y.pixels());
    EXPECT_NEAR(var, sigma2, 0.05 * sigma2);
  }
}

TEST(Noise, SameSeedIsIdentical) {
  const ImageCube x = random_cube(3, 4, 4, 31);
  Matrix cov = Matrix::Identity(3, 3);
  cov(0, 1) = cov(1, 0) = 0.3;
  EXPECT_EQ(add_matrix_normal_noise(x, cov, 9).data(), add_matrix_normal_noise(x, cov, 9).data());
  EXPECT_NE(add_matrix_normal_noise(x, cov, 9).data(), add_matrix_normal_noise(x, cov, 10).data());
}

TEST(Noise, ParallelDegradeIsBitwiseIdentical) {
  ObservationModel m = identity_model(4, 1e-2);
  m.blur_kernel = random_matrix(3, 3, 32);
  m.decim_rows = m.decim_cols = 2;
  const ImageCube x = random_cube(4, 16, 16, 33);
  set_thread_count(1);
  const Observations a = degrade(x, m, 5);
  set_thread_count(4);
  const Observations b = degrade(x, m, 5);
  set_thread_count(1);
  EXPECT_EQ(a.left.data(), b.left.data());
  EXPECT_EQ(a.right.data(), b.right.data());
}

// degrade

TEST(Degrade, IdentityModelReproducesInput) {
  const ImageCube x = random_cube(3, 4, 4, 34);
  const Observations obs = degrade(x, identity_model(3, 1e-30), 1);
  EXPECT_LE(relative_error(obs.left.data(), x.data()), 1e-10);
  EXPECT_LE(relative_error(obs.right.data(), x.data()), 1e-10);
}

TEST(Degrade, ProtocolShape) {
  ObservationModel m = identity_model(2, 1e-4);
  m.blur_kernel = Matrix::Constant(5, 5, 1.0 / 25.0);
  m.decim_rows = m.decim_cols = 4;
  const Observations obs = degrade(random_cube(2, 256, 128, 35), m, 1);
  EXPECT_EQ(obs.right.rows(), 64);
  EXPECT_EQ(obs.right.cols(), 32);
  EXPECT_EQ(obs.left.rows(), 256);
}

TEST(Degrade, EqualsComposition) {
  ObservationModel m = identity_model(3, 1e-2);
  m.spectral_response = random_matrix(2, 3, 36);
  m.noise_cov_left = 1e-2 * Matrix::Identity(2, 2);
  m.blur_kernel = random_matrix(3, 3, 37);
  m.decim_rows = 2;
  m.decim_cols = 1;
  m.phase_rows = 1;
  const ImageCube x = random_cube(3, 6, 4, 38);
  const Observations obs = degrade(x, m, 77);
  const auto [sl, sr] = noise_seeds(77);
  const ImageCube left = add_matrix_normal_noise(apply_spectral_response(m.spectral_response, x), m.noise_cov_left, sl);
  const ImageCube right =
      add_matrix_normal_noise(decimate(circular_blur(m.blur_kernel, x), 2, 1, 1, 0), m.noise_cov_right, sr);
  EXPECT_EQ(obs.left.data(), left.data());
  EXPECT_EQ(obs.right.data(), right.data());
}

TEST(Degrade, NoiseStreamsAreIndependent) {
  const auto [a, b] = noise_seeds(3);
  EXPECT_NE(a, b);
}

TEST(ModelValidate, RejectsNonDivisibleGrid) {
  ObservationModel m = identity_model(2, 1.0);
  m.decim_rows = 3;
  EXPECT_EQ(kind_of([&] { m.validate(8, 8); }), ErrorKind::kShape);
}

TEST(ModelValidate, RejectsIndefiniteCovariance) {
  ObservationModel m = identity_model(2, 1.0);
  m.noise_cov_right(1, 1) = -1.0;
  EXPECT_EQ(kind_of([&] { m.validate(4, 4); }), ErrorKind::kDefiniteness);
}

TEST(ModelValidate, RejectsPhaseOutsideBlock) {
  ObservationModel m = identity_model(2, 1.0);
  m.decim_rows = 2;
  m.phase_rows = 2;
  EXPECT_EQ(kind_of([&] { m.validate(4, 4); }), ErrorKind::kValidation);
}

// SNR

TEST(SnrToVariance, ZeroDbUnitPower) {
  ImageCube x(1, 4, 4);
  x.data().setOnes();
  EXPECT_DOUBLE_EQ(snr_to_variance(x, {0.0})(0, 0), 1.0);
}

TEST(SnrToVariance, TenDbIsTenthOfPower) {
  ImageCube x(1, 4, 4);
  x.data().setConstant(3.0);
  EXPECT_NEAR(snr_to_variance(x, {10.0})(0, 0), 0.9, 1e-15);
}

TEST(SnrToVariance, ZeroEnergyBandIsDegenerate) {
  ImageCube x(2, 2, 2);
  x.data().row(0).setOnes();
  EXPECT_EQ(kind_of([&] { snr_to_variance(x, {30.0, 30.0}); }), ErrorKind::kDegenerate);
}

TEST(SnrToVariance, RoundTripWithinTolerance) {
  const ImageCube x = random_cube(1, 64, 64, 39);
  const Matrix cov = snr_to_variance(x, {25.0});
  const ImageCube noisy = add_matrix_normal_noise(x, cov, 40);
  const double noise = (noisy.data() - x.data()).squaredNorm();
  const double snr = 10.0 * std::log10(x.data().squaredNorm() / noise);
  EXPECT_NEAR(snr, 25.0, 0.2);
}

TEST(SnrToVariance, LengthMismatch) {
  EXPECT_EQ(kind_of([] { snr_to_variance(random_cube(2, 2, 2, 41), {30.0}); }), ErrorKind::kShape);
}

}  // namespace
}  // namespace sylfuse
