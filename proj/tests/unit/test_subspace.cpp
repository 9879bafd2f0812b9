#include "sylfuse/subspace.hpp"

#include <gtest/gtest.h>

#include <Eigen/QR>

#include <random>

namespace sylfuse {
namespace {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Matrix random_orthonormal(Index rows, Index cols, std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rows, cols, seed));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

TEST(Subspace, OrthonormalColumns) {
  const ImageCube y(random_matrix(8, 30, 1), 5, 6);
  const SubspaceBasis h = estimate_subspace(y, 4);
  EXPECT_EQ(h.dim(), 4);
  EXPECT_LE((h.basis.transpose() * h.basis - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Subspace, FullRankSpansData) {
  const Matrix rows = random_orthonormal(12, 4, 2).transpose();  // 4 orthonormal rows
  const ImageCube y(rows, 3, 4);
  const SubspaceBasis h = estimate_subspace(y, 4);
  EXPECT_LE((h.basis * h.basis.transpose() * Matrix(y.data()) - Matrix(y.data())).norm(), 1e-10);
}

TEST(Subspace, RecoversRankThreeMixture) {
  const Matrix spectra = random_matrix(10, 3, 3);
  const Matrix abundance = random_matrix(3, 64, 4);
  const ImageCube y(spectra * abundance, 8, 8);
  const SubspaceBasis h = estimate_subspace(y, 3);
  EXPECT_LE((h.basis * h.basis.transpose() * Matrix(y.data()) - Matrix(y.data())).norm(), 1e-10);
  EXPECT_FALSE(h.rank_deficient);
}

TEST(Subspace, ConstantSpectrumGivesNormalizedSpectrum) {
  Vector s(5);
  s << 1.0, -2.0, 3.0, 0.5, 4.0;
  const Matrix data = s * Vector::Constant(9, 2.0).transpose();
  const SubspaceBasis h = estimate_subspace(ImageCube(data, 3, 3), 1);
  const Vector expected = s.normalized();
  EXPECT_LE(std::min((h.basis.col(0) - expected).norm(), (h.basis.col(0) + expected).norm()), 1e-12);
}

TEST(Subspace, SignConventionFirstEntryPositive) {
  const SubspaceBasis h = estimate_subspace(ImageCube(random_matrix(6, 20, 5), 4, 5), 3);
  for (Index j = 0; j < 3; ++j) {
    Index i = 0;
    while (std::abs(h.basis(i, j)) < 1e-12) ++i;
    EXPECT_GT(h.basis(i, j), 0.0);
  }
}

TEST(Subspace, Deterministic) {
  const ImageCube y(random_matrix(6, 20, 6), 4, 5);
  EXPECT_EQ(estimate_subspace(y, 3).basis, estimate_subspace(y, 3).basis);
}

TEST(Subspace, RankDeficiencyFlaggedAndPadded) {
  const ImageCube y(random_matrix(6, 2, 7) * random_matrix(2, 16, 8), 4, 4);
  const SubspaceBasis h = estimate_subspace(y, 4);
  EXPECT_TRUE(h.rank_deficient);
  EXPECT_EQ(h.dim(), 4);
  EXPECT_LE((h.basis.transpose() * h.basis - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Subspace, DimOutOfRangeRejected) {
  const ImageCube y(random_matrix(3, 4, 9), 2, 2);
  EXPECT_THROW(estimate_subspace(y, 0), Error);
  EXPECT_THROW(estimate_subspace(y, 4), Error);
}

TEST(Subspace, CenteredVariantIgnoresMean) {
  const Matrix spectra = random_matrix(6, 2, 10);
  Matrix data = spectra * random_matrix(2, 25, 11);
  const Vector offset = random_matrix(6, 1, 12);
  data.colwise() += offset;
  const SubspaceBasis centered = estimate_subspace(ImageCube(data, 5, 5), 2, true);
  Matrix demeaned = data;
  demeaned.colwise() -= data.rowwise().mean();
  EXPECT_LE((centered.basis * centered.basis.transpose() * demeaned - demeaned).norm(), 1e-10);
}

TEST(ProjectLift, ProjectOfLiftIsIdentity) {
  const Matrix h = random_orthonormal(7, 3, 13);
  const ImageCube u(random_matrix(3, 12, 14), 3, 4);
  EXPECT_LE(relative_error(project(h, lift(h, u)).data(), u.data()), 1e-14);
}

TEST(ProjectLift, InSpanIsFixed) {
  const Matrix h = random_orthonormal(7, 3, 15);
  const ImageCube x(h * random_matrix(3, 12, 16), 3, 4);
  EXPECT_LE((lift(h, project(h, x)).data() - x.data()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProjectLift, ProjectionContracts) {
  const Matrix h = random_orthonormal(7, 3, 17);
  const ImageCube x(random_matrix(7, 12, 18), 3, 4);
  EXPECT_LE(lift(h, project(h, x)).data().norm(), x.data().norm());
}

TEST(ProjectLift, DimensionMismatch) {
  const Matrix h = random_orthonormal(7, 3, 19);
  EXPECT_THROW(project(h, ImageCube(random_matrix(6, 4, 20), 2, 2)), Error);
  EXPECT_THROW(lift(h, ImageCube(random_matrix(4, 4, 21), 2, 2)), Error);
}

}  // namespace
}  // namespace sylfuse
