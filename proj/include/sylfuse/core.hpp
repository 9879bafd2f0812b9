#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace sylfuse {

using Index = Eigen::Index;
using Complex = std::complex<double>;

// Band-major storage: one row per band, pixels contiguous within a row.
using BandMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexBandMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;

enum class ErrorKind {
  kShape,            // dimension mismatch, non-divisible grid
  kDefiniteness,     // matrix expected SPD/PD is not
  kSingularSystem,   // Sylvester system has no unique solution
  kIllConditioned,   // blur spectrum has (near) zeros and tau == 0
  kDegenerate,       // zero-energy band and similar data problems
  kSizeGuard,        // dense oracle asked to run too large
  kValidation,       // bad configuration or input values
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline std::string dims_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

/// Multi-band image stored as a (bands x pixels) matrix.
///
/// Pixel column i corresponds to spatial location (r, c) with i = r * cols + c.
/// Every operator in the library relies on this row-major flattening.
class ImageCube {
 public:
  ImageCube() = default;

  ImageCube(Index bands, Index rows, Index cols)
      : data_(BandMatrix::Zero(bands, rows * cols)), rows_(rows), cols_(cols) {
    check_dims();
  }

  ImageCube(BandMatrix data, Index rows, Index cols)
      : data_(std::move(data)), rows_(rows), cols_(cols) {
    check_dims();
  }

  [[nodiscard]] Index bands() const noexcept { return data_.rows(); }
  [[nodiscard]] Index rows() const noexcept { return rows_; }
  [[nodiscard]] Index cols() const noexcept { return cols_; }
  [[nodiscard]] Index pixels() const noexcept { return rows_ * cols_; }

  [[nodiscard]] const BandMatrix& data() const noexcept { return data_; }
  [[nodiscard]] BandMatrix& data() noexcept { return data_; }

  [[nodiscard]] double& at(Index band, Index r, Index c) { return data_(band, r * cols_ + c); }
  [[nodiscard]] double at(Index band, Index r, Index c) const { return data_(band, r * cols_ + c); }

  [[nodiscard]] bool same_shape(const ImageCube& other) const noexcept {
    return bands() == other.bands() && rows_ == other.rows_ && cols_ == other.cols_;
  }

  [[nodiscard]] std::string shape_str() const {
    return std::to_string(bands()) + " bands x " + std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  void check_dims() const {
    if (rows_ <= 0 || cols_ <= 0) {
      fail(ErrorKind::kShape, "ImageCube: spatial dims must be positive, got " + dims_str(rows_, cols_));
    }
    if (data_.cols() != rows_ * cols_) {
      fail(ErrorKind::kShape, "ImageCube: data has " + std::to_string(data_.cols()) +
                                  " pixel columns but spatial dims are " + dims_str(rows_, cols_));
    }
  }

  BandMatrix data_;
  Index rows_ = 1;
  Index cols_ = 1;
};

/// Same spatial grid, new band content.
inline ImageCube with_data(const ImageCube& like, BandMatrix data) {
  return ImageCube(std::move(data), like.rows(), like.cols());
}

/// Relative Frobenius distance ||a - b|| / ||b||; returns ||a|| when b == 0.
template <typename A, typename B>
double relative_error(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double denom = b.norm();
  const double diff = (a - b).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace sylfuse
