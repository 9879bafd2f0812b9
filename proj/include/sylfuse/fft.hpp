#pragma once

#include "sylfuse/core.hpp"
#include "sylfuse/parallel.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace sylfuse {

namespace detail {

// The FFTW planner is not thread-safe; execution of an existing plan on new arrays is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(Index rows, Index cols, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(rows, cols, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> in(static_cast<std::size_t>(rows * cols));
    std::vector<Complex> out(in.size());
    // UNALIGNED keeps the codelet choice independent of allocation alignment,
    // which makes results bitwise reproducible across runs.
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols),
                                      reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) fail(ErrorKind::kValidation, "fftw: could not create plan for " + dims_str(rows, cols));
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<Index, Index, int>, fftw_plan> plans_;
};

}  // namespace detail

struct FftStats {
  long forward_batches = 0;
  long inverse_batches = 0;
  long transforms = 0;  // single-band 2-D transforms
};

/// Unitary 2-D DFT applied band-by-band to (bands x pixels) matrices.
///
/// Each pixel row is read as an (rows x cols) row-major image. forward() computes x F and
/// inverse() computes x F^H, where F = F_rows (x) F_cols is the symmetric unitary DFT matrix,
/// so F F^H = I holds exactly in exact arithmetic. One call is one "batch" in the stats.
class FftEngine {
 public:
  FftEngine(Index rows, Index cols) : rows_(rows), cols_(cols) {
    if (rows <= 0 || cols <= 0) fail(ErrorKind::kShape, "FftEngine: bad grid " + dims_str(rows, cols));
    forward_plan_ = detail::PlanCache::instance().get(rows, cols, FFTW_FORWARD);
    inverse_plan_ = detail::PlanCache::instance().get(rows, cols, FFTW_BACKWARD);
    scale_ = 1.0 / std::sqrt(static_cast<double>(rows * cols));
  }

  [[nodiscard]] Index rows() const noexcept { return rows_; }
  [[nodiscard]] Index cols() const noexcept { return cols_; }
  [[nodiscard]] Index pixels() const noexcept { return rows_ * cols_; }
  [[nodiscard]] const FftStats& stats() const noexcept { return stats_; }
  void reset_stats() noexcept { stats_ = {}; }

  [[nodiscard]] ComplexBandMatrix forward(const BandMatrix& x) {
    ++stats_.forward_batches;
    return run(x.cast<Complex>(), forward_plan_);
  }
  [[nodiscard]] ComplexBandMatrix forward(const ComplexBandMatrix& x) {
    ++stats_.forward_batches;
    return run(x, forward_plan_);
  }
  [[nodiscard]] ComplexBandMatrix inverse(const ComplexBandMatrix& x) {
    ++stats_.inverse_batches;
    return run(x, inverse_plan_);
  }
  /// Inverse transform keeping the real part; the caller asserts Hermitian symmetry.
  [[nodiscard]] BandMatrix inverse_real(const ComplexBandMatrix& x) { return inverse(x).real(); }

 private:
  ComplexBandMatrix run(const ComplexBandMatrix& x, fftw_plan plan) {
    if (x.cols() != pixels()) {
      fail(ErrorKind::kShape, "FftEngine: expected " + std::to_string(pixels()) + " pixels, got " +
                                  std::to_string(x.cols()));
    }
    ComplexBandMatrix out(x.rows(), x.cols());
    const Index n = pixels();
    const double scale = scale_;
    parallel_for(static_cast<long>(x.rows()), [&](long band) {
      auto* src = const_cast<Complex*>(x.data() + band * n);
      Complex* dst = out.data() + band * n;
      fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(src), reinterpret_cast<fftw_complex*>(dst));
      for (Index i = 0; i < n; ++i) dst[i] *= scale;
    });
    stats_.transforms += x.rows();
    return out;
  }

  Index rows_;
  Index cols_;
  double scale_;
  fftw_plan forward_plan_;
  fftw_plan inverse_plan_;
  FftStats stats_;
};

}  // namespace sylfuse
