#pragma once

// Fusion quality measures: RSNR, SAM, UIQI, ERGAS and DD.

#include "sylfuse/core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>

namespace sylfuse {

inline constexpr Index kUiqiWindow = 32;

struct MetricReport {
  double rsnr_db = 0.0;  // +inf when the estimate equals the reference
  double sam_deg = 0.0;
  double uiqi = 0.0;
  double ergas = 0.0;
  double dd = 0.0;
  Index ergas_skipped_bands = 0;  // bands with zero reference mean
  Index sam_skipped_pixels = 0;   // pixels with a zero-norm spectrum
};

/// 10 log10(||X||^2 / ||X - X_hat||^2).
inline double rsnr_db(const ImageCube& reference, const ImageCube& estimate) {
  const double err = (reference.data() - estimate.data()).squaredNorm();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(reference.data().squaredNorm() / err);
}

/// Mean spectral angle in degrees; pixels where either spectrum has zero norm are skipped.
inline double spectral_angle_deg(const ImageCube& reference, const ImageCube& estimate, Index* skipped = nullptr) {
  double sum = 0.0;
  Index count = 0;
  Index skip = 0;
  for (Index i = 0; i < reference.pixels(); ++i) {
    const auto x = reference.data().col(i);
    const auto y = estimate.data().col(i);
    const double nx = x.norm();
    const double ny = y.norm();
    if (nx == 0.0 || ny == 0.0) {
      ++skip;
      continue;
    }
    // Half-angle form stays accurate near 0 and pi.
    const Vector ux = x / nx;
    const Vector uy = y / ny;
    sum += 2.0 * std::atan2((ux - uy).norm(), (ux + uy).norm());
    ++count;
  }
  if (skipped != nullptr) *skipped = skip;
  if (count == 0) return 0.0;
  constexpr double kDeg = 180.0 / 3.14159265358979323846;
  return kDeg * sum / static_cast<double>(count);
}

namespace detail {

// Universal quality index of two equally sized samples.
inline double quality_index(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
  const double n = static_cast<double>(x.size());
  const double mx = x.mean();
  const double my = y.mean();
  const double vx = (x - mx).square().sum() / std::max(n - 1.0, 1.0);
  const double vy = (y - my).square().sum() / std::max(n - 1.0, 1.0);
  const double cxy = ((x - mx) * (y - my)).sum() / std::max(n - 1.0, 1.0);
  const double means = mx * mx + my * my;
  const double vars = vx + vy;
  if (means == 0.0 && vars == 0.0) return 1.0;
  if (vars == 0.0) return 2.0 * mx * my / means;
  if (means == 0.0) return 2.0 * cxy / vars;
  return 4.0 * cxy * mx * my / (vars * means);
}

}  // namespace detail

/// Mean over bands and non-overlapping windows (32x32, stride 32, clipped to the image size).
inline double uiqi(const ImageCube& reference, const ImageCube& estimate, Index window = kUiqiWindow) {
  const Index wr = std::min(window, reference.rows());
  const Index wc = std::min(window, reference.cols());
  double sum = 0.0;
  Index count = 0;
  Eigen::ArrayXd x(wr * wc), y(wr * wc);
  for (Index b = 0; b < reference.bands(); ++b) {
    for (Index r0 = 0; r0 + wr <= reference.rows(); r0 += wr) {
      for (Index c0 = 0; c0 + wc <= reference.cols(); c0 += wc) {
        Index k = 0;
        for (Index r = r0; r < r0 + wr; ++r) {
          for (Index c = c0; c < c0 + wc; ++c, ++k) {
            x(k) = reference.at(b, r, c);
            y(k) = estimate.at(b, r, c);
          }
        }
        sum += detail::quality_index(x, y);
        ++count;
      }
    }
  }
  return sum / static_cast<double>(count);
}

/// 100 / sqrt(d) * sqrt(mean_i (RMSE_i / mean_i)^2); bands with zero reference mean are skipped.
inline double ergas(const ImageCube& reference, const ImageCube& estimate, double decimation,
                    Index* skipped = nullptr) {
  if (!(decimation > 0.0)) fail(ErrorKind::kValidation, "ERGAS decimation factor must be positive");
  double sum = 0.0;
  Index used = 0;
  Index skip = 0;
  const double n = static_cast<double>(reference.pixels());
  for (Index b = 0; b < reference.bands(); ++b) {
    const double mean = reference.data().row(b).sum() / n;
    if (mean == 0.0) {
      ++skip;
      continue;
    }
    const double mse = (reference.data().row(b) - estimate.data().row(b)).squaredNorm() / n;
    sum += mse / (mean * mean);
    ++used;
  }
  if (skipped != nullptr) *skipped = skip;
  if (used == 0) return 0.0;
  return 100.0 / std::sqrt(decimation) * std::sqrt(sum / static_cast<double>(used));
}

/// Mean absolute error.
inline double degree_of_distortion(const ImageCube& reference, const ImageCube& estimate) {
  return (reference.data() - estimate.data()).cwiseAbs().sum() / static_cast<double>(reference.data().size());
}

/// All five metrics; `decimation` is the total factor d = d_r d_c used by ERGAS.
inline MetricReport evaluate(const ImageCube& reference, const ImageCube& estimate, double decimation = 1.0) {
  if (!reference.same_shape(estimate)) {
    fail(ErrorKind::kShape, "reference is " + reference.shape_str() + " but estimate is " + estimate.shape_str());
  }
  MetricReport m;
  m.rsnr_db = rsnr_db(reference, estimate);
  m.sam_deg = spectral_angle_deg(reference, estimate, &m.sam_skipped_pixels);
  m.uiqi = uiqi(reference, estimate);
  m.ergas = ergas(reference, estimate, decimation, &m.ergas_skipped_bands);
  m.dd = degree_of_distortion(reference, estimate);
  return m;
}

namespace detail {

inline std::string fixed3(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace detail

/// Two-line table with columns RSNR UIQI SAM ERGAS DD Time, fixed 3 decimals.
inline std::string format_table(const MetricReport& m, std::optional<double> seconds = std::nullopt) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%10s %10s %10s %10s %10s %10s\n", "RSNR", "UIQI", "SAM", "ERGAS", "DD", "Time");
  out += buf;
  const std::string time = seconds ? detail::fixed3(*seconds) : "-";
  std::snprintf(buf, sizeof buf, "%10s %10s %10s %10s %10s %10s\n", detail::fixed3(m.rsnr_db).c_str(),
                detail::fixed3(m.uiqi).c_str(), detail::fixed3(m.sam_deg).c_str(), detail::fixed3(m.ergas).c_str(),
                detail::fixed3(m.dd).c_str(), time.c_str());
  out += buf;
  return out;
}

/// Flat key-value form, one "key value" pair per line.
inline std::string format_key_value(const MetricReport& m) {
  std::string out;
  out += "rsnr_db " + detail::fixed3(m.rsnr_db) + "\n";
  out += "uiqi " + detail::fixed3(m.uiqi) + "\n";
  out += "sam_deg " + detail::fixed3(m.sam_deg) + "\n";
  out += "ergas " + detail::fixed3(m.ergas) + "\n";
  out += "dd " + detail::fixed3(m.dd) + "\n";
  return out;
}

/// JSON object; an infinite RSNR is written as the string "inf".
inline nlohmann::json to_json(const MetricReport& m) {
  nlohmann::json j;
  if (std::isinf(m.rsnr_db)) {
    j["rsnr_db"] = "inf";
  } else {
    j["rsnr_db"] = m.rsnr_db;
  }
  j["uiqi"] = m.uiqi;
  j["sam_deg"] = m.sam_deg;
  j["ergas"] = m.ergas;
  j["dd"] = m.dd;
  j["ergas_skipped_bands"] = m.ergas_skipped_bands;
  j["sam_skipped_pixels"] = m.sam_skipped_pixels;
  return j;
}

}  // namespace sylfuse
