#pragma once

// Synthetic reference scenes: a few smooth spectral signatures mixed by spatial abundance
// fields that combine low-frequency waves with piecewise-constant patches.

#include "sylfuse/core.hpp"
#include "sylfuse/model.hpp"

#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sylfuse {

struct SceneOptions {
  Index rows = 64;
  Index cols = 64;
  Index bands = 16;
  Index rank = 4;        // number of signatures
  Index waves = 6;       // cosine components per abundance field
  Index patches = 5;     // constant rectangles per abundance field
  double max_cycles = 6.0;
  std::uint64_t seed = 1;
};

/// X = M A with M (bands x rank) positive smooth spectra and A (rank x pixels) positive
/// abundances normalized to sum to one at every pixel.
inline ImageCube synthetic_scene(const SceneOptions& opt) {
  if (opt.rank < 1 || opt.bands < 1) fail(ErrorKind::kValidation, "scene needs at least one band and signature");
  constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix spectra(opt.bands, opt.rank);
  for (Index k = 0; k < opt.rank; ++k) {
    const double base = 0.1 + 0.3 * unit(rng);
    const double c1 = unit(rng), w1 = 0.1 + 0.3 * unit(rng), a1 = 0.2 + 0.6 * unit(rng);
    const double c2 = unit(rng), w2 = 0.1 + 0.3 * unit(rng), a2 = 0.2 + 0.6 * unit(rng);
    for (Index b = 0; b < opt.bands; ++b) {
      const double t = opt.bands > 1 ? static_cast<double>(b) / static_cast<double>(opt.bands - 1) : 0.5;
      spectra(b, k) = base + a1 * std::exp(-0.5 * std::pow((t - c1) / w1, 2)) +
                      a2 * std::exp(-0.5 * std::pow((t - c2) / w2, 2));
    }
  }

  Matrix abundance(opt.rank, opt.rows * opt.cols);
  for (Index k = 0; k < opt.rank; ++k) {
    std::vector<double> fr(opt.waves), fc(opt.waves), ph(opt.waves), amp(opt.waves);
    for (Index w = 0; w < opt.waves; ++w) {
      fr[w] = std::floor(opt.max_cycles * unit(rng) + 0.5);
      fc[w] = std::floor(opt.max_cycles * unit(rng) + 0.5);
      ph[w] = 2.0 * kPi * unit(rng);
      amp[w] = 1.0 / (1.0 + fr[w] + fc[w]);
    }
    struct Patch {
      Index r0, r1, c0, c1;
      double level;
    };
    std::vector<Patch> patches;
    for (Index p = 0; p < opt.patches; ++p) {
      const Index h = 1 + static_cast<Index>(unit(rng) * static_cast<double>(opt.rows) / 3.0);
      const Index w = 1 + static_cast<Index>(unit(rng) * static_cast<double>(opt.cols) / 3.0);
      const Index r0 = static_cast<Index>(unit(rng) * static_cast<double>(opt.rows - h + 1));
      const Index c0 = static_cast<Index>(unit(rng) * static_cast<double>(opt.cols - w + 1));
      patches.push_back({r0, r0 + h, c0, c0 + w, unit(rng)});
    }
    for (Index r = 0; r < opt.rows; ++r) {
      for (Index c = 0; c < opt.cols; ++c) {
        double v = 0.0;
        for (Index w = 0; w < opt.waves; ++w) {
          v += amp[w] * std::cos(2.0 * kPi * (fr[w] * static_cast<double>(r) / static_cast<double>(opt.rows) +
                                              fc[w] * static_cast<double>(c) / static_cast<double>(opt.cols)) +
                                 ph[w]);
        }
        for (const Patch& p : patches) {
          if (r >= p.r0 && r < p.r1 && c >= p.c0 && c < p.c1) v += p.level;
        }
        abundance(k, r * opt.cols + c) = std::exp(v);
      }
    }
  }
  for (Index i = 0; i < abundance.cols(); ++i) abundance.col(i) /= abundance.col(i).sum();

  return ImageCube(spectra * abundance, opt.rows, opt.cols);
}

/// Small random fusion problem with a known subspace and full noise covariances.
struct RandomProblem {
  ImageCube truth;  // H U
  ImageCube coefficients;
  ObservationModel model;
  Matrix basis;
  ImageCube left;
  ImageCube right;
};

struct ProblemShape {
  Index rows = 8;
  Index cols = 8;
  Index d_r = 2;
  Index d_c = 2;
  Index bands = 6;       // m_lambda
  Index left_bands = 3;  // n_lambda
  Index dim = 3;         // subspace dimension
  Index kernel = 3;
  Index phase_r = 0;
  Index phase_c = 0;
  double noise = 1e-2;
};

namespace detail {

inline Matrix random_spd(Index n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(n, n);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Matrix a = 0.3 * g * g.transpose() / static_cast<double>(n);
  a.diagonal().array() += 1.0;
  return scale * a;
}

}  // namespace detail

inline RandomProblem random_problem(const ProblemShape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomProblem p;

  Matrix g(shape.bands, shape.dim);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  p.basis = qr.householderQ() * Matrix::Identity(shape.bands, shape.dim);

  p.model.blur_kernel.resize(shape.kernel, shape.kernel);
  for (Index i = 0; i < p.model.blur_kernel.size(); ++i) p.model.blur_kernel.data()[i] = 0.2 + unit(rng);
  p.model.blur_kernel /= p.model.blur_kernel.sum();
  p.model.spectral_response.resize(shape.left_bands, shape.bands);
  for (Index i = 0; i < p.model.spectral_response.size(); ++i) p.model.spectral_response.data()[i] = unit(rng);
  p.model.decim_rows = shape.d_r;
  p.model.decim_cols = shape.d_c;
  p.model.phase_rows = shape.phase_r;
  p.model.phase_cols = shape.phase_c;
  p.model.noise_cov_left = detail::random_spd(shape.left_bands, shape.noise * shape.noise, rng);
  p.model.noise_cov_right = detail::random_spd(shape.bands, shape.noise * shape.noise, rng);

  BandMatrix u(shape.dim, shape.rows * shape.cols);
  for (Index i = 0; i < u.size(); ++i) u.data()[i] = normal(rng);
  p.coefficients = ImageCube(u, shape.rows, shape.cols);
  p.truth = ImageCube(p.basis * u, shape.rows, shape.cols);
  Observations obs = degrade(p.truth, p.model, rng());
  p.left = std::move(obs.left);
  p.right = std::move(obs.right);
  return p;
}

}  // namespace sylfuse
