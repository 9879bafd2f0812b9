#pragma once

// Iterative estimators built on the closed-form Sylvester solve: SE-ADMM for
// non-Gaussian priors (image and frequency domain) and SE-BCD for hierarchical priors.

#include "sylfuse/core.hpp"
#include "sylfuse/fft.hpp"
#include "sylfuse/model.hpp"
#include "sylfuse/subspace.hpp"
#include "sylfuse/sylvester.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sylfuse {

// ---------------------------------------------------------------------------
// Proximity operators

/// sign(g) max(|g| - step, 0), elementwise.
inline ImageCube prox_soft_threshold(const ImageCube& point, double step) {
  if (step < 0.0) fail(ErrorKind::kValidation, "soft threshold step must be non-negative");
  BandMatrix out = point.data().unaryExpr([step](double g) {
    const double mag = std::abs(g) - step;
    return mag > 0.0 ? std::copysign(mag, g) : 0.0;
  });
  return with_data(point, std::move(out));
}

namespace detail {

// Forward differences with Neumann boundary (zero difference past the last row/column).
inline void gradient(const double* u, Index rows, Index cols, double* gx, double* gy) {
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index i = r * cols + c;
      gx[i] = c + 1 < cols ? u[i + 1] - u[i] : 0.0;
      gy[i] = r + 1 < rows ? u[i + cols] - u[i] : 0.0;
    }
  }
}

// Negative adjoint of gradient().
inline void divergence(const double* px, const double* py, Index rows, Index cols, double* out) {
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index i = r * cols + c;
      double v = 0.0;
      if (c + 1 < cols) v += px[i];
      if (c > 0) v -= px[i - 1];
      if (r + 1 < rows) v += py[i];
      if (r > 0) v -= py[i - cols];
      out[i] = v;
    }
  }
}

}  // namespace detail

/// Isotropic total variation summed over bands.
inline double total_variation(const ImageCube& x) {
  const Index n = x.pixels();
  std::vector<double> gx(static_cast<std::size_t>(n)), gy(gx.size());
  double tv = 0.0;
  for (Index b = 0; b < x.bands(); ++b) {
    detail::gradient(x.data().data() + b * n, x.rows(), x.cols(), gx.data(), gy.data());
    for (Index i = 0; i < n; ++i) tv += std::hypot(gx[i], gy[i]);
  }
  return tv;
}

/// Dual field of the TV prox (one row per band), kept between calls to warm-start it.
struct TvDual {
  BandMatrix px;
  BandMatrix py;
};

/// argmin_x 1/2 ||x - point||^2 + weight * TV(x), per band, approximated by
/// `inner_iters` accelerated projected-gradient steps (step 1/8) on the dual.
/// A non-null `warm` of matching shape seeds the dual and receives the final one.
inline ImageCube prox_tv(const ImageCube& point, double weight, int inner_iters = 20, TvDual* warm = nullptr) {
  if (weight < 0.0) fail(ErrorKind::kValidation, "TV weight must be non-negative");
  if (inner_iters < 1) fail(ErrorKind::kValidation, "TV prox needs at least one inner iteration");
  if (weight == 0.0) return point;
  const Index rows = point.rows();
  const Index cols = point.cols();
  const Index n = point.pixels();
  constexpr double kStep = 1.0 / 8.0;
  BandMatrix out(point.bands(), n);
  const bool seeded = warm != nullptr && warm->px.rows() == point.bands() && warm->px.cols() == n;
  if (warm != nullptr && !seeded) {
    warm->px = BandMatrix::Zero(point.bands(), n);
    warm->py = BandMatrix::Zero(point.bands(), n);
  }
  parallel_for(static_cast<long>(point.bands()), [&](long band) {
    const double* f = point.data().data() + band * n;
    // p: dual iterate, r: extrapolated point.
    std::vector<double> px(static_cast<std::size_t>(n), 0.0), py(px), rx(px), ry(px), div(px), gx(px), gy(px);
    if (seeded) {
      for (Index i = 0; i < n; ++i) {
        px[i] = rx[i] = warm->px(band, i);
        py[i] = ry[i] = warm->py(band, i);
      }
    }
    double t = 1.0;
    for (int it = 0; it < inner_iters; ++it) {
      detail::divergence(rx.data(), ry.data(), rows, cols, div.data());
      for (Index i = 0; i < n; ++i) div[i] -= f[i] / weight;
      detail::gradient(div.data(), rows, cols, gx.data(), gy.data());
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double momentum = (t - 1.0) / t_next;
      for (Index i = 0; i < n; ++i) {
        const double qx = rx[i] + kStep * gx[i];
        const double qy = ry[i] + kStep * gy[i];
        const double norm = std::max(1.0, std::hypot(qx, qy));
        const double nx = qx / norm;
        const double ny = qy / norm;
        rx[i] = nx + momentum * (nx - px[i]);
        ry[i] = ny + momentum * (ny - py[i]);
        px[i] = nx;
        py[i] = ny;
      }
      t = t_next;
    }
    if (warm != nullptr) {
      for (Index i = 0; i < n; ++i) {
        warm->px(band, i) = px[i];
        warm->py(band, i) = py[i];
      }
    }
    detail::divergence(px.data(), py.data(), rows, cols, div.data());
    double* x = out.data() + band * n;
    for (Index i = 0; i < n; ++i) x[i] = f[i] - weight * div[i];
  });
  return with_data(point, std::move(out));
}

/// A penalty phi together with its proximity operator argmin_v phi(v) + 1/(2 step) ||v - z||^2.
struct ProxOperator {
  std::string name;
  std::function<ImageCube(const ImageCube& point, double step)> prox;
  std::function<double(const ImageCube& point)> penalty;
  std::function<void()> reset;  // clears warm-start state; may be empty
};

inline ProxOperator prox_none() {
  return {"none", [](const ImageCube& z, double) { return z; }, [](const ImageCube&) { return 0.0; }, {}};
}

inline ProxOperator prox_l1(double weight) {
  return {"l1", [weight](const ImageCube& z, double step) { return prox_soft_threshold(z, weight * step); },
          [weight](const ImageCube& v) { return weight * v.data().cwiseAbs().sum(); }, {}};
}

/// The dual is warm-started from the previous call, so repeated calls inside one
/// ADMM run refine it; each ProxOperator copy shares that state.
inline ProxOperator prox_total_variation(double weight, int inner_iters = 20) {
  auto dual = std::make_shared<TvDual>();
  return {"tv",
          [weight, inner_iters, dual](const ImageCube& z, double step) {
            return prox_tv(z, weight * step, inner_iters, dual.get());
          },
          [weight](const ImageCube& v) { return weight * total_variation(v); },
          [dual] { *dual = TvDual{}; }};
}

/// Registry used by the CLI: "none", "l1", "tv".
inline ProxOperator make_prox(const std::string& name, double weight, int tv_inner_iters = 20) {
  if (name == "none") return prox_none();
  if (name == "l1") return prox_l1(weight);
  if (name == "tv") return prox_total_variation(weight, tv_inner_iters);
  fail(ErrorKind::kValidation, "unknown prior '" + name + "' (expected none, l1 or tv)");
}

// ---------------------------------------------------------------------------
// Objective

/// Data term f(U) = 1/2 tr(E_R^T R^{-1} E_R) + 1/2 tr(E_L^T L^{-1} E_L).
inline double data_objective(const ImageCube& u, const ImageCube& left, const ImageCube& right,
                             const ObservationModel& model, const Matrix& basis) {
  const ImageCube blurred = circular_blur(model.blur_kernel, u, model.anchor_rows(), model.anchor_cols());
  const ImageCube sampled = decimate(blurred, model.decim_rows, model.decim_cols);
  const BandMatrix er = right.data() - basis * sampled.data();
  const BandMatrix el = left.data() - model.spectral_response * basis * u.data();
  const BandMatrix wr = model.noise_cov_right.llt().solve(Matrix(er));
  const BandMatrix wl = model.noise_cov_left.llt().solve(Matrix(el));
  return 0.5 * er.cwiseProduct(wr).sum() + 0.5 * el.cwiseProduct(wl).sum();
}

/// f(U) + phi(U).
inline double objective(const ImageCube& u, const ImageCube& left, const ImageCube& right,
                        const ObservationModel& model, const Matrix& basis, const ProxOperator* penalty = nullptr) {
  double value = data_objective(u, left, right, model, basis);
  if (penalty != nullptr) value += penalty->penalty(u);
  return value;
}

// ---------------------------------------------------------------------------
// SE-ADMM

/// Iterates of the scaled-form ADMM: U (Sylvester step), V (prox step), W (scaled dual).
struct AdmmState {
  ImageCube u;
  ImageCube v;
  ImageCube w;
  double penalty = 1.0;
  long iteration = 0;
  std::vector<double> objective_trace;
};

struct AdmmOptions {
  double penalty = 1.0;  // mu; the prior precision of the U-step is mu I
  long max_iters = 200;
  double tol = 1e-6;
  bool track_objective = true;
  SolveOptions solve;
  std::optional<ImageCube> init;                         // U^0; default is H^T (upsampled Y_R)
  std::function<void(const AdmmState&)> observer;        // called after every iteration
};

/// Mean of the per-band noise precisions of the two sensors.
inline double mean_noise_precision(const ObservationModel& model) {
  const double right = model.noise_cov_right.inverse().diagonal().mean();
  const double left = model.noise_cov_left.inverse().diagonal().mean();
  return 0.5 * (right + left);
}

/// 0.1 times the mean noise precision.
inline double default_admm_penalty(const ObservationModel& model) { return 0.1 * mean_noise_precision(model); }

/// U^0 = H^T applied to the pixel-replicated Y_R.
inline ImageCube default_initialization(const ImageCube& right, const ObservationModel& model, const Matrix& basis) {
  return project(basis, nearest_upsample(right, model.decim_rows, model.decim_cols));
}

namespace detail {

struct AdmmTracker {
  double best_value = std::numeric_limits<double>::infinity();
  std::optional<ImageCube> best;

  void offer(const ImageCube& u, double value) {
    if (value < best_value) {
      best_value = value;
      best = u;
    }
  }
};

inline double relative_change(const BandMatrix& next, const BandMatrix& prev) {
  const double base = prev.norm();
  const double diff = (next - prev).norm();
  return base > 0.0 ? diff / base : diff;
}

template <typename USolve>
FusionResult run_admm(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                      const Matrix& basis, const ProxOperator& prox, const AdmmOptions& opt, FftEngine& fft,
                      USolve&& solve_u, std::chrono::steady_clock::time_point start) {
  if (!(opt.penalty > 0.0)) fail(ErrorKind::kValidation, "ADMM penalty must be positive");
  if (prox.reset) prox.reset();
  AdmmState state;
  state.penalty = opt.penalty;
  state.u = opt.init ? *opt.init : default_initialization(right, model, basis);
  state.v = state.u;
  state.w = with_data(state.u, BandMatrix::Zero(state.u.bands(), state.u.pixels()));

  AdmmTracker tracker;
  auto record = [&](const ImageCube& u) {
    if (!opt.track_objective) return;
    const double value = objective(u, left, right, model, basis, &prox);
    state.objective_trace.push_back(value);
    tracker.offer(u, value);
  };
  record(state.u);

  bool converged = false;
  double primal = 0.0;
  while (state.iteration < opt.max_iters) {
    ImageCube next = solve_u(state);
    const ImageCube z = with_data(next, next.data() - state.w.data());
    state.v = prox.prox(z, 1.0 / opt.penalty);
    state.w = with_data(next, state.v.data() - z.data());  // W - (U - V)
    const double change = relative_change(next.data(), state.u.data());
    const double scale = std::max(next.data().norm(), std::numeric_limits<double>::min());
    primal = (next.data() - state.v.data()).norm() / scale;
    state.u = std::move(next);
    ++state.iteration;
    record(state.u);
    if (opt.observer) opt.observer(state);
    if (change <= opt.tol && primal <= opt.tol) {
      converged = true;
      break;
    }
  }

  FusionResult result;
  result.coefficients = (!converged && tracker.best) ? *tracker.best : state.u;
  result.estimate = lift(basis, result.coefficients);
  result.diagnostics.iterations = state.iteration;
  result.diagnostics.converged = converged;
  result.diagnostics.objective_trace = std::move(state.objective_trace);
  result.diagnostics.fft = fft.stats();
  result.diagnostics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.diagnostics.primal_residual = primal;
  return result;
}

}  // namespace detail

/// SE-ADMM with every U-step a full closed-form Gaussian-prior solve (image domain).
inline FusionResult se_admm_image(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                                  const Matrix& basis, const ProxOperator& prox, const AdmmOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const Index k = basis.cols();
  const Matrix precision = opt.penalty * Matrix::Identity(k, k);
  SylvesterSystem s = prepare_system(model, basis, left.rows(), left.cols(), precision, opt.solve.tau);
  FftEngine fft(left.rows(), left.cols());
  auto solve_u = [&](const AdmmState& st) {
    const ImageCube mean = with_data(st.v, st.v.data() + st.w.data());
    s.c3_bar = assemble_c3_bar(s, fft, left, right, &mean);
    const ComplexBandMatrix u_bar = solve_blocks(s.c3_bar, s.alias, s.eig.lambda, opt.solve.singular_tol);
    const ComplexBandMatrix spec =
        coefficients_spectrum(s.eig.q, u_bar, s.alias, s.spectrum, s.tau, opt.solve.blur_tol);
    return ImageCube(fft.inverse_real(spec), left.rows(), left.cols());
  };
  return detail::run_admm(left, right, model, basis, prox, opt, fft, solve_u, start);
}

/// SE-ADMM with the U-step carried out on UF. The data part of C3_bar (C_s) and the prior
/// coupling (C_c = Q^{-1} A1 Sigma^{-1}) are computed once; each iteration only performs the
/// prox round trip (one inverse and one forward transform batch).
inline FusionResult se_admm_frequency(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                                      const Matrix& basis, const ProxOperator& prox, const AdmmOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const Index k = basis.cols();
  const Matrix precision = opt.penalty * Matrix::Identity(k, k);
  SylvesterSystem s = prepare_system(model, basis, left.rows(), left.cols(), precision, opt.solve.tau);
  FftEngine fft(left.rows(), left.cols());
  const ComplexBandMatrix c_s = finish_c3_bar(s, data_term_spectrum(s, fft, left, right, nullptr));
  const Matrix c_c = s.c4 * precision;

  std::optional<ComplexBandMatrix> prior_spectrum;  // F(V^k + W^k)
  auto solve_u = [&](const AdmmState& st) {
    if (!prior_spectrum) prior_spectrum = fft.forward(BandMatrix(st.v.data() + st.w.data()));
    ComplexBandMatrix coupling = detail::mix_bands(c_c, *prior_spectrum);
    detail::scale_columns(coupling, s.spectrum.d_diag, false);
    coupling = to_alias_order(coupling, s.alias);
    apply_p_inverse(coupling, s.alias);
    s.c3_bar = c_s + coupling;
    const ComplexBandMatrix u_bar = solve_blocks(s.c3_bar, s.alias, s.eig.lambda, opt.solve.singular_tol);
    const ComplexBandMatrix u_hat =
        coefficients_spectrum(s.eig.q, u_bar, s.alias, s.spectrum, s.tau, opt.solve.blur_tol);
    prior_spectrum.reset();
    return ImageCube(fft.inverse_real(u_hat), left.rows(), left.cols());
  };

  AdmmOptions inner = opt;
  auto user_observer = opt.observer;
  inner.observer = [&](const AdmmState& st) {
    prior_spectrum = fft.forward(BandMatrix(st.v.data() + st.w.data()));
    if (user_observer) user_observer(st);
  };
  return detail::run_admm(left, right, model, basis, prox, inner, fft, solve_u, start);
}

// ---------------------------------------------------------------------------
// SE-BCD

/// Hyperparameters Phi = {mean, precision} of the Gaussian prior on U.
using Hyper = GaussianPrior;

/// A hyperprior: the Phi-step and the matching negative log joint for objective tracing.
struct Hyperprior {
  std::function<Hyper(const ImageCube& u)> update;
  // -log p(U | Phi) - log p(Phi) up to constants; when empty, 1/2 tr((U-mu)^T Sigma^{-1} (U-mu)) is used.
  std::function<double(const ImageCube& u, const Hyper& phi)> neg_log;
};

/// Sigma^{-1} = gamma I with p(gamma) proportional to exp(-beta gamma); the Phi-step is
/// gamma = (dim n) / (||U - mu||^2 + 2 beta) with the mean held fixed.
inline Hyperprior scalar_precision_hyperprior(ImageCube mean, double beta = 1e-3) {
  Hyperprior h;
  h.update = [mean, beta](const ImageCube& u) {
    const double count = static_cast<double>(u.bands() * u.pixels());
    const double gamma = count / ((u.data() - mean.data()).squaredNorm() + 2.0 * beta);
    return Hyper{mean, gamma * Matrix::Identity(u.bands(), u.bands())};
  };
  h.neg_log = [beta](const ImageCube& u, const Hyper& phi) {
    const double gamma = phi.precision(0, 0);
    const double count = static_cast<double>(u.bands() * u.pixels());
    return 0.5 * gamma * (u.data() - phi.mean.data()).squaredNorm() - 0.5 * count * std::log(gamma) + beta * gamma;
  };
  return h;
}

struct BcdOptions {
  long max_iters = 50;
  double tol = 1e-6;
  SolveOptions solve;
};

inline double gaussian_neg_log(const ImageCube& u, const Hyper& phi) {
  const BandMatrix diff = u.data() - phi.mean.data();
  return 0.5 * diff.cwiseProduct(phi.precision * diff).sum();
}

/// Alternates U = fuse_gaussian(Phi) and Phi = hyper.update(U).
inline FusionResult se_bcd(const ImageCube& left, const ImageCube& right, const ObservationModel& model,
                           const Matrix& basis, const Hyperprior& hyper, Hyper phi, const BcdOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  if (!hyper.update) fail(ErrorKind::kValidation, "se_bcd: hyperprior has no update rule");
  auto joint = [&](const ImageCube& u, const Hyper& p) {
    const double prior = hyper.neg_log ? hyper.neg_log(u, p) : gaussian_neg_log(u, p);
    return data_objective(u, left, right, model, basis) + prior;
  };

  SolveOptions solve = opt.solve;
  solve.stationarity = false;
  FusionResult last;
  std::vector<double> trace;
  FftStats ffts;
  std::optional<ImageCube> prev;
  bool converged = false;
  long it = 0;
  while (it < opt.max_iters) {
    require_spd(phi.precision, "hyperparameter precision");
    last = fuse_gaussian(left, right, model, basis, phi, solve);
    ffts.forward_batches += last.diagnostics.fft.forward_batches;
    ffts.inverse_batches += last.diagnostics.fft.inverse_batches;
    ffts.transforms += last.diagnostics.fft.transforms;
    if (trace.empty()) trace.push_back(joint(last.coefficients, phi));
    Hyper next = hyper.update(last.coefficients);
    require_spd(next.precision, "updated hyperparameter precision");
    phi = std::move(next);
    trace.push_back(joint(last.coefficients, phi));
    ++it;
    const bool small = prev && detail::relative_change(last.coefficients.data(), prev->data()) <= opt.tol;
    prev = last.coefficients;
    if (small) {
      converged = true;
      break;
    }
  }

  FusionResult result = std::move(last);
  result.diagnostics.iterations = it;
  result.diagnostics.converged = converged;
  result.diagnostics.objective_trace = std::move(trace);
  result.diagnostics.fft = ffts;
  result.diagnostics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace sylfuse
