// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "sylfuse/cli.hpp"
#include "sylfuse/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace {

using namespace sylfuse;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

// Default protocol on the 64x64x16 synthetic scene.
struct Scene {
  RunConfig cfg;
  ImageCube reference;
  ObservationModel model;
  Observations obs;
  Matrix basis;
};

Scene protocol_scene(std::uint64_t seed) {
  Scene s;
  s.reference = synthetic_scene(SceneOptions{});
  s.model = cli::model_for_reference(s.cfg, s.reference);
  s.obs = degrade(s.reference, s.model, seed);
  s.basis = estimate_subspace(s.obs.right, s.cfg.solver.dim).basis;
  return s;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  const Index sides[] = {4, 8, 16};
  const std::pair<Index, Index> factors[] = {{1, 1}, {2, 2}, {2, 1}, {4, 4}};
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    ProblemShape shape;
    shape.rows = shape.cols = sides[trial % 3];
    std::tie(shape.d_r, shape.d_c) = factors[(trial / 3) % 4];
    shape.dim = 1 + static_cast<Index>(rng() % 4);
    shape.bands = shape.dim + static_cast<Index>(rng() % 3);
    shape.left_bands = shape.dim + static_cast<Index>(rng() % (shape.bands - shape.dim + 1));
    shape.kernel = 1 + static_cast<Index>(rng() % 3);
    shape.phase_r = static_cast<Index>(rng() % static_cast<std::uint64_t>(shape.d_r));
    shape.phase_c = static_cast<Index>(rng() % static_cast<std::uint64_t>(shape.d_c));
    const RandomProblem p = random_problem(shape, rng());
    SolveOptions opt;
    opt.stationarity = false;
    const FusionResult fast = fuse_ml(p.left, p.right, p.model, p.basis, opt);
    const auto sys = oracle::dense_system(p.left, p.right, p.model, p.basis);
    const Matrix dense = oracle::dense_sylvester_solve(sys.c1, sys.c2, sys.c3);
    worst = std::max(worst, relative_error(fast.coefficients.data(), dense));
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-8 && elapsed < 30.0, fmt("max rel err %.2e over 200 instances, %.1f s", worst, elapsed)};
}

Outcome structural_identities() {
  double alias = 0.0, block = 0.0, psd = 0.0;
  int grids = 0;
  std::mt19937_64 rng(7);
  for (Index rows = 1; rows <= 64; ++rows) {
    for (Index cols = 1; rows * cols <= 64; ++cols) {
      for (Index dr = 1; dr <= rows; ++dr) {
        if (rows % dr != 0) continue;
        for (Index dc = 1; dc <= cols; ++dc) {
          if (cols % dc != 0) continue;
          alias = std::max(alias, oracle::verify_lemma3(rows, cols, dr, dc));
          const Index k = std::min<Index>(3, std::min(rows, cols));
          block = std::max(block, oracle::verify_lemma2(rows, cols, dr, dc, random_matrix(k, k, rng).cwiseAbs()));
          ++grids;
        }
      }
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Index k = 1 + static_cast<Index>(rng() % 12);
    const Index r = static_cast<Index>(rng() % static_cast<std::uint64_t>(k + 1));
    const Matrix g1 = random_matrix(k, k, rng);
    const Matrix g2 = random_matrix(k, r, rng);
    const Matrix a1 = g1 * g1.transpose() + 1e-3 * Matrix::Identity(k, k);
    const Matrix a2 = g2 * g2.transpose();
    const Eigen::VectorXcd ev = (a1 * a2).eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    psd = std::min(psd, ev.real().minCoeff() / scale);
  }
  return {alias <= 1e-10 && block <= 1e-10 && psd >= -1e-10,
          fmt("alias identity %.2e, block form %.2e over %.0f grids; PSD product min eig %.2e", alias, block, grids,
              psd)};
}

Outcome stationarity_gate() {
  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ProblemShape shape;
    shape.phase_r = static_cast<Index>(seed % 2);
    const RandomProblem p = random_problem(shape, seed);
    const Index k = p.basis.cols();
    auto check = [&](const ImageCube& u, const GaussianPrior* prior) {
      worst = std::max(worst, stationarity_residual(u, p.left, p.right, p.model, p.basis, prior));
    };

    check(fuse_ml(p.left, p.right, p.model, p.basis).coefficients, nullptr);
    const GaussianPrior prior{default_initialization(p.right, p.model, p.basis), 0.5 * Matrix::Identity(k, k)};
    check(fuse_gaussian(p.left, p.right, p.model, p.basis, prior).coefficients, &prior);

    // Each ADMM U-step solves a Gaussian problem with mean V + W and precision mu I.
    for (const char* name : {"none", "l1", "tv"}) {
      for (bool frequency : {false, true}) {
        AdmmOptions opt;
        opt.penalty = 1.0;
        opt.max_iters = 15;
        ImageCube mean = default_initialization(p.right, p.model, p.basis);
        opt.observer = [&](const AdmmState& st) {
          const GaussianPrior step{mean, opt.penalty * Matrix::Identity(k, k)};
          check(st.u, &step);
          mean = with_data(st.v, st.v.data() + st.w.data());
        };
        const ProxOperator prox = make_prox(name, 1e-2);
        if (frequency) {
          (void)se_admm_frequency(p.left, p.right, p.model, p.basis, prox, opt);
        } else {
          (void)se_admm_image(p.left, p.right, p.model, p.basis, prox, opt);
        }
      }
    }

    // BCD output is the Gaussian solution for the hyperparameters in force before the last update.
    std::vector<Hyper> phis;
    Hyperprior base = scalar_precision_hyperprior(prior.mean);
    Hyperprior recorded = base;
    recorded.update = [&](const ImageCube& u) {
      phis.push_back(base.update(u));
      return phis.back();
    };
    phis.push_back(prior);
    const FusionResult bcd = se_bcd(p.left, p.right, p.model, p.basis, recorded, prior);
    check(bcd.coefficients, &phis[phis.size() - 2]);
  }
  return {worst <= 1e-8, fmt("max relative residual %.2e (ml, gaussian, admm x6, bcd)", worst)};
}

Outcome gaussian_limits() {
  const RandomProblem p = random_problem({}, 21);
  const Index k = p.basis.cols();
  const ImageCube mean = default_initialization(p.right, p.model, p.basis);
  const FusionResult ml = fuse_ml(p.left, p.right, p.model, p.basis);
  const FusionResult weak =
      fuse_gaussian(p.left, p.right, p.model, p.basis, GaussianPrior{mean, 1e-12 * Matrix::Identity(k, k)});
  const FusionResult strong =
      fuse_gaussian(p.left, p.right, p.model, p.basis, GaussianPrior{mean, 1e12 * Matrix::Identity(k, k)});
  const double e_ml = relative_error(weak.coefficients.data(), ml.coefficients.data());
  const double e_mean = relative_error(strong.coefficients.data(), mean.data());
  return {e_ml <= 1e-6 && e_mean <= 1e-5, fmt("weak prior vs ML %.2e, strong prior vs mean %.2e", e_ml, e_mean)};
}

Outcome admm_cross_domain() {
  const RandomProblem p = random_problem({}, 31);
  double iterate_gap = 0.0;
  for (const char* name : {"l1", "tv"}) {
    const ProxOperator prox = make_prox(name, 1e-2);
    AdmmOptions opt;
    opt.penalty = 1.0;
    opt.max_iters = 10;
    opt.tol = 0.0;
    std::vector<BandMatrix> image_iterates;
    opt.observer = [&](const AdmmState& st) { image_iterates.push_back(st.u.data()); };
    (void)se_admm_image(p.left, p.right, p.model, p.basis, prox, opt);
    std::size_t i = 0;
    opt.observer = [&](const AdmmState& st) {
      iterate_gap = std::max(iterate_gap, relative_error(st.u.data(), image_iterates.at(i++)));
    };
    (void)se_admm_frequency(p.left, p.right, p.model, p.basis, prox, opt);
  }

  const FusionResult ml = fuse_ml(p.left, p.right, p.model, p.basis);
  AdmmOptions opt;
  opt.penalty = 1.0;
  opt.tol = 1e-12;
  opt.max_iters = 5000;
  const FusionResult img = se_admm_image(p.left, p.right, p.model, p.basis, prox_none(), opt);
  const FusionResult frq = se_admm_frequency(p.left, p.right, p.model, p.basis, prox_none(), opt);
  const double e_img = relative_error(img.coefficients.data(), ml.coefficients.data());
  const double e_frq = relative_error(frq.coefficients.data(), ml.coefficients.data());
  return {iterate_gap <= 1e-9 && e_img <= 1e-6 && e_frq <= 1e-6,
          fmt("iterate gap %.2e over 10 iterations; phi = 0 vs ML: image %.2e, frequency %.2e", iterate_gap, e_img,
              e_frq)};
}

Outcome property_quality() {
  const auto t0 = Clock::now();
  const Scene s = protocol_scene(1);
  const ImageCube zero = zero_interpolate(s.obs.right, s.model.decim_rows, s.model.decim_cols,
                                          s.model.phase_rows, s.model.phase_cols);
  const ImageCube nearest = nearest_upsample(s.obs.right, s.model.decim_rows, s.model.decim_cols);
  RunConfig gauss = s.cfg;
  gauss.solver.method = "gaussian";
  RunConfig tv = s.cfg;
  tv.solver.method = "admm-image";
  tv.solver.prior = "tv";
  const double r_zero = rsnr_db(s.reference, zero);
  const double r_nearest = rsnr_db(s.reference, nearest);
  const double r_gauss =
      rsnr_db(s.reference, cli::run_method(gauss, s.obs.left, s.obs.right, s.model, s.basis).estimate);
  const double r_tv = rsnr_db(s.reference, cli::run_method(tv, s.obs.left, s.obs.right, s.model, s.basis).estimate);
  const double elapsed = seconds_since(t0);
  const bool pass = r_gauss >= r_zero + 5.0 && r_tv >= r_gauss - 0.5 && elapsed < 60.0;
  return {pass, fmt("RSNR dB: zero-interp %.2f, nearest %.2f, gaussian %.2f, admm-tv %.2f", r_zero, r_nearest,
                    r_gauss, r_tv) +
                    fmt(", %.1f s", elapsed)};
}

Outcome speed_structure() {
  SceneOptions opt;
  opt.rows = opt.cols = 128;
  const ImageCube reference = synthetic_scene(opt);
  const RunConfig cfg;
  const ObservationModel model = cli::model_for_reference(cfg, reference);
  const Observations obs = degrade(reference, model, 3);
  const Matrix basis = estimate_subspace(obs.right, cfg.solver.dim).basis;
  const Index k = basis.cols();
  SolveOptions solve;
  solve.stationarity = false;
  const GaussianPrior prior{default_initialization(obs.right, model, basis),
                            default_admm_penalty(model) * Matrix::Identity(k, k)};

  std::vector<double> closed;
  for (int r = 0; r < 3; ++r) {
    const auto t0 = Clock::now();
    (void)fuse_gaussian(obs.left, obs.right, model, basis, prior, solve);
    closed.push_back(seconds_since(t0));
  }
  AdmmOptions admm;
  admm.penalty = default_admm_penalty(model);
  admm.max_iters = 100;
  admm.tol = 0.0;
  admm.track_objective = false;
  admm.solve = solve;
  const auto t0 = Clock::now();
  (void)se_admm_image(obs.left, obs.right, model, basis, prox_none(), admm);
  const double iterative = seconds_since(t0);
  const double t_closed = cli::median(closed);
  const double speedup = iterative / t_closed;

  std::vector<Index> sizes;
  for (int e = 12; e <= 18; ++e) sizes.push_back(Index{1} << e);
  const auto rows = cli::run_benchmark(sizes, 5);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& row : rows) {
    lo = std::min(lo, row.fuse_ratio());
    hi = std::max(hi, row.fuse_ratio());
  }
  return {speedup >= 20.0 && hi <= 2.0 * lo,
          fmt("speedup %.1fx (%.3f s vs %.3f s); time/(n log n) band %.2f", speedup, t_closed, iterative, hi / lo)};
}

Outcome convergence_shape() {
  const Scene s = protocol_scene(2);
  RunConfig cfg = s.cfg;
  cfg.solver.method = "admm-image";
  cfg.solver.prior = "tv";
  const FusionResult r = cli::run_method(cfg, s.obs.left, s.obs.right, s.model, s.basis);
  const auto& trace = r.diagnostics.objective_trace;
  double worst = 0.0;
  for (std::size_t i = 3; i + 1 < trace.size(); ++i) {
    worst = std::max(worst, (trace[i + 1] - trace[i]) / std::abs(trace[i]));
  }
  return {trace.size() > 4 && worst <= 1e-9,
          fmt("%.0f iterations, largest relative increase after iteration 3: %.2e",
              static_cast<double>(trace.size() - 1), worst)};
}

Outcome determinism() {
  bool same = true;
  int runs = 0;
  for (const char* method : {"ml", "gaussian", "admm-image", "admm-frequency", "bcd"}) {
    std::string reference;
    for (int threads : {1, 4, 4}) {
      set_thread_count(threads);
      const Scene s = protocol_scene(5);
      RunConfig cfg = s.cfg;
      cfg.solver.method = method;
      cfg.solver.prior = "tv";
      cfg.solver.max_iters = 20;
      const std::string bytes = encode_cube(cli::run_method(cfg, s.obs.left, s.obs.right, s.model, s.basis).estimate) +
                                encode_cube(s.obs.left) + encode_cube(s.obs.right);
      if (reference.empty()) reference = bytes;
      same = same && bytes == reference;
      ++runs;
    }
  }
  set_thread_count(1);
  return {same, fmt("%.0f runs over 5 methods with 1 and 4 threads", runs)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"oracle equivalence", oracle_equivalence},   {"structural identities", structural_identities},
      {"stationarity gate", stationarity_gate},     {"gaussian prior limits", gaussian_limits},
      {"admm cross-domain", admm_cross_domain},     {"fusion quality properties", property_quality},
      {"speed and complexity", speed_structure},    {"convergence curve shape", convergence_shape},
      {"determinism", determinism},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
