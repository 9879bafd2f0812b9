#pragma once

// Command implementations behind the sylfuse tool. Each command returns a process exit code:
// 0 success, 1 usage, 2 validation (bad input, shapes, configuration, I/O), 3 numerical.

#include "sylfuse/config.hpp"
#include "sylfuse/core.hpp"
#include "sylfuse/estimators.hpp"
#include "sylfuse/io.hpp"
#include "sylfuse/metrics.hpp"
#include "sylfuse/model.hpp"
#include "sylfuse/oracle.hpp"
#include "sylfuse/parallel.hpp"
#include "sylfuse/subspace.hpp"
#include "sylfuse/sylvester.hpp"
#include "sylfuse/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sylfuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDefiniteness:
    case ErrorKind::kSingularSystem:
    case ErrorKind::kIllConditioned:
      return kExitNumerical;
    default:
      return kExitValidation;
  }
}

/// Runs `body`, mapping library errors to exit codes and printing them to `err`.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::kSingularSystem) {
      err << "hint: ML fusion needs C1 invertible; use fewer subspace dimensions than multispectral bands, "
             "or a Gaussian prior (method gaussian)\n";
    }
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kExitNumerical;
  }
}

inline RunConfig load_config(const std::optional<std::string>& path) {
  if (!path) return RunConfig{};
  return parse_config_text(read_file(*path), *path);
}

inline std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::vector<double> diagonal_of(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) out[i] = m(i, i);
  return out;
}

inline Matrix diagonal_matrix(const std::vector<double>& v, const std::string& what) {
  Matrix m = Matrix::Zero(static_cast<Index>(v.size()), static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) fail(ErrorKind::kValidation, what + " must be positive");
    m(static_cast<Index>(i), static_cast<Index>(i)) = v[i];
  }
  return m;
}

// ---------------------------------------------------------------------------
// degrade

struct DegradeArgs {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string input;
  std::string out;  // prefix: <out>.left.mbc, <out>.right.mbc, <out>.noise.json, <out>.provenance.json
};

/// Observation model with noise covariances set from the configured SNR schedules.
inline ObservationModel model_for_reference(const RunConfig& cfg, const ImageCube& x) {
  ObservationModel model = build_model(cfg.model, x.bands());
  model.validate(x.rows(), x.cols());
  const ImageCube left = apply_spectral_response(model.spectral_response, x);
  const ImageCube right = decimate(circular_blur(model.blur_kernel, x), model.decim_rows, model.decim_cols,
                                   model.phase_rows, model.phase_cols);
  model.noise_cov_left = snr_to_variance(left, cfg.model.snr_left.resolve(left.bands()));
  model.noise_cov_right = snr_to_variance(right, cfg.model.snr_right.resolve(right.bands()));
  return model;
}

inline int cmd_degrade(const DegradeArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load_config(args.config);
    if (args.seed) cfg.seed = *args.seed;
    const ImageCube x = load_cube(args.input);
    const ObservationModel model = model_for_reference(cfg, x);
    const Observations obs = degrade(x, model, cfg.seed);

    const std::string left_path = args.out + ".left.mbc";
    const std::string right_path = args.out + ".right.mbc";
    save_cube(left_path, obs.left);
    save_cube(right_path, obs.right);
    const nlohmann::json noise{{"left_variance", diagonal_of(model.noise_cov_left)},
                               {"right_variance", diagonal_of(model.noise_cov_right)}};
    write_file(args.out + ".noise.json", json_text(noise));
    const nlohmann::json provenance{{"command", "degrade"},
                                    {"config_hash", config_hash(cfg)},
                                    {"config", config_to_json(cfg)},
                                    {"seed", cfg.seed},
                                    {"reference_shape", {x.bands(), x.rows(), x.cols()}},
                                    {"left_shape", {obs.left.bands(), obs.left.rows(), obs.left.cols()}},
                                    {"right_shape", {obs.right.bands(), obs.right.rows(), obs.right.cols()}}};
    write_file(args.out + ".provenance.json", json_text(provenance));
    out << "Y_L " << obs.left.shape_str() << " -> " << left_path << "\n";
    out << "Y_R " << obs.right.shape_str() << " -> " << right_path << "\n";
    out << "config hash " << config_hash(cfg) << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// fuse

struct FuseArgs {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> noise;  // JSON with left_variance / right_variance
  std::string left;
  std::string right;
  std::string out;  // estimate; diagnostics go to <out>.diag.json
};

/// Checks that Y_L and Y_R fit the model and each other.
inline void check_pairing(const ImageCube& left, const ImageCube& right, const ObservationModel& model) {
  const bool ok = left.rows() == right.rows() * model.decim_rows && left.cols() == right.cols() * model.decim_cols &&
                  left.bands() == model.left_bands() && right.bands() == model.bands();
  if (!ok) {
    fail(ErrorKind::kShape, "Y_L is " + left.shape_str() + " and Y_R is " + right.shape_str() +
                                ", inconsistent with decimation " + dims_str(model.decim_rows, model.decim_cols) +
                                " and a " + dims_str(model.left_bands(), model.bands()) + " spectral response");
  }
}

/// Model for a pair of observations; noise from a sidecar or, failing that, from the SNR
/// schedules applied to the observations themselves.
inline ObservationModel model_for_observations(const RunConfig& cfg, const ImageCube& left, const ImageCube& right,
                                               const std::optional<std::string>& noise_path) {
  ObservationModel model = build_model(cfg.model, right.bands());
  check_pairing(left, right, model);
  if (noise_path) {
    const nlohmann::json noise = nlohmann::json::parse(read_file(*noise_path));
    detail::reject_unknown(noise, {"left_variance", "right_variance"}, "noise");
    model.noise_cov_left = diagonal_matrix(noise.at("left_variance").get<std::vector<double>>(), "left variance");
    model.noise_cov_right = diagonal_matrix(noise.at("right_variance").get<std::vector<double>>(), "right variance");
  } else {
    model.noise_cov_left = snr_to_variance(left, cfg.model.snr_left.resolve(left.bands()));
    model.noise_cov_right = snr_to_variance(right, cfg.model.snr_right.resolve(right.bands()));
  }
  model.validate(left.rows(), left.cols());
  return model;
}

/// Runs the configured estimator.
inline FusionResult run_method(const RunConfig& cfg, const ImageCube& left, const ImageCube& right,
                               const ObservationModel& model, const Matrix& basis) {
  const SolverConfig& s = cfg.solver;
  SolveOptions solve;
  solve.tau = s.tau;
  const double default_precision = default_admm_penalty(model);
  const ImageCube mean = default_initialization(right, model, basis);
  if (s.method == "ml") return fuse_ml(left, right, model, basis, solve);
  if (s.method == "gaussian") {
    const double gamma = s.prior_precision.value_or(default_precision);
    const Matrix precision = gamma * Matrix::Identity(basis.cols(), basis.cols());
    return fuse_gaussian(left, right, model, basis, GaussianPrior{mean, precision},
                         solve);
  }
  if (s.method == "bcd") {
    BcdOptions opt;
    opt.max_iters = s.max_iters;
    opt.tol = s.tol;
    opt.solve = solve;
    const double gamma = s.prior_precision.value_or(default_precision);
    return se_bcd(left, right, model, basis, scalar_precision_hyperprior(mean, s.bcd_beta),
                  Hyper{mean, gamma * Matrix::Identity(basis.cols(), basis.cols())}, opt);
  }
  AdmmOptions opt;
  opt.penalty = s.penalty.value_or(default_precision);
  opt.max_iters = s.max_iters;
  opt.tol = s.tol;
  opt.solve = solve;
  const ProxOperator prox = make_prox(s.prior, s.prior_weight * mean_noise_precision(model), s.tv_inner_iters);
  if (s.method == "admm-image") return se_admm_image(left, right, model, basis, prox, opt);
  return se_admm_frequency(left, right, model, basis, prox, opt);
}

inline nlohmann::json diagnostics_json(const Diagnostics& d, const std::string& method) {
  nlohmann::json j{{"method", method},
                   {"wall_seconds", d.wall_seconds},
                   {"fft", {{"forward_batches", d.fft.forward_batches},
                            {"inverse_batches", d.fft.inverse_batches},
                            {"transforms", d.fft.transforms}}},
                   {"iterations", d.iterations},
                   {"converged", d.converged},
                   {"objective_trace", d.objective_trace},
                   {"lambda_min", d.lambda_min},
                   {"lambda_max", d.lambda_max}};
  j["stationarity_residual"] = d.stationarity_residual ? nlohmann::json(*d.stationarity_residual) : nlohmann::json();
  j["primal_residual"] = d.primal_residual ? nlohmann::json(*d.primal_residual) : nlohmann::json();
  return j;
}

inline int cmd_fuse(const FuseArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load_config(args.config);
    if (args.seed) cfg.seed = *args.seed;
    const ImageCube left = load_cube(args.left);
    const ImageCube right = load_cube(args.right);
    const ObservationModel model = model_for_observations(cfg, left, right, args.noise);
    const SubspaceBasis subspace = estimate_subspace(right, cfg.solver.dim, cfg.solver.center);
    if (subspace.rank_deficient) err << "warning: subspace dimension exceeds the numerical rank of Y_R\n";
    const FusionResult result = run_method(cfg, left, right, model, subspace.basis);
    save_cube(args.out, result.estimate);
    nlohmann::json diag = diagnostics_json(result.diagnostics, cfg.solver.method);
    diag["config_hash"] = config_hash(cfg);
    write_file(args.out + ".diag.json", json_text(diag));

    const auto& d = result.diagnostics;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.6f", d.wall_seconds);
    out << "method " << cfg.solver.method << "\n";
    out << "estimate " << result.estimate.shape_str() << " -> " << args.out << "\n";
    out << "wall_seconds " << buf << "\n";
    out << "fft forward_batches " << d.fft.forward_batches << " inverse_batches " << d.fft.inverse_batches
        << " transforms " << d.fft.transforms << "\n";
    out << "iterations " << d.iterations << (d.converged ? "" : " (not converged)") << "\n";
    if (d.stationarity_residual) {
      std::snprintf(buf, sizeof buf, "%.3e", *d.stationarity_residual);
      out << "stationarity_residual " << buf << "\n";
    }
    if (!d.objective_trace.empty()) {
      out << "objective_trace";
      for (double v : d.objective_trace) {
        std::snprintf(buf, sizeof buf, " %.9g", v);
        out << buf;
      }
      out << "\n";
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string reference;
  std::string estimate;
  std::optional<double> decimation;  // total factor d; defaults to the config's d_r d_c
  std::optional<std::string> config;
  bool json = false;
};

inline int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(args.config);
    const double d = args.decimation.value_or(static_cast<double>(cfg.model.d_r * cfg.model.d_c));
    const ImageCube reference = load_cube(args.reference);
    const ImageCube estimate = load_cube(args.estimate);
    const MetricReport report = evaluate(reference, estimate, d);
    if (report.ergas_skipped_bands > 0) {
      err << "warning: " << report.ergas_skipped_bands << " band(s) with zero reference mean skipped in ERGAS\n";
    }
    std::optional<double> seconds;
    const std::string diag_path = args.estimate + ".diag.json";
    if (std::filesystem::exists(diag_path)) {
      const nlohmann::json diag = nlohmann::json::parse(read_file(diag_path));
      if (diag.contains("wall_seconds")) seconds = diag.at("wall_seconds").get<double>();
    }
    if (args.json) {
      nlohmann::json j = to_json(report);
      j["time_seconds"] = seconds ? nlohmann::json(*seconds) : nlohmann::json();
      out << json_text(j);
    } else {
      out << format_table(report, seconds);
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkRow {
  Index pixels = 0;
  Index rows = 0;
  Index cols = 0;
  double fuse_seconds = 0.0;       // best over reps
  double admm_iter_seconds = 0.0;  // best over reps
  [[nodiscard]] double nlogn() const {
    return static_cast<double>(pixels) * std::log2(static_cast<double>(pixels));
  }
  [[nodiscard]] double fuse_ratio() const { return 1e9 * fuse_seconds / nlogn(); }
  [[nodiscard]] double admm_ratio() const { return 1e9 * admm_iter_seconds / nlogn(); }
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Synthetic scene plus default-style degradation on a (rows x cols) grid.
struct BenchInstance {
  ImageCube reference;
  ObservationModel model;
  Observations obs;
  Matrix basis;
};

inline BenchInstance bench_instance(Index rows, Index cols, Index bands, std::uint64_t seed) {
  SceneOptions scene;
  scene.rows = rows;
  scene.cols = cols;
  scene.bands = bands;
  scene.seed = seed;
  BenchInstance b;
  b.reference = synthetic_scene(scene);
  RunConfig cfg;
  cfg.model.snr_right.split_at = bands / 2;
  b.model = model_for_reference(cfg, b.reference);
  b.obs = degrade(b.reference, b.model, seed);
  b.basis = estimate_subspace(b.obs.right, cfg.solver.dim).basis;
  return b;
}

inline std::vector<BenchmarkRow> run_benchmark(const std::vector<Index>& sizes, int reps, Index bands = 16) {
  if (reps < 1) fail(ErrorKind::kValidation, "benchmark needs reps >= 1");
  std::vector<BenchmarkRow> rows;
  for (Index n : sizes) {
    if (n < 16 || (n & (n - 1)) != 0) fail(ErrorKind::kValidation, "benchmark sizes must be powers of two >= 16");
    int e = 0;
    while ((Index{1} << e) < n) ++e;
    BenchmarkRow row;
    row.pixels = n;
    row.rows = Index{1} << (e / 2);
    row.cols = n / row.rows;
    const BenchInstance inst = bench_instance(row.rows, row.cols, bands, 7);
    SolveOptions solve;
    solve.stationarity = false;
    AdmmOptions admm;
    admm.penalty = default_admm_penalty(inst.model);
    admm.max_iters = 1;
    admm.tol = 0.0;
    admm.track_objective = false;
    admm.solve = solve;
    const ProxOperator none = prox_none();
    std::vector<double> fuse_t, admm_t;
    for (int r = 0; r < reps; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      const FusionResult f = fuse_ml(inst.obs.left, inst.obs.right, inst.model, inst.basis, solve);
      auto t1 = std::chrono::steady_clock::now();
      const FusionResult a = se_admm_image(inst.obs.left, inst.obs.right, inst.model, inst.basis, none, admm);
      auto t2 = std::chrono::steady_clock::now();
      fuse_t.push_back(std::chrono::duration<double>(t1 - t0).count());
      admm_t.push_back(std::chrono::duration<double>(t2 - t1).count());
    }
    row.fuse_seconds = *std::min_element(fuse_t.begin(), fuse_t.end());
    row.admm_iter_seconds = *std::min_element(admm_t.begin(), admm_t.end());
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_benchmark(const std::vector<BenchmarkRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%10s %10s %12s %12s %14s %14s\n", "n", "grid", "fuse_ml_s", "admm_iter_s",
                "fuse_ns/nlogn", "admm_ns/nlogn");
  out += buf;
  for (const auto& r : rows) {
    const std::string grid = dims_str(r.rows, r.cols);
    std::snprintf(buf, sizeof buf, "%10ld %10s %12.6f %12.6f %14.3f %14.3f\n", static_cast<long>(r.pixels),
                  grid.c_str(), r.fuse_seconds, r.admm_iter_seconds, r.fuse_ratio(), r.admm_ratio());
    out += buf;
  }
  return out;
}

struct BenchmarkArgs {
  std::vector<Index> sizes{4096, 16384, 65536};
  int reps = 3;
  Index bands = 16;
  std::optional<std::string> out;  // optional JSON dump
};

inline int cmd_benchmark(const BenchmarkArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto rows = run_benchmark(args.sizes, args.reps, args.bands);
    out << format_benchmark(rows);
    if (args.out) {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : rows) {
        j.push_back({{"pixels", r.pixels}, {"rows", r.rows}, {"cols", r.cols}, {"fuse_seconds", r.fuse_seconds},
                     {"admm_iter_seconds", r.admm_iter_seconds}, {"fuse_ns_per_nlogn", r.fuse_ratio()},
                     {"admm_ns_per_nlogn", r.admm_ratio()}});
      }
      write_file(*args.out, json_text(j));
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// selftest

struct SelftestCheck {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  [[nodiscard]] bool pass() const { return value <= limit; }
};

/// Small oracle suite: structural identities, fast vs dense solves, stationarity.
inline std::vector<SelftestCheck> run_selftest() {
  std::vector<SelftestCheck> checks;
  checks.push_back({"alias identity 4x4 d=2x2", oracle::verify_lemma3(4, 4, 2, 2), 1e-10});
  checks.push_back({"alias identity 8x1 d=4x1", oracle::verify_lemma3(8, 1, 4, 1), 1e-10});
  checks.push_back({"alias identity 8x8 d=4x2", oracle::verify_lemma3(8, 8, 4, 2), 1e-10});
  checks.push_back({"block form 8x8 d=2x2", oracle::verify_lemma2(8, 8, 2, 2, average_kernel(3)), 1e-10});

  const std::vector<std::pair<Index, Index>> decims{{1, 1}, {2, 2}, {2, 1}, {4, 4}};
  std::uint64_t seed = 100;
  for (const auto& [dr, dc] : decims) {
    ProblemShape shape;
    shape.d_r = dr;
    shape.d_c = dc;
    const RandomProblem p = random_problem(shape, seed++);
    const FusionResult fast = fuse_ml(p.left, p.right, p.model, p.basis);
    const oracle::DenseSystem sys = oracle::dense_system(p.left, p.right, p.model, p.basis);
    const Matrix dense = oracle::dense_sylvester_solve(sys.c1, sys.c2, sys.c3);
    const std::string tag = "d=" + dims_str(dr, dc);
    checks.push_back({"ml vs dense " + tag, relative_error(Matrix(fast.coefficients.data()), dense), 1e-8});
    checks.push_back({"stationarity " + tag,
                      oracle::verify_stationarity(fast.coefficients, p.left, p.right, p.model, p.basis), 1e-8});
  }
  {
    const RandomProblem p = random_problem(ProblemShape{}, seed++);
    const oracle::DenseSystem sys = oracle::dense_system(p.left, p.right, p.model, p.basis);
    checks.push_back({"bartels-stewart vs vectorized",
                      relative_error(oracle::bartels_stewart(sys.c1, sys.c2, sys.c3),
                                     oracle::dense_sylvester_solve(sys.c1, sys.c2, sys.c3)),
                      1e-9});
  }
  return checks;
}

inline int cmd_selftest(std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    bool ok = true;
    char buf[64];
    for (const auto& c : run_selftest()) {
      std::snprintf(buf, sizeof buf, "%.3e <= %.0e", c.value, c.limit);
      out << (c.pass() ? "PASS " : "FAIL ") << c.name << " (" << buf << ")\n";
      ok = ok && c.pass();
    }
    return ok ? kExitOk : kExitNumerical;
  });
}

// ---------------------------------------------------------------------------
// synthesize / export-pgm

struct SynthesizeArgs {
  SceneOptions scene;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline int cmd_synthesize(const SynthesizeArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SceneOptions scene = args.scene;
    if (args.seed) scene.seed = *args.seed;
    const ImageCube x = synthetic_scene(scene);
    save_cube(args.out, x);
    out << "scene " << x.shape_str() << " -> " << args.out << "\n";
    return kExitOk;
  });
}

struct ExportPgmArgs {
  std::string input;
  Index band = 0;
  std::string out;
};

inline int cmd_export_pgm(const ExportPgmArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    write_file(args.out, encode_pgm(load_cube(args.input), args.band));
    out << "band " << args.band << " -> " << args.out << "\n";
    return kExitOk;
  });
}

}  // namespace sylfuse::cli
