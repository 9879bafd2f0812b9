#pragma once

// Experiment configuration (JSON). Unknown keys are rejected; every field has a default.
//
// {
//   "model": {
//     "kernel": "average 5",              // "average K" | "gaussian K sigma" | [[...], ...]
//     "d_r": 4, "d_c": 4,                  // decimation factors
//     "phase_r": 0, "phase_c": 0,          // sampling offset inside each block
//     "spectral_response": "band-average 4",  // "identity" | "band-average N" | [[...], ...]
//     "snr_right_db": {"split_at": 8, "before": 35, "after": 30},  // number | array | split
//     "snr_left_db": 30
//   },
//   "solver": {
//     "method": "gaussian",               // ml | gaussian | admm-image | admm-frequency | bcd
//     "prior": "none",                    // none | l1 | tv (ADMM methods)
//     "prior_weight": 5e-3,               // x mean data precision
//     "dim": 4, "center": false,          // subspace dimension, PCA centering
//     "prior_precision": null,            // gaussian/bcd start; null = 0.1 x mean data precision
//     "penalty": null,                    // ADMM mu; null = 0.1 x mean data precision
//     "tau": 0.0,
//     "tol": 1e-6, "max_iters": 200,
//     "tv_inner_iters": 20,
//     "bcd_beta": 1e-3
//   },
//   "seed": 0
// }

#include "sylfuse/core.hpp"
#include "sylfuse/model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sylfuse {

/// Per-band SNR schedule: one value, an explicit list, or a two-level split.
struct SnrSchedule {
  std::vector<double> explicit_values;
  double value = 30.0;
  std::optional<Index> split_at;
  double before = 35.0;
  double after = 30.0;

  [[nodiscard]] std::vector<double> resolve(Index bands) const {
    if (!explicit_values.empty()) {
      if (static_cast<Index>(explicit_values.size()) != bands) {
        fail(ErrorKind::kValidation, "SNR list has " + std::to_string(explicit_values.size()) + " entries for " +
                                         std::to_string(bands) + " bands");
      }
      return explicit_values;
    }
    std::vector<double> out(static_cast<std::size_t>(bands), value);
    if (split_at) {
      for (Index b = 0; b < bands; ++b) out[b] = b < *split_at ? before : after;
    }
    return out;
  }
};

struct ModelConfig {
  nlohmann::json kernel = "average 5";
  Index d_r = 4;
  Index d_c = 4;
  Index phase_r = 0;
  Index phase_c = 0;
  nlohmann::json spectral_response = "band-average 4";
  SnrSchedule snr_right{{}, 30.0, 8, 35.0, 30.0};
  SnrSchedule snr_left{{}, 30.0, std::nullopt, 35.0, 30.0};
};

struct SolverConfig {
  std::string method = "gaussian";
  std::string prior = "none";
  double prior_weight = 5e-3;  // relative to the mean noise precision
  Index dim = 4;
  bool center = false;
  std::optional<double> prior_precision;
  std::optional<double> penalty;
  double tau = 0.0;
  double tol = 1e-6;
  long max_iters = 200;
  int tv_inner_iters = 20;
  double bcd_beta = 1e-3;
};

struct RunConfig {
  ModelConfig model;
  SolverConfig solver;
  std::uint64_t seed = 0;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::kValidation, "config: '" + where + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (keys.count(item.key()) == 0) {
      fail(ErrorKind::kValidation, "config: unknown key '" + where + "." + item.key() + "'");
    }
  }
}

template <typename T>
void read_key(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::kValidation, "config: '" + where + "." + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const nlohmann::json& obj, const char* key, std::optional<T>& out, const std::string& where) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read_key(obj, key, v, where);
  out = v;
}

inline SnrSchedule parse_snr(const nlohmann::json& j, const std::string& where) {
  SnrSchedule s;
  s.split_at.reset();
  if (j.is_number()) {
    s.value = j.get<double>();
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number()) fail(ErrorKind::kValidation, "config: '" + where + "' entries must be numbers");
      s.explicit_values.push_back(v.get<double>());
    }
    if (s.explicit_values.empty()) fail(ErrorKind::kValidation, "config: '" + where + "' is empty");
  } else if (j.is_object()) {
    reject_unknown(j, {"split_at", "before", "after"}, where);
    if (!j.contains("split_at")) fail(ErrorKind::kValidation, "config: '" + where + ".split_at' is required");
    Index at = 0;
    read_key(j, "split_at", at, where);
    if (at < 0) fail(ErrorKind::kValidation, "config: '" + where + ".split_at' must be non-negative");
    s.split_at = at;
    read_key(j, "before", s.before, where);
    read_key(j, "after", s.after, where);
  } else {
    fail(ErrorKind::kValidation, "config: '" + where + "' must be a number, list or split object");
  }
  return s;
}

inline nlohmann::json snr_to_json(const SnrSchedule& s) {
  if (!s.explicit_values.empty()) return s.explicit_values;
  if (s.split_at) return {{"split_at", *s.split_at}, {"before", s.before}, {"after", s.after}};
  return s.value;
}

inline std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

inline double parse_number(const std::string& word, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(word, &used);
    if (used != word.size()) throw std::invalid_argument(word);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::kValidation, "config: '" + where + "': '" + word + "' is not a number");
  }
}

inline Index parse_positive(const std::string& word, const std::string& where) {
  const double v = parse_number(word, where);
  if (v < 1.0 || v != std::floor(v)) fail(ErrorKind::kValidation, "config: '" + where + "' needs a positive integer");
  return static_cast<Index>(v);
}

inline Matrix parse_matrix(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
    fail(ErrorKind::kValidation, "config: '" + where + "' must be a non-empty list of rows");
  }
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Index>(j[r].size()) != cols) {
      fail(ErrorKind::kValidation, "config: '" + where + "' rows must have equal length");
    }
    for (Index c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) fail(ErrorKind::kValidation, "config: '" + where + "' entries must be numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace detail

/// Uniform K x K kernel summing to one.
inline Matrix average_kernel(Index size) {
  if (size < 1) fail(ErrorKind::kValidation, "kernel size must be positive");
  return Matrix::Constant(size, size, 1.0 / static_cast<double>(size * size));
}

/// Sampled isotropic Gaussian, K x K, normalized to sum to one.
inline Matrix gaussian_kernel(Index size, double sigma) {
  if (size < 1) fail(ErrorKind::kValidation, "kernel size must be positive");
  if (!(sigma > 0.0)) fail(ErrorKind::kValidation, "gaussian sigma must be positive");
  Matrix k(size, size);
  const double center = static_cast<double>(size - 1) / 2.0;
  for (Index r = 0; r < size; ++r) {
    for (Index c = 0; c < size; ++c) {
      const double dr = static_cast<double>(r) - center;
      const double dc = static_cast<double>(c) - center;
      k(r, c) = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
    }
  }
  return k / k.sum();
}

/// N x bands matrix averaging contiguous, near-equal groups of bands.
inline Matrix band_average_response(Index groups, Index bands) {
  if (groups < 1 || groups > bands) {
    fail(ErrorKind::kValidation, "band-average needs 1 <= N <= bands, got N = " + std::to_string(groups) +
                                     " for " + std::to_string(bands) + " bands");
  }
  Matrix l = Matrix::Zero(groups, bands);
  for (Index g = 0; g < groups; ++g) {
    const Index lo = g * bands / groups;
    const Index hi = (g + 1) * bands / groups;
    for (Index b = lo; b < hi; ++b) l(g, b) = 1.0 / static_cast<double>(hi - lo);
  }
  return l;
}

inline Matrix resolve_kernel(const nlohmann::json& spec) {
  if (spec.is_array()) {
    const Matrix k = detail::parse_matrix(spec, "model.kernel");
    return k;
  }
  if (!spec.is_string()) fail(ErrorKind::kValidation, "config: 'model.kernel' must be a string or matrix");
  const auto words = detail::split_words(spec.get<std::string>());
  if (words.size() == 2 && words[0] == "average") {
    return average_kernel(detail::parse_positive(words[1], "model.kernel"));
  }
  if (words.size() == 3 && words[0] == "gaussian") {
    return gaussian_kernel(detail::parse_positive(words[1], "model.kernel"),
                           detail::parse_number(words[2], "model.kernel"));
  }
  fail(ErrorKind::kValidation, "config: 'model.kernel' must be \"average K\", \"gaussian K sigma\" or a matrix");
}

inline Matrix resolve_response(const nlohmann::json& spec, Index bands) {
  if (spec.is_array()) {
    Matrix l = detail::parse_matrix(spec, "model.spectral_response");
    if (l.cols() != bands) {
      fail(ErrorKind::kValidation, "config: spectral response has " + std::to_string(l.cols()) + " columns for " +
                                       std::to_string(bands) + " bands");
    }
    return l;
  }
  if (!spec.is_string()) fail(ErrorKind::kValidation, "config: 'model.spectral_response' must be a string or matrix");
  const auto words = detail::split_words(spec.get<std::string>());
  if (words.size() == 1 && words[0] == "identity") return Matrix::Identity(bands, bands);
  if (words.size() == 2 && words[0] == "band-average") {
    return band_average_response(detail::parse_positive(words[1], "model.spectral_response"), bands);
  }
  fail(ErrorKind::kValidation,
       "config: 'model.spectral_response' must be \"identity\", \"band-average N\" or a matrix");
}

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg;
  detail::reject_unknown(j, {"model", "solver", "seed"}, "config");
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown(m, {"kernel", "d_r", "d_c", "phase_r", "phase_c", "spectral_response", "snr_right_db",
                               "snr_left_db"},
                           "model");
    if (m.contains("kernel")) cfg.model.kernel = m.at("kernel");
    detail::read_key(m, "d_r", cfg.model.d_r, "model");
    detail::read_key(m, "d_c", cfg.model.d_c, "model");
    detail::read_key(m, "phase_r", cfg.model.phase_r, "model");
    detail::read_key(m, "phase_c", cfg.model.phase_c, "model");
    if (m.contains("spectral_response")) cfg.model.spectral_response = m.at("spectral_response");
    if (m.contains("snr_right_db")) cfg.model.snr_right = detail::parse_snr(m.at("snr_right_db"), "model.snr_right_db");
    if (m.contains("snr_left_db")) cfg.model.snr_left = detail::parse_snr(m.at("snr_left_db"), "model.snr_left_db");
    resolve_kernel(cfg.model.kernel);
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::reject_unknown(s, {"method", "prior", "prior_weight", "dim", "center", "prior_precision", "penalty", "tau",
                               "tol", "max_iters", "tv_inner_iters", "bcd_beta"},
                           "solver");
    auto& o = cfg.solver;
    detail::read_key(s, "method", o.method, "solver");
    detail::read_key(s, "prior", o.prior, "solver");
    detail::read_key(s, "prior_weight", o.prior_weight, "solver");
    detail::read_key(s, "dim", o.dim, "solver");
    detail::read_key(s, "center", o.center, "solver");
    detail::read_optional(s, "prior_precision", o.prior_precision, "solver");
    detail::read_optional(s, "penalty", o.penalty, "solver");
    detail::read_key(s, "tau", o.tau, "solver");
    detail::read_key(s, "tol", o.tol, "solver");
    detail::read_key(s, "max_iters", o.max_iters, "solver");
    detail::read_key(s, "tv_inner_iters", o.tv_inner_iters, "solver");
    detail::read_key(s, "bcd_beta", o.bcd_beta, "solver");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) {
      fail(ErrorKind::kValidation, "config: 'seed' must be a non-negative integer");
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }

  const auto& o = cfg.solver;
  static const std::set<std::string> methods{"ml", "gaussian", "admm-image", "admm-frequency", "bcd"};
  if (methods.count(o.method) == 0) fail(ErrorKind::kValidation, "config: unknown solver.method '" + o.method + "'");
  static const std::set<std::string> priors{"none", "l1", "tv"};
  if (priors.count(o.prior) == 0) fail(ErrorKind::kValidation, "config: unknown solver.prior '" + o.prior + "'");
  if (o.dim < 1) fail(ErrorKind::kValidation, "config: solver.dim must be positive");
  if (o.prior_weight < 0.0) fail(ErrorKind::kValidation, "config: solver.prior_weight must be non-negative");
  if (o.prior_precision && !(*o.prior_precision > 0.0)) {
    fail(ErrorKind::kValidation, "config: solver.prior_precision must be positive");
  }
  if (o.penalty && !(*o.penalty > 0.0)) fail(ErrorKind::kValidation, "config: solver.penalty must be positive");
  if (o.tau < 0.0) fail(ErrorKind::kValidation, "config: solver.tau must be non-negative");
  if (!(o.tol >= 0.0)) fail(ErrorKind::kValidation, "config: solver.tol must be non-negative");
  if (o.max_iters < 1) fail(ErrorKind::kValidation, "config: solver.max_iters must be positive");
  if (o.tv_inner_iters < 1) fail(ErrorKind::kValidation, "config: solver.tv_inner_iters must be positive");
  if (!(o.bcd_beta > 0.0)) fail(ErrorKind::kValidation, "config: solver.bcd_beta must be positive");
  if (cfg.model.d_r < 1 || cfg.model.d_c < 1) fail(ErrorKind::kValidation, "config: decimation must be positive");
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "config") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kValidation, origin + ": " + e.what());
  }
  return parse_config(j);
}

/// Fully resolved configuration; the canonical form hashed into provenance records.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json model{{"kernel", cfg.model.kernel},
                       {"d_r", cfg.model.d_r},
                       {"d_c", cfg.model.d_c},
                       {"phase_r", cfg.model.phase_r},
                       {"phase_c", cfg.model.phase_c},
                       {"spectral_response", cfg.model.spectral_response},
                       {"snr_right_db", detail::snr_to_json(cfg.model.snr_right)},
                       {"snr_left_db", detail::snr_to_json(cfg.model.snr_left)}};
  const auto& o = cfg.solver;
  nlohmann::json solver{{"method", o.method},       {"prior", o.prior},
                        {"prior_weight", o.prior_weight},
                        {"dim", o.dim},             {"center", o.center},
                        {"tau", o.tau},             {"tol", o.tol},
                        {"max_iters", o.max_iters}, {"tv_inner_iters", o.tv_inner_iters},
                        {"bcd_beta", o.bcd_beta}};
  solver["prior_precision"] = o.prior_precision ? nlohmann::json(*o.prior_precision) : nlohmann::json(nullptr);
  solver["penalty"] = o.penalty ? nlohmann::json(*o.penalty) : nlohmann::json(nullptr);
  return {{"model", model}, {"solver", solver}, {"seed", cfg.seed}};
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_to_json(cfg).dump())));
  return buf;
}

/// Observation model for a reference cube with `bands` bands; covariances are left as identity.
inline ObservationModel build_model(const ModelConfig& m, Index bands) {
  ObservationModel model;
  model.blur_kernel = resolve_kernel(m.kernel);
  model.spectral_response = resolve_response(m.spectral_response, bands);
  model.decim_rows = m.d_r;
  model.decim_cols = m.d_c;
  model.phase_rows = m.phase_r;
  model.phase_cols = m.phase_c;
  model.noise_cov_left = Matrix::Identity(model.spectral_response.rows(), model.spectral_response.rows());
  model.noise_cov_right = Matrix::Identity(bands, bands);
  return model;
}

}  // namespace sylfuse
