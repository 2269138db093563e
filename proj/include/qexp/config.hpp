// Copyright 2026 The qexp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "qexp/core.hpp"
#include "qexp/spectral.hpp"
#include "qexp/superop.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace qexp {

enum class ExperimentKind {
  chi,
  lemma,
  gaussian_bound,
  decouple,
  theorem,
  concentration,
  matrix_coeff,
  double_sum,
};

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::chi: return "chi";
    case ExperimentKind::lemma: return "lemma";
    case ExperimentKind::gaussian_bound: return "gaussian-bound";
    case ExperimentKind::decouple: return "decouple";
    case ExperimentKind::theorem: return "theorem";
    case ExperimentKind::concentration: return "concentration";
    case ExperimentKind::matrix_coeff: return "matrix-coeff";
    case ExperimentKind::double_sum: return "double-sum";
  }
  return "?";
}

/// Grid description for one experiment. Coefficients come in one of three
/// shapes: a scalar list, a list of k x k blocks, or an n x n array.
struct ExperimentConfig {
  std::vector<Eigen::Index> n_grid;
  int n = 0;
  std::vector<Complex> coeffs;
  std::vector<ComplexMatrix> blocks;
  ComplexMatrix coeff_matrix;
  std::vector<double> p{1.0};
  double q = kInf;
  std::size_t trials = 200;
  std::size_t chi_trials = 500;
  std::uint64_t master_seed = 42;
  unsigned threads = 1;
  /// Statistical band, in standard errors.
  double sigma = 3.0;
  /// Relative residual for matrix-free operator norms.
  double norm_tol = 1e-6;
  int max_iter = 5000;
  /// theorem: also estimate the Gaussian benchmark at the largest N.
  bool gaussian_benchmark = false;

  /// Sum of |a_j|^2 (scalar mode) or sum |a_ij|^2 (double sums).
  double coeff_l2_squared() const {
    double s = 0.0;
    for (Complex c : coeffs) s += std::norm(c);
    return s;
  }
};

/// Fills in derived defaults (term count from coefficient shape, equal
/// weights 1/sqrt(n) when only n is given) and checks consistency.
inline void resolve_config(ExperimentConfig& cfg, ExperimentKind kind) {
  if (cfg.trials < 2) throw InvalidArgument("trials must be >= 2");
  if (cfg.chi_trials < 2) throw InvalidArgument("chi_trials must be >= 2");
  if (cfg.n_grid.empty()) throw InvalidArgument("N grid is empty");
  for (auto d : cfg.n_grid) {
    if (d < 1) throw InvalidArgument("N values must be >= 1");
  }
  if (!(cfg.q >= 1.0)) throw InvalidArgument("q must be >= 1");
  if (cfg.p.empty()) throw InvalidArgument("p list is empty");
  for (double p : cfg.p) {
    if (!(p >= 1.0)) throw InvalidArgument("p values must be >= 1");
  }
  if (cfg.n < 0) throw InvalidArgument("n must be >= 0");
  if (!(cfg.sigma > 0.0) || !(cfg.norm_tol > 0.0)) throw InvalidArgument("sigma and norm_tol must be positive");

  switch (kind) {
    case ExperimentKind::matrix_coeff: {
      if (!cfg.coeffs.empty() || cfg.coeff_matrix.size() != 0) {
        throw InvalidArgument("matrix-coeff takes block coefficients, not scalars");
      }
      if (cfg.blocks.empty()) {
        const int n = cfg.n > 0 ? cfg.n : 3;
        for (int j = 0; j < n; ++j) {
          ComplexMatrix e = ComplexMatrix::Zero(n, n);
          e(j, j) = 1.0;
          cfg.blocks.push_back(e);
        }
      }
      if (cfg.n != 0 && cfg.n != static_cast<int>(cfg.blocks.size())) {
        throw InvalidArgument("n = " + std::to_string(cfg.n) + " but " + std::to_string(cfg.blocks.size()) +
                              " blocks given");
      }
      cfg.n = static_cast<int>(cfg.blocks.size());
      const Eigen::Index k = cfg.blocks.front().rows();
      for (const auto& b : cfg.blocks) {
        if (b.rows() != k || b.cols() != k) throw InvalidArgument("inconsistent block dimensions");
      }
      break;
    }
    case ExperimentKind::double_sum: {
      if (!cfg.blocks.empty()) throw InvalidArgument("double-sum takes scalar coefficients only");
      if (cfg.coeff_matrix.size() == 0) {
        const int n = cfg.n > 0 ? cfg.n : 3;
        // Rank-one v v^T with v = (1, ..., 1)/sqrt(n).
        cfg.coeff_matrix = ComplexMatrix::Constant(n, n, Complex(1.0 / n, 0.0));
      }
      if (cfg.coeff_matrix.rows() != cfg.coeff_matrix.cols()) throw InvalidArgument("coefficient array must be square");
      if (cfg.n != 0 && cfg.n != cfg.coeff_matrix.rows()) {
        throw InvalidArgument("n = " + std::to_string(cfg.n) + " but the coefficient array is " +
                              dims_string(cfg.coeff_matrix.rows(), cfg.coeff_matrix.cols()));
      }
      cfg.n = static_cast<int>(cfg.coeff_matrix.rows());
      break;
    }
    case ExperimentKind::chi:
    case ExperimentKind::concentration:
      break;
    default: {
      if (!cfg.blocks.empty() || cfg.coeff_matrix.size() != 0) {
        throw InvalidArgument(std::string(to_string(kind)) + " takes a scalar coefficient list");
      }
      if (cfg.coeffs.empty()) {
        for (int j = 0; j < cfg.n; ++j) cfg.coeffs.emplace_back(1.0 / std::sqrt(static_cast<double>(cfg.n)), 0.0);
      }
      if (cfg.n != 0 && cfg.n != static_cast<int>(cfg.coeffs.size())) {
        throw InvalidArgument("n = " + std::to_string(cfg.n) + " but " + std::to_string(cfg.coeffs.size()) +
                              " coefficients given");
      }
      cfg.n = static_cast<int>(cfg.coeffs.size());
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json q_to_json(double q) { return std::isinf(q) ? nlohmann::json("inf") : nlohmann::json(q); }

inline double q_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "Inf") return kInf;
    throw InvalidArgument("q must be a number or \"inf\", got " + s);
  }
  return j.get<double>();
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["N"] = c.n_grid;
  j["n"] = c.n;
  if (!c.coeffs.empty()) {
    nlohmann::json a = nlohmann::json::array();
    for (Complex z : c.coeffs) a.push_back(z.imag() == 0.0 ? nlohmann::json(z.real()) : complex_to_json(z));
    j["coeffs"] = a;
  }
  if (!c.blocks.empty()) {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& m : c.blocks) b.push_back(matrix_to_json(m));
    j["blocks"] = b;
  }
  if (c.coeff_matrix.size() != 0) j["coeff_matrix"] = matrix_to_json(c.coeff_matrix);
  j["p"] = c.p;
  j["q"] = q_to_json(c.q);
  j["trials"] = c.trials;
  j["chi_trials"] = c.chi_trials;
  j["seed"] = c.master_seed;
  j["sigma"] = c.sigma;
  j["norm_tol"] = c.norm_tol;
  j["max_iter"] = c.max_iter;
  j["gaussian_benchmark"] = c.gaussian_benchmark;
  return j;
}

/// Reads a scalar coefficient list, a block list or an n x n array. The shape
/// is taken from the key: "coeffs", "blocks" or "coeff_matrix".
inline void apply_coefficients_json(ExperimentConfig& c, const nlohmann::json& j) {
  if (j.contains("coeffs")) {
    c.coeffs.clear();
    for (const auto& z : j.at("coeffs")) c.coeffs.push_back(complex_from_json(z));
  }
  if (j.contains("blocks")) {
    c.blocks.clear();
    for (const auto& b : j.at("blocks")) c.blocks.push_back(matrix_from_json(b));
  }
  if (j.contains("coeff_matrix")) c.coeff_matrix = matrix_from_json(j.at("coeff_matrix"));
}

/// Overlays the keys present in `j` onto `c`. Unknown keys are rejected.
inline void apply_config_json(ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  static const char* known[] = {"N",     "n",          "coeffs", "blocks",   "coeff_matrix", "p",
                                "q",     "trials",     "chi_trials", "seed", "threads",      "sigma",
                                "norm_tol", "max_iter", "gaussian_benchmark"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw InvalidArgument("unknown config key '" + it.key() + "'");
  }
  if (j.contains("N")) {
    const auto& v = j.at("N");
    c.n_grid = v.is_array() ? v.get<std::vector<Eigen::Index>>() : std::vector<Eigen::Index>{v.get<Eigen::Index>()};
  }
  if (j.contains("n")) c.n = j.at("n").get<int>();
  apply_coefficients_json(c, j);
  if (j.contains("p")) {
    const auto& v = j.at("p");
    c.p = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
  }
  if (j.contains("q")) c.q = q_from_json(j.at("q"));
  if (j.contains("trials")) c.trials = j.at("trials").get<std::size_t>();
  if (j.contains("chi_trials")) c.chi_trials = j.at("chi_trials").get<std::size_t>();
  if (j.contains("seed")) c.master_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
  if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
  if (j.contains("norm_tol")) c.norm_tol = j.at("norm_tol").get<double>();
  if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<int>();
  if (j.contains("gaussian_benchmark")) c.gaussian_benchmark = j.at("gaussian_benchmark").get<bool>();
}

/// Built-in grids. The quick profile keeps every experiment to seconds so the
/// whole suite runs in CI.
inline ExperimentConfig default_config(ExperimentKind kind, bool quick) {
  ExperimentConfig c;
  switch (kind) {
    case ExperimentKind::chi:
      c.n_grid = quick ? std::vector<Eigen::Index>{2, 4, 8, 16} : std::vector<Eigen::Index>{2, 4, 8, 16, 32, 64, 128};
      c.trials = quick ? 400 : 1000;
      break;
    case ExperimentKind::lemma:
      c.n_grid = quick ? std::vector<Eigen::Index>{4, 8} : std::vector<Eigen::Index>{8, 16, 32};
      c.n = 2;
      c.p = {1.0, 2.0};
      c.trials = quick ? 60 : 300;
      c.chi_trials = quick ? 200 : 1000;
      break;
    case ExperimentKind::gaussian_bound:
      c.n_grid = quick ? std::vector<Eigen::Index>{4} : std::vector<Eigen::Index>{4, 8};
      c.coeffs = {1.0 / std::sqrt(14.0), 2.0 / std::sqrt(14.0), 3.0 / std::sqrt(14.0)};
      c.p = {2.0, 4.0};
      c.trials = quick ? 200 : 1000;
      break;
    case ExperimentKind::decouple:
      c.n_grid = {4};
      c.n = 2;
      c.p = {1.0, 2.0};
      c.trials = quick ? 200 : 1000;
      break;
    case ExperimentKind::theorem:
      c.n_grid = quick ? std::vector<Eigen::Index>{8, 16, 32} : std::vector<Eigen::Index>{16, 32, 64, 128};
      c.n = 4;
      c.trials = quick ? 30 : 200;
      c.chi_trials = quick ? 200 : 500;
      break;
    case ExperimentKind::concentration:
      c.n_grid = quick ? std::vector<Eigen::Index>{16, 32, 64} : std::vector<Eigen::Index>{32, 64, 128, 256};
      c.p = {1.0, 2.0, 4.0, 8.0};
      c.trials = quick ? 100 : 400;
      break;
    case ExperimentKind::matrix_coeff:
      c.n_grid = quick ? std::vector<Eigen::Index>{4, 8} : std::vector<Eigen::Index>{8, 16, 32};
      c.n = quick ? 2 : 3;
      c.trials = quick ? 30 : 100;
      c.chi_trials = quick ? 200 : 500;
      break;
    case ExperimentKind::double_sum:
      c.n_grid = quick ? std::vector<Eigen::Index>{8} : std::vector<Eigen::Index>{16, 32};
      c.n = 3;
      c.trials = quick ? 30 : 100;
      c.chi_trials = quick ? 200 : 500;
      break;
  }
  return c;
}

}  // namespace qexp
