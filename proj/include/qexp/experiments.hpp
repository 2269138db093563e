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

#include "qexp/chi.hpp"
#include "qexp/config.hpp"
#include "qexp/csv.hpp"
#include "qexp/parallel.hpp"
#include "qexp/sampling.hpp"
#include "qexp/seed_stream.hpp"
#include "qexp/spectral.hpp"
#include "qexp/stats.hpp"
#include "qexp/superop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace qexp {

// Stream layout. Every experiment derives its randomness from the master seed
// through these families, so draws are shared where two experiments look at
// the same object: the Haar unitaries U_j at (N, trial) are the same in the
// lemma, theorem, matrix-coefficient and double-sum runs, and so is chi_N.
namespace family {
inline constexpr std::uint64_t kHaar = 1;         // (N, trial, j)
inline constexpr std::uint64_t kGaussLeft = 2;    // (N, trial, j)
inline constexpr std::uint64_t kGaussRight = 3;   // (N, trial, j)
inline constexpr std::uint64_t kChi = 4;          // (N)
inline constexpr std::uint64_t kStart = 5;        // (N, trial, side)
inline constexpr std::uint64_t kMoment = 6;       // (N, trial)
inline constexpr std::uint64_t kConcentration = 7;  // (N, trial)
inline constexpr std::uint64_t kRotA = 8;         // (N, trial, j)
inline constexpr std::uint64_t kRotB = 9;         // (N, trial, j)
inline constexpr std::uint64_t kTensorMean = 10;  // (N)
inline constexpr std::uint64_t kChiSpectral = 11;  // (N)
}  // namespace family

namespace detail {

inline std::uint64_t u64(Eigen::Index v) { return static_cast<std::uint64_t>(v); }

inline std::vector<ComplexMatrix> haar_factors(const SeedStream& root, Eigen::Index n, std::size_t t, int terms,
                                               std::vector<FactorSource>* sources = nullptr) {
  std::vector<ComplexMatrix> us;
  for (int j = 0; j < terms; ++j) {
    const SeedStream s = root.child({family::kHaar, u64(n), t, static_cast<std::uint64_t>(j)});
    us.push_back(sample_haar_unitary(n, s));
    if (sources) sources->push_back(FactorSource::haar(s));
  }
  return us;
}

inline std::vector<ComplexMatrix> ginibre_factors(const SeedStream& root, std::uint64_t fam, Eigen::Index n,
                                                  std::size_t t, int terms) {
  std::vector<ComplexMatrix> ys;
  for (int j = 0; j < terms; ++j) {
    ys.push_back(sample_ginibre(n, root.child({fam, u64(n), t, static_cast<std::uint64_t>(j)})));
  }
  return ys;
}

inline SeedStream start_stream(const SeedStream& root, Eigen::Index n, std::size_t t, std::uint64_t side) {
  return root.child({family::kStart, u64(n), t, side});
}

inline double norm_of(const TensorSumOperator& s, const ExperimentConfig& cfg, const SeedStream& start) {
  NormRequest req;
  req.q = cfg.q;
  req.tol = cfg.norm_tol;
  req.max_iter = cfg.max_iter;
  req.start = start;
  return schatten_norm(s, req);
}

inline TensorSumOperator empty_operator(Eigen::Index n, bool traceless) {
  return TensorSumOperator(n, {}, std::vector<Complex>{}, traceless);
}

inline TensorSumOperator uu_operator(const std::vector<Complex>& coeffs, const std::vector<ComplexMatrix>& us,
                                     bool traceless, Eigen::Index n) {
  return us.empty() ? empty_operator(n, traceless) : build_uu_operator(coeffs, us, traceless);
}

inline TensorSumOperator gaussian_operator(const std::vector<Complex>& coeffs, const std::vector<ComplexMatrix>& ls,
                                           const std::vector<ComplexMatrix>& rs, bool traceless, Eigen::Index n) {
  return ls.empty() ? empty_operator(n, traceless) : build_gaussian_operator(coeffs, ls, rs, traceless);
}

inline std::vector<double> powers(const std::vector<double>& xs, double p) {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [p](double x) { return std::pow(x, p); });
  return out;
}

template <class Fn>
std::vector<double> per_trial(std::size_t trials, unsigned threads, Fn&& fn) {
  std::vector<double> out(trials);
  parallel_for(trials, threads, [&](std::size_t t) { out[t] = fn(t); });
  return out;
}

/// (a/b)^(1/p) with delta-method standard error for independent a, b.
inline EstimateResult ratio_root(const EstimateResult& a, const EstimateResult& b, double p) {
  EstimateResult r;
  r.trials = std::min(a.trials, b.trials);
  if (a.mean <= 0.0 || b.mean <= 0.0) return r;
  r.mean = std::pow(a.mean / b.mean, 1.0 / p);
  r.std_error = r.mean / p * std::hypot(a.std_error / a.mean, b.std_error / b.mean);
  r.ci95_halfwidth = 1.96 * r.std_error;
  return r;
}

/// Standard error of 2/chi.
inline double inverse_chi_stderr(const ChiEstimate& c) { return 2.0 * c.std_error / (c.chi_hat * c.chi_hat); }

inline ChiEstimate chi_for(const SeedStream& root, Eigen::Index n, const ExperimentConfig& cfg) {
  return estimate_chi_entrywise(n, cfg.chi_trials, root.child({family::kChi, u64(n)}), cfg.threads);
}

inline bool all_zero(const std::vector<Complex>& a) {
  return std::all_of(a.begin(), a.end(), [](Complex z) { return z == Complex(0.0); });
}

inline void require_operator_norm(const ExperimentConfig& cfg, const char* who) {
  if (!std::isinf(cfg.q)) throw InvalidArgument(std::string(who) + ": only q = inf is supported");
}

inline bool is_even_integer(double p) { return p >= 2.0 && p == std::floor(p) && std::fmod(p, 2.0) == 0.0; }

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace detail

// ---------------------------------------------------------------------------
// chi_N by three estimators

struct ChiRecord {
  ChiEstimate estimate;
  /// Largest pairwise disagreement with the other estimators at this N, in
  /// combined standard errors.
  double max_disagreement_sigma = 0.0;
  bool pass = true;
};

struct ChiResult {
  ExperimentConfig config;
  std::vector<ChiRecord> records;
  bool passed() const {
    return std::all_of(records.begin(), records.end(), [](const ChiRecord& r) { return r.pass; });
  }
};

/// Spectral estimator runs only where the densified twirl (N^2 x N^2) is
/// cheap, N <= this.
inline constexpr Eigen::Index kChiSpectralMaxN = 8;

inline ChiResult run_chi_estimates(ExperimentConfig cfg) {
  resolve_config(cfg, ExperimentKind::chi);
  const SeedStream root(cfg.master_seed);
  ChiResult res{cfg, {}};
  for (Eigen::Index n : cfg.n_grid) {
    std::vector<ChiRecord> recs;
    const SeedStream s = root.child({family::kChi, detail::u64(n)});
    recs.push_back({estimate_chi_entrywise(n, cfg.trials, s, cfg.threads)});
    recs.push_back({estimate_chi_trace_formula(n, cfg.trials, s, cfg.threads)});
    const bool shared_ok = std::abs(recs[0].estimate.chi_hat - recs[1].estimate.chi_hat) <= 1e-10;
    if (n <= kChiSpectralMaxN) {
      recs.push_back({estimate_chi_spectral(n, cfg.trials, root.child({family::kChiSpectral, detail::u64(n)}),
                                            cfg.threads)});
    }
    for (std::size_t i = 0; i < recs.size(); ++i) {
      auto& r = recs[i];
      const auto& e = r.estimate;
      r.pass = e.chi_hat > 0.0 && e.chi_hat <= 1.0 + cfg.sigma * e.std_error && shared_ok;
      for (std::size_t j = 0; j < recs.size(); ++j) {
        if (i == j) continue;
        const auto& o = recs[j].estimate;
        const double se = std::hypot(e.std_error, o.std_error);
        const double gap = std::abs(e.chi_hat - o.chi_hat);
        // Entrywise and trace formula share samples; their gap is rounding.
        const double sig = se > 0.0 ? gap / se : 0.0;
        r.max_disagreement_sigma = std::max(r.max_disagreement_sigma, sig);
        if (gap > cfg.sigma * se && gap > 1e-10) r.pass = false;
      }
    }
    for (auto& r : recs) res.records.push_back(r);
  }
  return res;
}

inline CsvTable to_csv(const ChiResult& r) {
  CsvTable t({"N", "method", "trials", "chi_hat", "stderr", "ci95", "max_disagreement_sigma", "pass"});
  for (const auto& rec : r.records) {
    const auto& e = rec.estimate;
    t.add_row({e.n, to_string(e.method), e.trials, e.chi_hat, e.std_error, 1.96 * e.std_error,
               rec.max_disagreement_sigma, rec.pass});
  }
  return t;
}

// ---------------------------------------------------------------------------
// U (x) conj U versus the Gaussian tensor sum

struct LemmaRecord {
  Eigen::Index n_dim = 0;
  double p = 1.0;
  /// E ||sum a_j U_j (x) conj U_j (1 - P)||_q^p
  EstimateResult lhs;
  /// E ||sum a_j Y_j (x) conj Y'_j||_q^p
  EstimateResult rhs;
  EstimateResult ratio_root;
  ChiEstimate chi;
  /// 2 / chi_hat
  double bound = 0.0;
  double bound_stderr = 0.0;
  /// ratio_root - bound in combined standard errors (negative is good).
  double excess_sigma = 0.0;
  bool pass = true;
};

struct LemmaResult {
  ExperimentConfig config;
  std::vector<LemmaRecord> records;
  bool passed() const {
    return std::all_of(records.begin(), records.end(), [](const LemmaRecord& r) { return r.pass; });
  }
};

inline LemmaResult run_lemma_comparison(ExperimentConfig cfg) {
  resolve_config(cfg, ExperimentKind::lemma);
  if (detail::all_zero(cfg.coeffs)) {
    throw DegenerateConfig("lemma: all coefficients are zero, both sides vanish and the ratio is undefined");
  }
  const SeedStream root(cfg.master_seed);
  LemmaResult res{cfg, {}};
  for (Eigen::Index n : cfg.n_grid) {
    const ChiEstimate chi = detail::chi_for(root, n, cfg);
    std::vector<double> lhs(cfg.trials), rhs(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
      const auto us = detail::haar_factors(root, n, t, cfg.n);
      lhs[t] = detail::norm_of(build_uu_operator(cfg.coeffs, us, true), cfg, detail::start_stream(root, n, t, 0));
      const auto ys = detail::ginibre_factors(root, family::kGaussLeft, n, t, cfg.n);
      const auto yps = detail::ginibre_factors(root, family::kGaussRight, n, t, cfg.n);
      rhs[t] = detail::norm_of(build_gaussian_operator(cfg.coeffs, ys, yps, false), cfg,
                               detail::start_stream(root, n, t, 1));
    });
    for (double p : cfg.p) {
      LemmaRecord r;
      r.n_dim = n;
      r.p = p;
      r.lhs = estimate_mean(detail::powers(lhs, p));
      r.rhs = estimate_mean(detail::powers(rhs, p));
      if (!(r.rhs.mean > 0.0)) throw DegenerateConfig("lemma: Gaussian side has zero mean");
      r.ratio_root = detail::ratio_root(r.lhs, r.rhs, p);
      r.chi = chi;
      r.bound = 2.0 / chi.chi_hat;
      r.bound_stderr = detail::inverse_chi_stderr(chi);
      const double se = std::hypot(r.ratio_root.std_error, r.bound_stderr);
      r.excess_sigma = se > 0.0 ? (r.ratio_root.mean - r.bound) / se : 0.0;
      r.pass = r.ratio_root.mean <= r.bound + cfg.sigma * se;
      res.records.push_back(r);
    }
  }
  return res;
}

inline CsvTable to_csv(const LemmaResult& r) {
  CsvTable t({"N", "n", "p", "q", "trials", "lhs_mean", "lhs_stderr", "rhs_mean", "rhs_stderr", "ratio_root",
              "ratio_root_stderr", "chi_hat", "chi_stderr", "bound", "bound_stderr", "excess_sigma", "pass"});
  for (const auto& x : r.records) {
    t.add_row({x.n_dim, r.config.n, x.p, r.config.q, x.lhs.trials, x.lhs.mean, x.lhs.std_error, x.rhs.mean,
               x.rhs.std_error, x.ratio_root.mean, x.ratio_root.std_error, x.chi.chi_hat, x.chi.std_error, x.bound,
               x.bound_stderr, x.excess_sigma, x.pass});
  }
  return t;
}

// ---------------------------------------------------------------------------
// E tr|sum a_j Y_j (x) conj Y'_j|^p <= (E tr|Y|^p)^2 (sum |a_j|^2)^(p/2)

struct GaussianBoundRecord {
  Eigen::Index n_dim = 0;
  int p = 2;
  EstimateResult lhs;
  /// E tr|Y|^p, the single-matrix moment feeding the right side.
  EstimateResult single_moment;
  EstimateResult rhs;
  /// (sum |a_j|^2) N^2 for p = 2, NaN otherwise.
  double closed_form = detail::kNaN;
  /// (rhs - lhs) in combined standard errors; inf when both sides vanish.
  double margin_sigma = 0.0;
  bool closed_form_pass = true;
  bool pass = true;
};

struct GaussianBoundResult {
  ExperimentConfig config;
  std::vector<GaussianBoundRecord> records;
  bool passed() const {
    return std::all_of(records.begin(), records.end(),
                       [](const GaussianBoundRecord& r) { return r.pass && r.closed_form_pass; });
  }
};

inline GaussianBoundResult run_gaussian_moment_bound(ExperimentConfig cfg) {
  resolve_config(cfg, ExperimentKind::gaussian_bound);
  for (double p : cfg.p) {
    if (!detail::is_even_integer(p)) {
      throw InvalidArgument("gaussian-bound: p = " + format_number(p) + " is unsupported (need an even p >= 2)");
    }
  }
  const SeedStream root(cfg.master_seed);
  const double a2 = cfg.coeff_l2_squared();
  GaussianBoundResult res{cfg, {}};
  for (Eigen::Index n : cfg.n_grid) {
    const Eigen::Index d = n * n;
    if (d > kDefaultDensifyCap) {
      throw SizeCapExceeded("gaussian-bound: N = " + std::to_string(n) + " needs a dense " + dims_string(d, d) +
                            " operator");
    }
    // Per trial: singular values of the tensor sum and of one independent Y.
    std::vector<Eigen::VectorXd> sv(cfg.trials), sy(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
      const auto ys = detail::ginibre_factors(root, family::kGaussLeft, n, t, cfg.n);
      const auto yps = detail::ginibre_factors(root, family::kGaussRight, n, t, cfg.n);
      const auto g = detail::gaussian_operator(cfg.coeffs, ys, yps, false, n);
      sv[t] = singular_values(densify(g));
      sy[t] = singular_values(sample_ginibre(n, root.child({family::kMoment, detail::u64(n), t})));
    });
    for (double pd : cfg.p) {
      const int p = static_cast<int>(pd);
      auto trace_pow = [p](const Eigen::VectorXd& s) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i) acc += std::pow(s(i), p);
        return acc;
      };
      std::vector<double> l(cfg.trials), m(cfg.trials);
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        l[t] = trace_pow(sv[t]);
        m[t] = trace_pow(sy[t]);
      }
      GaussianBoundRecord r;
      r.n_dim = n;
      r.p = p;
      r.lhs = estimate_mean(l);
      r.single_moment = estimate_mean(m);
      const double scale = std::pow(a2, p / 2.0);
      r.rhs.trials = cfg.trials;
      r.rhs.mean = r.single_moment.mean * r.single_moment.mean * scale;
      r.rhs.std_error = 2.0 * r.single_moment.mean * r.single_moment.std_error * scale;
      r.rhs.ci95_halfwidth = 1.96 * r.rhs.std_error;
      const double se = combined_stderr(r.lhs, r.rhs);
      r.margin_sigma = se > 0.0 ? (r.rhs.mean - r.lhs.mean) / se : std::numeric_limits<double>::infinity();
      r.pass = r.lhs.mean <= r.rhs.mean + cfg.sigma * se;
      if (p == 2) {
        r.closed_form = a2 * static_cast<double>(n * n);
        r.closed_form_pass = std::abs(r.lhs.mean - r.closed_form) <= cfg.sigma * r.lhs.std_error + 1e-12 * r.closed_form;
      }
      res.records.push_back(r);
    }
  }
  return res;
}

inline CsvTable to_csv(const GaussianBoundResult& r) {
  CsvTable t({"N", "n", "p", "trials", "lhs_mean", "lhs_stderr", "trace_moment_mean", "trace_moment_stderr",
              "rhs_mean", "rhs_stderr", "margin_sigma", "closed_form", "closed_form_pass", "pass"});
  for (const auto& x : r.records) {
    t.add_row({x.n_dim, r.config.n, x.p, x.lhs.trials, x.lhs.mean, x.lhs.std_error, x.single_moment.mean,
               x.single_moment.std_error, x.rhs.mean, x.rhs.std_error, x.margin_sigma, x.closed_form,
               x.closed_form_pass, x.pass});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Decoupling

struct DecoupleRecord {
  Eigen::Index n_dim = 0;
  double p = 1.0;
  /// E ||sum a_j Y_j (x) conj Y_j (1 - P)||_q^p
  EstimateResult quadratic;
  /// E ||sum a_j Y_j (x) conj Y'_j (1 - P)||_q^p
  EstimateResult decoupled;
  double factor = 2.0;
  bool inequality_pass = true;
  /// First and second moments of ||sum a_j Y_j (x) conj Y'_j||_q for the pair
  /// (Y, Y') and for the rotated pair ((Y + Y')/sqrt 2, (Y - Y')/sqrt 2).
  EstimateResult direct_m1, rotated_m1, direct_m2, rotated_m2;
  bool moment_match_pass = true;
  /// ||mean of (Y (x) conj Y)(I - P)||_F at trials and 4 x trials.
  double tensor_residual = detail::kNaN;
  double tensor_residual_4x = detail::kNaN;
  bool pass = true;
};

struct DecoupleResult {
  ExperimentConfig config;
  std::vector<DecoupleRecord> records;
  bool passed() const {
    return std::all_of(records.begin(), records.end(), [](const DecoupleRecord& r) { return r.pass; });
  }
};

/// Largest N for which the tensor-mean diagnostic (N^2 x N^2 dense) runs.
inline constexpr Eigen::Index kTensorMeanMaxN = 16;

inline DecoupleResult run_decoupling_check(ExperimentConfig cfg) {
  resolve_config(cfg, ExperimentKind::decouple);
  const SeedStream root(cfg.master_seed);
  DecoupleResult res{cfg, {}};
  const double r2 = 1.0 / std::sqrt(2.0);
  for (Eigen::Index n : cfg.n_grid) {
    std::vector<double> quad(cfg.trials), dec(cfg.trials), direct(cfg.trials), rotated(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
      const auto ys = detail::ginibre_factors(root, family::kGaussLeft, n, t, cfg.n);
      const auto yps = detail::ginibre_factors(root, family::kGaussRight, n, t, cfg.n);
      quad[t] = detail::norm_of(detail::gaussian_operator(cfg.coeffs, ys, ys, true, n), cfg,
                                detail::start_stream(root, n, t, 2));
      dec[t] = detail::norm_of(detail::gaussian_operator(cfg.coeffs, ys, yps, true, n), cfg,
                               detail::start_stream(root, n, t, 3));
      direct[t] = detail::norm_of(detail::gaussian_operator(cfg.coeffs, ys, yps, false, n), cfg,
                                  detail::start_stream(root, n, t, 1));
      const auto as = detail::ginibre_factors(root, family::kRotA, n, t, cfg.n);
      const auto bs = detail::ginibre_factors(root, family::kRotB, n, t, cfg.n);
      std::vector<ComplexMatrix> plus, minus;
      for (int j = 0; j < cfg.n; ++j) {
        plus.push_back(r2 * (as[j] + bs[j]));
        minus.push_back(r2 * (as[j] - bs[j]));
      }
      rotated[t] = detail::norm_of(detail::gaussian_operator(cfg.coeffs, plus, minus, false, n), cfg,
                                   detail::start_stream(root, n, t, 4));
    });
    DecoupleRecord base;
    base.n_dim = n;
    base.direct_m1 = estimate_mean(direct);
    base.rotated_m1 = estimate_mean(rotated);
    base.direct_m2 = estimate_mean(detail::powers(direct, 2.0));
    base.rotated_m2 = estimate_mean(detail::powers(rotated, 2.0));
    auto close = [&](const EstimateResult& a, const EstimateResult& b) {
      return std::abs(a.mean - b.mean) <= cfg.sigma * combined_stderr(a, b);
    };
    base.moment_match_pass = close(base.direct_m1, base.rotated_m1) && close(base.direct_m2, base.rotated_m2);
    if (n <= kTensorMeanMaxN) {
      const SeedStream s = root.child({family::kTensorMean, detail::u64(n)});
      base.tensor_residual = estimate_gaussian_tensor_mean(n, cfg.trials, s, true, cfg.threads).residual_fro;
      base.tensor_residual_4x = estimate_gaussian_tensor_mean(n, 4 * cfg.trials, s, true, cfg.threads).residual_fro;
    }
    for (double p : cfg.p) {
      DecoupleRecord r = base;
      r.p = p;
      r.factor = std::pow(2.0, p);
      r.quadratic = estimate_mean(detail::powers(quad, p));
      r.decoupled = estimate_mean(detail::powers(dec, p));
      const double se = std::hypot(r.quadratic.std_error, r.factor * r.decoupled.std_error);
      r.inequality_pass = r.quadratic.mean <= r.factor * r.decoupled.mean + cfg.sigma * se;
      r.pass = r.inequality_pass && r.moment_match_pass;
      res.records.push_back(r);
    }
  }
  return res;
}

inline CsvTable to_csv(const DecoupleResult& r) {
  CsvTable t({"N", "n", "p", "q", "trials", "quadratic_mean", "quadratic_stderr", "decoupled_mean",
              "decoupled_stderr", "factor", "inequality_pass", "direct_m1", "direct_m1_stderr", "rotated_m1",
              "rotated_m1_stderr", "direct_m2", "direct_m2_stderr", "rotated_m2", "rotated_m2_stderr",
              "moment_match_pass", "tensor_residual", "tensor_residual_4x", "pass"});
  for (const auto& x : r.records) {
    t.add_row({x.n_dim, r.config.n, x.p, r.config.q, r.config.trials, x.quadratic.mean, x.quadratic.std_error,
               x.decoupled.mean, x.decoupled.std_error, x.factor, x.inequality_pass, x.direct_m1.mean,
               x.direct_m1.std_error, x.rotated_m1.mean, x.rotated_m1.std_error, x.direct_m2.mean,
               x.direct_m2.std_error, x.rotated_m2.mean, x.rotated_m2.std_error, x.moment_match_pass,
               x.tensor_residual, x.tensor_residual_4x, x.pass});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Operator norm of the random tensor sum as N grows

/// Tail probe parameter: seeds above e^(2 eps) R with R = e^eps * mean count
/// as tail events.
inline constexpr double kTailEpsilon = 0.5;
/// Largest tail fraction accepted at N >= kTailMinN.
inline constexpr double kTailMaxFraction = 0.2;
inline constexpr Eigen::Index kTailMinN = 64;

struct TheoremRecord {
  Eigen::Index n_dim = 0;
  EstimateResult mean_norm;
  double max_norm = 0.0;
  ChiEstimate chi;
  double tail_threshold = 0.0;
  double tail_fraction = 0.0;
  /// N^-2, the Chebyshev rate the tail fraction is compared against.
  double chebyshev_rate = 0.0;
  bool tail_pass = true;
  /// mean_norm did not rise above the previous grid point by more than 2
  /// combined standard errors. Recorded, not asserted.
  bool trend_ok = true;
  /// Gaussian benchmark, largest N only (NaN elsewhere or when disabled).
  EstimateResult gaussian;
  double gaussian_bound = detail::kNaN;
  bool gaussian_pass = true;
  bool pass = true;
};

struct TheoremResult {
  ExperimentConfig config;
  std::vector<TheoremRecord> records;
  double chi_min = 0.0;
  double c_emp = 0.0;
  double bound = 0.0;
  /// Per seed: largest norm over the grid, and where it was attained.
  std::vector<double> seed_max;
  std::vector<Eigen::Index> seed_argmax;
  bool passed() const {
    return std::all_of(records.begin(), records.end(), [](const TheoremRecord& r) { return r.pass; });
  }
};

inline TheoremResult run_theorem_sweep(ExperimentConfig cfg) {
  resolve_config(cfg, ExperimentKind::theorem);
  detail::require_operator_norm(cfg, "theorem");
  const SeedStream root(cfg.master_seed);
  TheoremResult res{cfg, {}};
  res.seed_max.assign(cfg.trials, 0.0);
  res.seed_argmax.assign(cfg.trials, 0);
  std::vector<std::vector<double>> samples;
  for (Eigen::Index n : cfg.n_grid) {
    TheoremRecord r;
    r.n_dim = n;
    r.chi = detail::chi_for(root, n, cfg);
    samples.push_back(detail::per_trial(cfg.trials, cfg.threads, [&](std::size_t t) {
      const auto us = detail::haar_factors(root, n, t, cfg.n);
      return detail::norm_of(detail::uu_operator(cfg.coeffs, us, true, n), cfg, detail::start_stream(root, n, t, 0));
    }));
    const auto& xs = samples.back();
    r.mean_norm = estimate_mean(xs);
    r.max_norm = *std::max_element(xs.begin(), xs.end());
    r.tail_threshold = std::exp(2.0 * kTailEpsilon) * std::exp(kTailEpsilon) * r.mean_norm.mean;
    const auto above = std::count_if(xs.begin(), xs.end(), [&](double x) { return x > r.tail_threshold; });
    r.tail_fraction = static_cast<double>(above) / static_cast<double>(xs.size());
    r.chebyshev_rate = 1.0 / static_cast<double>(n * n);
    r.tail_pass = n < kTailMinN || r.tail_fraction <= kTailMaxFraction;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      if (xs[t] > res.seed_max[t]) {
        res.seed_max[t] = xs[t];
        res.seed_argmax[t] = n;
      }
    }
    if (!res.records.empty()) {
      const auto& prev = res.records.back().mean_norm;
      r.trend_ok = r.mean_norm.mean <= prev.mean + 2.0 * combined_stderr(r.mean_norm, prev) + 1e-12 * prev.mean;
    }
    res.records.push_back(r);
  }
  res.chi_min = std::numeric_limits<double>::infinity();
  for (const auto& r : res.records) res.chi_min = std::min(res.chi_min, r.chi.chi_hat);
  res.c_emp = 2.0 / res.chi_min;
  res.bound = 4.0 * res.c_emp * std::sqrt(cfg.coeff_l2_squared());

  if (cfg.gaussian_benchmark && cfg.n > 0) {
    auto& last = res.records.back();
    const Eigen::Index n = last.n_dim;
    last.gaussian = estimate_mean(detail::per_trial(cfg.trials, cfg.threads, [&](std::size_t t) {
      const auto ys = detail::ginibre_factors(root, family::kGaussLeft, n, t, cfg.n);
      const auto yps = detail::ginibre_factors(root, family::kGaussRight, n, t, cfg.n);
      return detail::norm_of(build_gaussian_operator(cfg.coeffs, ys, yps, false), cfg,
                             detail::start_stream(root, n, t, 1));
    }));
    const double k = 2.0 / last.chi.chi_hat;
    const double se = std::hypot(last.mean_norm.std_error,
                                 std::hypot(k * last.gaussian.std_error,
                                            last.gaussian.mean * detail::inverse_chi_stderr(last.chi)));
    last.gaussian_bound = last.gaussian.mean * k;
    last.gaussian_pass = last.mean_norm.mean <= last.gaussian_bound + cfg.sigma * se;
  }
  for (auto& r : res.records) r.pass = r.mean_norm.mean <= res.bound && r.tail_pass && r.gaussian_pass;
  return res;
}

inline CsvTable to_csv(const TheoremResult& r) {
  CsvTable t({"N", "n", "trials", "mean_norm", "stderr", "ci95", "max_norm", "tail_threshold", "tail_fraction",
              "chebyshev_rate", "tail_pass", "chi_hat", "chi_stderr", "chi_min", "c_emp", "bound", "trend_ok",
              "gaussian_mean", "gaussian_stderr", "gaussian_bound", "pass"});
  for (const auto& x : r.records) {
    const bool bench = !std::isnan(x.gaussian_bound);
    t.add_row({x.n_dim, r.config.n, x.mean_norm.trials, x.mean_norm.mean, x.mean_norm.std_error,
               x.mean_norm.ci95_halfwidth, x.max_norm, x.tail_threshold, x.tail_fraction, x.chebyshev_rate,
               x.tail_pass, x.chi.chi_hat, x.chi.std_error, r.chi_min, r.c_emp, r.bound, x.trend_ok,
               bench ? x.gaussian.mean : detail::kNaN, bench ? x.gaussian.std_error : detail::kNaN, x.gaussian_bound,
               x.pass});
  }
  return t;
}

inline CsvTable seed_max_csv(const TheoremResult& r) {
  CsvTable t({"trial", "max_norm", "argmax_N"});
  for (std::size_t i = 0; i < r.seed_max.size(); ++i) t.add_row({i, r.seed_max[i], r.seed_argmax[i]});
  return t;
}

// ---------------------------------------------------------------------------
// Concentration of ||Y||

struct ConcentrationRecord {
  Eigen::Index n_dim = 0;
  double p = 1.0;
  /// (E ||Y||^p)^(1/p)
  EstimateResult moment_root;
  double sqrt_p_over_n = 0.0;
  /// E ||Y|| - 2 at this N (repeated across p).
  EstimateResult eps;
  /// |eps(N)| did not grow over the previous N by more than 2 combined
  /// standard errors.
  bool eps_trend_ok = true;
};

struct ConcentrationResult {
  ExperimentConfig config;
  std::vector<ConcentrationRecord> records;
  double beta_hat = 0.0;
  /// Per-N sample norms, kept so callers can cross-check.
  std::vector<std::vector<double>> norms;
  bool passed() const {
    return std::all_of(records.begin(), records.end(), [](const ConcentrationRecord& r) { return r.eps_trend_ok; });
  }
};

inline ConcentrationResult run_concentration_probe(ExperimentConfig cfg) {
  resolve_config(cfg, ExperimentKind::concentration);
  const SeedStream root(cfg.master_seed);
  ConcentrationResult res{cfg, {}};
  EstimateResult prev_eps;
  bool have_prev = false;
  for (Eigen::Index n : cfg.n_grid) {
    res.norms.push_back(detail::per_trial(cfg.trials, cfg.threads, [&](std::size_t t) {
      return operator_norm_matrix(sample_ginibre(n, root.child({family::kConcentration, detail::u64(n), t})));
    }));
    const auto& xs = res.norms.back();
    EstimateResult eps = estimate_mean(xs);
    eps.mean -= 2.0;
    const bool trend = !have_prev || std::abs(eps.mean) <= std::abs(prev_eps.mean) + 2.0 * combined_stderr(eps, prev_eps);
    for (double p : cfg.p) {
      ConcentrationRecord r;
      r.n_dim = n;
      r.p = p;
      r.moment_root = p == 1.0 ? estimate_mean(xs) : root_of_mean(estimate_mean(detail::powers(xs, p)), p);
      r.sqrt_p_over_n = std::sqrt(p / static_cast<double>(n));
      r.eps = eps;
      r.eps_trend_ok = trend;
      res.records.push_back(r);
    }
    prev_eps = eps;
    have_prev = true;
  }
  // Baseline: median over p of the estimates at the largest N.
  const Eigen::Index nmax = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
  std::vector<double> top;
  for (const auto& r : res.records) {
    if (r.n_dim == nmax) top.push_back(r.moment_root.mean);
  }
  std::sort(top.begin(), top.end());
  const std::size_t h = top.size() / 2;
  const double median = top.size() % 2 ? top[h] : 0.5 * (top[h - 1] + top[h]);
  double sxy = 0.0, sxx = 0.0;
  for (const auto& r : res.records) {
    sxy += r.sqrt_p_over_n * (r.moment_root.mean - median);
    sxx += r.sqrt_p_over_n * r.sqrt_p_over_n;
  }
  res.beta_hat = sxx > 0.0 ? sxy / sxx : 0.0;
  return res;
}

inline CsvTable to_csv(const ConcentrationResult& r) {
  CsvTable t({"N", "p", "trials", "moment_root", "stderr", "sqrt_p_over_N", "eps_hat", "eps_stderr",
              "eps_trend_ok", "beta_hat", "pass"});
  for (const auto& x : r.records) {
    t.add_row({x.n_dim, x.p, x.moment_root.trials, x.moment_root.mean, x.moment_root.std_error, x.sqrt_p_over_n,
               x.eps.mean, x.eps.std_error, x.eps_trend_ok, r.beta_hat, x.eps_trend_ok});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Matrix coefficients

/// max{||sum a_j^* a_j||^(1/2), ||sum a_j a_j^*||^(1/2)}
inline double block_coefficient_norm(const std::vector<ComplexMatrix>& blocks) {
  if (blocks.empty()) return 0.0;
  const Eigen::Index k = blocks.front().rows();
  ComplexMatrix l = ComplexMatrix::Zero(k, k), r = ComplexMatrix::Zero(k, k);
  for (const auto& a : blocks) {
    l += a.adjoint() * a;
    r += a * a.adjoint();
  }
  return std::max(std::sqrt(operator_norm_matrix(l)), std::sqrt(operator_norm_matrix(r)));
}

struct MatrixCoeffRecord {
  Eigen::Index n_dim = 0;
  EstimateResult mean_norm;
  ChiEstimate chi;
  double bound = 0.0;
  bool pass = true;
};

struct MatrixCoeffResult {
  ExperimentConfig config;
  std::vector<MatrixCoeffRecord> records;
  double coefficient_norm = 0.0;
  double chi_min = 0.0;
  double c_emp = 0.0;
  double bound = 0.0;
  bool passed() const {
    return std::all_of(records.begin(), records.end(), [](const MatrixCoeffRecord& r) { return r.pass; });
  }
};

inline MatrixCoeffResult run_matrix_coeff_sweep(ExperimentConfig cfg) {
  resolve_config(cfg, ExperimentKind::matrix_coeff);
  detail::require_operator_norm(cfg, "matrix-coeff");
  const SeedStream root(cfg.master_seed);
  MatrixCoeffResult res{cfg, {}};
  res.coefficient_norm = block_coefficient_norm(cfg.blocks);
  for (Eigen::Index n : cfg.n_grid) {
    MatrixCoeffRecord r;
    r.n_dim = n;
    r.chi = detail::chi_for(root, n, cfg);
    r.mean_norm = estimate_mean(detail::per_trial(cfg.trials, cfg.threads, [&](std::size_t t) {
      const auto us = detail::haar_factors(root, n, t, cfg.n);
      return detail::norm_of(build_uu_block_operator(cfg.blocks, us, true), cfg, detail::start_stream(root, n, t, 0));
    }));
    res.records.push_back(r);
  }
  res.chi_min = std::numeric_limits<double>::infinity();
  for (const auto& r : res.records) res.chi_min = std::min(res.chi_min, r.chi.chi_hat);
  res.c_emp = 2.0 / res.chi_min;
  res.bound = 4.0 * res.c_emp * res.coefficient_norm;
  for (auto& r : res.records) {
    r.bound = res.bound;
    r.pass = r.mean_norm.mean <= r.bound + cfg.sigma * r.mean_norm.std_error;
  }
  return res;
}

inline CsvTable to_csv(const MatrixCoeffResult& r) {
  CsvTable t({"N", "k", "n", "trials", "mean_norm", "stderr", "ci95", "coefficient_norm", "chi_hat", "chi_min",
              "c_emp", "bound", "pass"});
  const Eigen::Index k = r.config.blocks.empty() ? 0 : r.config.blocks.front().rows();
  for (const auto& x : r.records) {
    t.add_row({x.n_dim, k, r.config.n, x.mean_norm.trials, x.mean_norm.mean, x.mean_norm.std_error,
               x.mean_norm.ci95_halfwidth, r.coefficient_norm, x.chi.chi_hat, r.chi_min, r.c_emp, x.bound, x.pass});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Double sums

struct DoubleSumRecord {
  Eigen::Index n_dim = 0;
  /// E ||sum a_ij U_i (x) conj U_j (I - P)||
  EstimateResult unitary;
  /// E ||sum a_ij Y_i (x) conj Y'_j||
  EstimateResult gaussian;
  EstimateResult ratio;
  ChiEstimate chi;
  double bound = 0.0;
  bool pass = true;
};

struct DoubleSumResult {
  ExperimentConfig config;
  std::vector<DoubleSumRecord> records;
  bool passed() const {
    return std::all_of(records.begin(), records.end(), [](const DoubleSumRecord& r) { return r.pass; });
  }
};

inline DoubleSumResult run_double_sum_sweep(ExperimentConfig cfg) {
  resolve_config(cfg, ExperimentKind::double_sum);
  detail::require_operator_norm(cfg, "double-sum");
  const SeedStream root(cfg.master_seed);
  DoubleSumResult res{cfg, {}};
  for (Eigen::Index n : cfg.n_grid) {
    DoubleSumRecord r;
    r.n_dim = n;
    r.chi = detail::chi_for(root, n, cfg);
    std::vector<double> uu(cfg.trials), gg(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
      if (cfg.n == 0) {
        uu[t] = gg[t] = 0.0;
        return;
      }
      const auto us = detail::haar_factors(root, n, t, cfg.n);
      uu[t] = detail::norm_of(build_double_sum_operator(cfg.coeff_matrix, us, us, true), cfg,
                              detail::start_stream(root, n, t, 0));
      const auto ys = detail::ginibre_factors(root, family::kGaussLeft, n, t, cfg.n);
      const auto yps = detail::ginibre_factors(root, family::kGaussRight, n, t, cfg.n);
      gg[t] = detail::norm_of(build_double_sum_operator(cfg.coeff_matrix, ys, yps, false), cfg,
                              detail::start_stream(root, n, t, 1));
    });
    r.unitary = estimate_mean(uu);
    r.gaussian = estimate_mean(gg);
    r.ratio = detail::ratio_root(r.unitary, r.gaussian, 1.0);
    r.bound = 2.0 / r.chi.chi_hat;
    const double se = std::hypot(r.ratio.std_error, detail::inverse_chi_stderr(r.chi));
    r.pass = r.ratio.mean <= r.bound + cfg.sigma * se;
    res.records.push_back(r);
  }
  return res;
}

inline CsvTable to_csv(const DoubleSumResult& r) {
  CsvTable t({"N", "n", "trials", "unitary_mean", "unitary_stderr", "gaussian_mean", "gaussian_stderr", "ratio",
              "ratio_stderr", "chi_hat", "chi_stderr", "bound", "pass"});
  for (const auto& x : r.records) {
    t.add_row({x.n_dim, r.config.n, x.unitary.trials, x.unitary.mean, x.unitary.std_error, x.gaussian.mean,
               x.gaussian.std_error, x.ratio.mean, x.ratio.std_error, x.chi.chi_hat, x.chi.std_error, x.bound,
               x.pass});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Uniform entry point

struct ExperimentOutput {
  ExperimentKind kind = ExperimentKind::chi;
  ExperimentConfig resolved;
  /// (file stem, table); the first table is the main one.
  std::vector<std::pair<std::string, CsvTable>> tables;
  bool passed = true;
};

inline std::string file_stem(ExperimentKind k) {
  std::string s = to_string(k);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

inline ExperimentOutput run_experiment(ExperimentKind kind, const ExperimentConfig& cfg) {
  ExperimentOutput out;
  out.kind = kind;
  const std::string stem = file_stem(kind);
  auto finish = [&](const auto& result) {
    out.resolved = result.config;
    out.tables.emplace_back(stem, to_csv(result));
    out.passed = result.passed();
  };
  switch (kind) {
    case ExperimentKind::chi: finish(run_chi_estimates(cfg)); break;
    case ExperimentKind::lemma: finish(run_lemma_comparison(cfg)); break;
    case ExperimentKind::gaussian_bound: finish(run_gaussian_moment_bound(cfg)); break;
    case ExperimentKind::decouple: finish(run_decoupling_check(cfg)); break;
    case ExperimentKind::theorem: {
      const auto r = run_theorem_sweep(cfg);
      finish(r);
      out.tables.emplace_back(stem + "_seed_max", seed_max_csv(r));
      break;
    }
    case ExperimentKind::concentration: finish(run_concentration_probe(cfg)); break;
    case ExperimentKind::matrix_coeff: finish(run_matrix_coeff_sweep(cfg)); break;
    case ExperimentKind::double_sum: finish(run_double_sum_sweep(cfg)); break;
  }
  return out;
}

}  // namespace qexp
