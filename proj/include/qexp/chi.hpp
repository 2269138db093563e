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
#include "qexp/parallel.hpp"
#include "qexp/sampling.hpp"
#include "qexp/seed_stream.hpp"
#include "qexp/stats.hpp"
#include "qexp/superop.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace qexp {

// The twirl T = E(|Y| (x) conj|Y|) commutes with every U (x) conj(U), so it is
// P + chi_N (I - P) with P the projection onto C I. chi_N is estimated three
// ways below:
//   entrywise      mean over i != j of |Y|_ii |Y|_jj
//   trace_formula  ((tr|Y|)^2 - sum_j |Y|_jj^2) / (N(N-1)), same samples
//   spectral       mean eigenvalue of the densified sample twirl on the
//                  traceless subspace

enum class ChiMethod { entrywise, spectral, trace_formula };

inline const char* to_string(ChiMethod m) {
  switch (m) {
    case ChiMethod::entrywise: return "entrywise";
    case ChiMethod::spectral: return "spectral";
    case ChiMethod::trace_formula: return "trace_formula";
  }
  return "?";
}

struct ChiEstimate {
  Eigen::Index n = 0;
  double chi_hat = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  ChiMethod method = ChiMethod::entrywise;
  /// trace_formula only: mean of sum_j |Y|_jj^2 / N, i.e. of |Y|_11^2.
  EstimateResult diag_square;
};

namespace detail {

inline void require_chi_args(Eigen::Index n, std::size_t trials, const char* who) {
  if (n < 2) throw InvalidDimension(std::string(who) + ": N must be >= 2 (no off-diagonal pairs), got " + std::to_string(n));
  if (trials < 2) throw InvalidArgument(std::string(who) + ": need at least 2 trials for a variance estimate");
}

/// Diagonals of |Y| for trials [0, trials), trial t drawn from stream.child(t).
inline std::vector<Eigen::VectorXd> modulus_diagonals(Eigen::Index n, std::size_t trials, const SeedStream& stream,
                                                      unsigned threads) {
  std::vector<Eigen::VectorXd> diags(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    diags[t] = modulus(sample_ginibre(n, stream.child(t))).diagonal().real();
  });
  return diags;
}

inline ChiEstimate make_estimate(Eigen::Index n, ChiMethod m, const std::vector<double>& samples) {
  const EstimateResult e = estimate_mean(samples);
  ChiEstimate c;
  c.n = n;
  c.chi_hat = e.mean;
  c.std_error = e.std_error;
  c.trials = e.trials;
  c.method = m;
  return c;
}

}  // namespace detail

/// chi_N as the Monte Carlo mean of (N(N-1))^{-1} sum_{i != j} |Y|_ii |Y|_jj.
inline ChiEstimate estimate_chi_entrywise(Eigen::Index n, std::size_t trials, const SeedStream& stream,
                                          unsigned threads = 1) {
  detail::require_chi_args(n, trials, "estimate_chi_entrywise");
  const auto diags = detail::modulus_diagonals(n, trials, stream, threads);
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
  std::vector<double> stat(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::VectorXd& d = diags[t];
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) acc += d(i) * d(j);
      }
    }
    stat[t] = acc / pairs;
  }
  return detail::make_estimate(n, ChiMethod::entrywise, stat);
}

/// chi_N from ((tr|Y|)^2 - sum_j |Y|_jj^2) / (N(N-1)). Uses the same streams
/// as estimate_chi_entrywise, so both see identical samples.
inline ChiEstimate estimate_chi_trace_formula(Eigen::Index n, std::size_t trials, const SeedStream& stream,
                                              unsigned threads = 1) {
  detail::require_chi_args(n, trials, "estimate_chi_trace_formula");
  const auto diags = detail::modulus_diagonals(n, trials, stream, threads);
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
  std::vector<double> stat(trials), dsq(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const double tr = diags[t].sum();
    const double sq = diags[t].squaredNorm();
    stat[t] = (tr * tr - sq) / pairs;
    dsq[t] = sq / static_cast<double>(n);
  }
  ChiEstimate c = detail::make_estimate(n, ChiMethod::trace_formula, stat);
  c.diag_square = estimate_mean(dsq);
  return c;
}

/// Sample twirl T_hat = mean of |Y| (x) conj|Y| with diagnostics.
struct TwirlEstimate {
  Eigen::Index n = 0;
  std::size_t trials = 0;
  /// Densified, symmetrized sample mean (N^2 x N^2, row-major vec).
  ComplexMatrix t_hat;
  double chi_hat = 0.0;
  double chi_std_error = 0.0;
  /// ||T_hat - P - chi_hat (I - P)|| in operator norm.
  double structure_residual = 0.0;
  /// Batch-split estimate of ||T_hat - T|| in operator norm.
  double fluctuation = 0.0;
  /// ||T_hat(I) - I||_F and its batch-split fluctuation scale.
  double identity_residual = 0.0;
  double identity_fluctuation = 0.0;
  std::size_t batches = 0;
};

inline double hermitian_operator_norm(const ComplexMatrix& h) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Structure model P + chi (I - P) on S_2^N, densified.
inline ComplexMatrix twirl_model(Eigen::Index n, double chi) {
  const ComplexMatrix p = identity_projection_dense(n);
  return p + chi * (ComplexMatrix::Identity(n * n, n * n) - p);
}

/// Estimates the twirl from `trials` Ginibre moduli (trial t from
/// stream.child(t)), split into `batches` contiguous batches for the
/// fluctuation scale.
inline TwirlEstimate estimate_twirl(Eigen::Index n, std::size_t trials, const SeedStream& stream,
                                    std::size_t batches = 10, unsigned threads = 1,
                                    Eigen::Index cap = kDefaultDensifyCap) {
  detail::require_chi_args(n, trials, "estimate_twirl");
  const Eigen::Index d = n * n;
  if (d > cap) {
    throw SizeCapExceeded("estimate_twirl: N^2 = " + std::to_string(d) + " exceeds the densify cap " +
                          std::to_string(cap));
  }
  batches = std::clamp<std::size_t>(batches, 2, trials);
  std::vector<ComplexMatrix> batch_sum(batches, ComplexMatrix::Zero(d, d));
  std::vector<std::size_t> batch_count(batches, 0);
  std::vector<double> chi_stat(trials);

  const ComplexVector v = vec(ComplexMatrix::Identity(n, n)) / std::sqrt(static_cast<double>(n));
  constexpr std::size_t kChunk = 256;
  std::vector<ComplexMatrix> mods(kChunk);
  for (std::size_t start = 0; start < trials; start += kChunk) {
    const std::size_t len = std::min(kChunk, trials - start);
    parallel_for(len, threads, [&](std::size_t i) { mods[i] = modulus(sample_ginibre(n, stream.child(start + i))); });
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t t = start + i;
      const ComplexMatrix k = densify_term(mods[i], mods[i]);
      const std::size_t b = t * batches / trials;
      batch_sum[b] += k;
      ++batch_count[b];
      chi_stat[t] = (k.trace().real() - v.dot(k * v).real()) / static_cast<double>(d - 1);
    }
  }

  TwirlEstimate est;
  est.n = n;
  est.trials = trials;
  est.batches = batches;
  ComplexMatrix total = ComplexMatrix::Zero(d, d);
  for (const auto& s : batch_sum) total += s;
  est.t_hat = total / static_cast<double>(trials);
  est.t_hat = 0.5 * (est.t_hat + est.t_hat.adjoint()).eval();

  const EstimateResult chi = estimate_mean(chi_stat);
  est.chi_hat = (est.t_hat.trace().real() - v.dot(est.t_hat * v).real()) / static_cast<double>(d - 1);
  est.chi_std_error = chi.std_error;
  est.structure_residual = hermitian_operator_norm(est.t_hat - twirl_model(n, est.chi_hat));

  const ComplexVector id = vec(ComplexMatrix::Identity(n, n));
  const ComplexVector t_id = est.t_hat * id;
  est.identity_residual = (t_id - id).norm();

  double dev2 = 0.0, id_dev2 = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    ComplexMatrix mean_b = batch_sum[b] / static_cast<double>(batch_count[b]);
    mean_b = 0.5 * (mean_b + mean_b.adjoint()).eval();
    dev2 += std::pow(hermitian_operator_norm(mean_b - est.t_hat), 2);
    id_dev2 += (mean_b * id - t_id).squaredNorm();
  }
  const double bb = static_cast<double>(batches);
  est.fluctuation = std::sqrt(dev2 / (bb * (bb - 1.0)));
  est.identity_fluctuation = std::sqrt(id_dev2 / (bb * (bb - 1.0)));
  return est;
}

/// chi_N read off the densified sample twirl.
inline ChiEstimate estimate_chi_spectral(Eigen::Index n, std::size_t trials, const SeedStream& stream,
                                         unsigned threads = 1, Eigen::Index cap = kDefaultDensifyCap) {
  const TwirlEstimate t = estimate_twirl(n, trials, stream, 10, threads, cap);
  ChiEstimate c;
  c.n = n;
  c.chi_hat = t.chi_hat;
  c.std_error = t.chi_std_error;
  c.trials = trials;
  c.method = ChiMethod::spectral;
  return c;
}

/// Mean of the quarter-circle law sqrt(4 - s^2)/pi on [0, 2], i.e. the limit
/// of N^{-1} tr|Y|; closed form 8/(3 pi).
inline double quarter_circle_mean() {
  const double pi = boost::math::constants::pi<double>();
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate([pi](double s) { return s * std::sqrt(std::max(0.0, 4.0 - s * s)) / pi; }, 0.0, 2.0);
}

/// Total mass of the quarter-circle density; 1 up to quadrature error.
inline double quarter_circle_mass() {
  const double pi = boost::math::constants::pi<double>();
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate([pi](double s) { return std::sqrt(std::max(0.0, 4.0 - s * s)) / pi; }, 0.0, 2.0);
}

/// Asymptotic lower bound for chi_N: the squared quarter-circle mean,
/// (8/(3 pi))^2 = 0.72050...
inline double estimate_chi_limit() {
  const double m = quarter_circle_mean();
  return m * m;
}

/// ||(U (x) conj U) T (U (x) conj U)^* - T|| in operator norm.
inline double conjugation_residual(const ComplexMatrix& t, const ComplexMatrix& u) {
  const ComplexMatrix w = densify_term(u, u);
  const ComplexMatrix c = w * t * w.adjoint();
  return hermitian_operator_norm(0.5 * (c + c.adjoint()) - t);
}

struct RotationalInvarianceReport {
  TwirlEstimate twirl;
  std::vector<double> residuals;
  /// residual / fluctuation per conjugation.
  std::vector<double> ratios;
  double max_ratio = 0.0;
  bool passed = false;
};

/// Conjugates the sample twirl by independent Haar unitaries and compares
/// the change with the Monte Carlo fluctuation. Passes when every ratio is at
/// most `max_ratio`.
inline RotationalInvarianceReport check_rotational_invariance(Eigen::Index n, std::size_t trials,
                                                              const SeedStream& stream, int conjugations = 5,
                                                              unsigned threads = 1, double max_ratio = 5.0) {
  RotationalInvarianceReport r;
  r.twirl = estimate_twirl(n, trials, stream.child(0), 10, threads);
  for (int k = 0; k < conjugations; ++k) {
    const ComplexMatrix u = sample_haar_unitary(n, stream.child({1, static_cast<std::uint64_t>(k)}));
    const double res = conjugation_residual(r.twirl.t_hat, u);
    r.residuals.push_back(res);
    r.ratios.push_back(r.twirl.fluctuation > 0.0 ? res / r.twirl.fluctuation : 0.0);
  }
  r.max_ratio = r.ratios.empty() ? 0.0 : *std::max_element(r.ratios.begin(), r.ratios.end());
  r.passed = r.max_ratio <= max_ratio;
  return r;
}

/// Sample mean of Y (x) conj(Y), optionally followed by (I - P), against its
/// expectation (P, or 0 when projected).
struct TensorMeanReport {
  ComplexMatrix mean;
  double residual_fro = 0.0;
  double residual_op = 0.0;
};

inline TensorMeanReport estimate_gaussian_tensor_mean(Eigen::Index n, std::size_t trials, const SeedStream& stream,
                                                      bool traceless, unsigned threads = 1) {
  if (n < 1) throw InvalidDimension("estimate_gaussian_tensor_mean: N must be >= 1");
  const Eigen::Index d = n * n;
  TensorMeanReport r;
  r.mean = ComplexMatrix::Zero(d, d);
  constexpr std::size_t kChunk = 256;
  std::vector<ComplexMatrix> ys(kChunk);
  for (std::size_t start = 0; start < trials; start += kChunk) {
    const std::size_t len = std::min(kChunk, trials - start);
    parallel_for(len, threads, [&](std::size_t i) { ys[i] = sample_ginibre(n, stream.child(start + i)); });
    for (std::size_t i = 0; i < len; ++i) r.mean += densify_term(ys[i], ys[i]);
  }
  if (trials > 0) r.mean /= static_cast<double>(trials);
  ComplexMatrix expect;
  if (traceless) {
    r.mean = (r.mean * traceless_projection_dense(n)).eval();
    expect = ComplexMatrix::Zero(d, d);
  } else {
    expect = identity_projection_dense(n);
  }
  const ComplexMatrix diff = r.mean - expect;
  r.residual_fro = diff.norm();
  r.residual_op = diff.size() ? Eigen::BDCSVD<ComplexMatrix>(diff).singularValues()(0) : 0.0;
  return r;
}

/// Conditional-expectation identity behind the U/Gaussian comparison:
/// for fixed polar factors U_j and fresh moduli |Z|,
///   mean_t sum_j a_j (U_j|Z_jt| (x) conj(U_j|Z_jt|)) (I - P)
///     ~ [sum_j a_j (U_j (x) conj U_j)(I - P)] T_hat,
/// with T_hat the sample twirl of the same moduli.
struct ConditionalIdentityReport {
  double residual = 0.0;
  double fluctuation = 0.0;
  double ratio = 0.0;
};

inline ConditionalIdentityReport check_conditional_identity(Eigen::Index n, const std::vector<Complex>& coeffs,
                                                            std::size_t trials, const SeedStream& stream,
                                                            std::size_t batches = 10, unsigned threads = 1) {
  if (coeffs.empty()) throw InvalidArgument("check_conditional_identity: no coefficients");
  if (trials < 2) throw InvalidArgument("check_conditional_identity: need at least 2 trials");
  batches = std::clamp<std::size_t>(batches, 2, trials);
  const Eigen::Index d = n * n;
  const std::size_t terms = coeffs.size();
  std::vector<ComplexMatrix> us(terms);
  for (std::size_t j = 0; j < terms; ++j) {
    us[j] = polar_decompose(sample_ginibre(n, stream.child({0, static_cast<std::uint64_t>(j)}))).unitary;
  }
  const ComplexMatrix q = traceless_projection_dense(n);
  ComplexMatrix uu = ComplexMatrix::Zero(d, d);
  for (std::size_t j = 0; j < terms; ++j) uu += coeffs[j] * densify_term(us[j], us[j]);
  uu = (uu * q).eval();

  // Per batch: sums of the projected Gaussian tensor and of the twirl.
  std::vector<ComplexMatrix> lhs_b(batches, ComplexMatrix::Zero(d, d)), twirl_b(batches, ComplexMatrix::Zero(d, d));
  std::vector<std::size_t> count_b(batches, 0), twirl_count_b(batches, 0);
  std::vector<ComplexMatrix> mods(terms);
  for (std::size_t t = 0; t < trials; ++t) {
    parallel_for(terms, threads, [&](std::size_t j) {
      mods[j] = modulus(sample_ginibre(n, stream.child({1, t, static_cast<std::uint64_t>(j)})));
    });
    const std::size_t b = t * batches / trials;
    ComplexMatrix acc = ComplexMatrix::Zero(d, d);
    for (std::size_t j = 0; j < terms; ++j) {
      const ComplexMatrix y = us[j] * mods[j];
      acc += coeffs[j] * densify_term(y, y);
      twirl_b[b] += densify_term(mods[j], mods[j]);
      ++twirl_count_b[b];
    }
    lhs_b[b] += acc * q;
    ++count_b[b];
  }
  ComplexMatrix lhs = ComplexMatrix::Zero(d, d), twirl = ComplexMatrix::Zero(d, d);
  for (std::size_t b = 0; b < batches; ++b) {
    lhs += lhs_b[b];
    twirl += twirl_b[b];
  }
  lhs /= static_cast<double>(trials);
  twirl /= static_cast<double>(trials * terms);
  auto op_norm = [](const ComplexMatrix& m) { return Eigen::BDCSVD<ComplexMatrix>(m).singularValues()(0); };
  const ComplexMatrix diff = lhs - uu * twirl;

  double dev2 = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const ComplexMatrix lb = lhs_b[b] / static_cast<double>(count_b[b]);
    const ComplexMatrix tb = twirl_b[b] / static_cast<double>(twirl_count_b[b]);
    dev2 += std::pow(op_norm((lb - uu * tb) - diff), 2);
  }
  const double bb = static_cast<double>(batches);
  ConditionalIdentityReport r;
  r.residual = op_norm(diff);
  r.fluctuation = std::sqrt(dev2 / (bb * (bb - 1.0)));
  r.ratio = r.fluctuation > 0.0 ? r.residual / r.fluctuation : 0.0;
  return r;
}

}  // namespace qexp
