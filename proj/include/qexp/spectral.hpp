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
#include "qexp/seed_stream.hpp"
#include "qexp/superop.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace qexp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class NormMethod {
  dense_svd,
  /// Plain power iteration on S^* S.
  power_iteration,
  /// Lanczos on S^* S with explicit restarts;
  /// same stopping rule as power_iteration.
  lanczos,
  auto_select,
};

inline const char* to_string(NormMethod m) {
  switch (m) {
    case NormMethod::dense_svd: return "dense_svd";
    case NormMethod::power_iteration: return "power_iteration";
    case NormMethod::lanczos: return "lanczos";
    case NormMethod::auto_select: return "auto";
  }
  return "?";
}

struct NormRequest {
  double q = kInf;
  NormMethod method = NormMethod::auto_select;
  /// Relative residual ||S^*S v - lambda v|| / lambda at which iteration stops.
  double tol = 1e-8;
  int max_iter = 5000;
  /// Start vector source for the matrix-free methods.
  SeedStream start{0};
  /// auto: dense path for q < inf up to this many rows.
  Eigen::Index auto_dense_rows = 1024;
  /// auto: dense path for q = inf up to this many rows, matrix-free beyond.
  Eigen::Index auto_dense_rows_inf = 256;
  Eigen::Index densify_cap = kDefaultDensifyCap;
  /// Lanczos basis size before an explicit restart.
  int krylov_dim = 160;

  void validate() const {
    if (!(q >= 1.0)) throw InvalidArgument("invalid Schatten index q = " + format_number(q) + " (need q >= 1)");
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (max_iter < 1) throw InvalidArgument("max_iter must be >= 1");
    if ((method == NormMethod::power_iteration || method == NormMethod::lanczos) && !std::isinf(q)) {
      throw InvalidArgument(std::string(to_string(method)) + " only computes the operator norm (q = inf)");
    }
  }
};

struct MatrixFreeResult {
  double sigma_max = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

template <class Op>
ComplexVector random_start(const Op& op, const SeedStream& stream) {
  auto gen = stream.engine();
  std::normal_distribution<double> normal;
  ComplexVector v(op.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = normal(gen);
    v(i) = Complex(re, normal(gen));
  }
  return v / v.norm();
}

template <class Op>
void normal_matvec(const Op& op, const ComplexVector& v, ComplexVector& tmp, ComplexVector& out) {
  op.matvec(v, tmp);
  op.rmatvec(tmp, out);
}

/// Largest eigenvalue of the symmetric tridiagonal matrix (diag, off) and its
/// unit eigenvector. Eigenvalues come from the O(m^2) QR sweep; the vector
/// from two steps of inverse iteration with a shift just above the
/// eigenvalue, where T - shift I is negative definite and LDL^T needs no
/// pivoting. `off` may be one longer than `diag`; the extra entry is ignored.
inline double tridiagonal_top_pair(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, Eigen::VectorXd& vec) {
  const Eigen::Index m = diag.size();
  if (m == 1) {
    vec = Eigen::VectorXd::Ones(1);
    return diag(0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, off.head(m - 1), Eigen::EigenvaluesOnly);
  const double theta = es.eigenvalues()(m - 1);
  const double scale = std::max({std::abs(theta), diag.cwiseAbs().maxCoeff(), off.head(m - 1).cwiseAbs().maxCoeff()});
  const double shift = theta + 1e-10 * (scale > 0.0 ? scale : 1.0);
  // LDL^T of A = T - shift I (negative definite).
  Eigen::VectorXd d(m), l(m);
  d(0) = diag(0) - shift;
  for (Eigen::Index i = 1; i < m; ++i) {
    l(i) = off(i - 1) / d(i - 1);
    d(i) = diag(i) - shift - l(i) * off(i - 1);
  }
  vec = Eigen::VectorXd::Ones(m);
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (Eigen::Index i = 1; i < m; ++i) vec(i) -= l(i) * vec(i - 1);
    vec.array() /= d.array();
    for (Eigen::Index i = m - 2; i >= 0; --i) vec(i) -= l(i + 1) * vec(i + 1);
    vec /= vec.norm();
  }
  return theta;
}

}  // namespace detail

/// Largest singular value by power iteration on S^* S.
///
/// Op needs rows(), matvec(v, y) and rmatvec(v, y). Stops when
/// ||S^*S v - lambda v|| <= tol * lambda; throws NonConvergence with the
/// last iterate after max_iter steps.
template <class Op>
MatrixFreeResult power_iteration(const Op& op, double tol, int max_iter, const SeedStream& start) {
  ComplexVector v = detail::random_start(op, start);
  ComplexVector tmp, w;
  double residual = kInf;
  for (int it = 1; it <= max_iter; ++it) {
    detail::normal_matvec(op, v, tmp, w);
    const double lambda = v.dot(w).real();
    const double wn = w.norm();
    if (wn == 0.0 || lambda <= 0.0) return {0.0, it, 0.0};
    residual = (w - lambda * v).norm() / lambda;
    if (residual <= tol) return {std::sqrt(lambda), it, residual};
    v = w / wn;
  }
  throw NonConvergence("power_iteration: no convergence after " + std::to_string(max_iter) +
                           " iterations (relative residual " + format_number(residual) + ")",
                       v, residual);
}

/// Largest singular value by Lanczos on S^* S.
///
/// Local reorthogonalization only; after krylov_dim steps the process
/// restarts from the current Ritz vector. The stopping rule is
/// the Ritz residual |beta_m s_m| <= tol * theta, which equals the power
/// iteration residual evaluated at the Ritz vector. max_iter bounds the total
/// number of S^*S products.
template <class Op>
MatrixFreeResult lanczos(const Op& op, double tol, int max_iter, const SeedStream& start, int krylov_dim = 160) {
  const Eigen::Index dim = op.rows();
  const Eigen::Index m = std::min<Eigen::Index>(std::max(krylov_dim, 2), dim);
  ComplexMatrix basis(dim, m);
  Eigen::VectorXd alpha(m), beta(m);
  ComplexVector v = detail::random_start(op, start);
  ComplexVector tmp, w;
  int products = 0;
  double residual = kInf;
  ComplexVector ritz = v;

  for (;;) {
    basis.col(0) = v;
    Eigen::Index steps = 0;
    double theta = 0.0;
    Eigen::VectorXd s;
    bool converged = false;
    for (Eigen::Index j = 0; j < m; ++j) {
      detail::normal_matvec(op, basis.col(j).eval(), tmp, w);
      ++products;
      alpha(j) = basis.col(j).dot(w).real();
      // Three-term recurrence with local reorthogonalization against the two
      // newest basis vectors. Global orthogonality is not maintained; the
      // largest Ritz value and its residual estimate stay valid without it.
      w.noalias() -= alpha(j) * basis.col(j);
      if (j > 0) w.noalias() -= beta(j - 1) * basis.col(j - 1);
      for (Eigen::Index k = std::max<Eigen::Index>(0, j - 1); k <= j; ++k) {
        const Complex c = basis.col(k).dot(w);
        w.noalias() -= c * basis.col(k);
      }
      beta(j) = w.norm();
      steps = j + 1;

      const bool breakdown = beta(j) <= 1e-14 * std::max(1.0, std::abs(alpha(j)));
      const bool check = breakdown || steps == m || products >= max_iter || steps < 8 || steps % 4 == 0;
      if (check) {
        theta = detail::tridiagonal_top_pair(alpha.head(steps), beta.head(steps), s);
        if (theta <= 0.0) {
          if (breakdown) return {0.0, products, 0.0};
        } else {
          residual = breakdown ? 0.0 : beta(j) * std::abs(s(steps - 1)) / theta;
          if (residual <= tol) {
            converged = true;
            break;
          }
        }
        if (breakdown) {
          // Invariant subspace found; the Ritz value is exact.
          residual = 0.0;
          converged = true;
          break;
        }
      }
      if (products >= max_iter) break;
      if (j + 1 < m) basis.col(j + 1) = w / beta(j);
    }
    if (converged) return {std::sqrt(std::max(theta, 0.0)), products, residual};
    if (steps >= 2 && s.size() == steps) {
      ritz = basis.leftCols(steps) * s.cast<Complex>();
      ritz /= ritz.norm();
    }
    if (products >= max_iter) {
      throw NonConvergence("lanczos: no convergence after " + std::to_string(products) +
                               " products (relative residual " + format_number(residual) + ")",
                           ritz, residual);
    }
    v = ritz;
  }
}

inline Eigen::VectorXd singular_values(const ComplexMatrix& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  Eigen::BDCSVD<ComplexMatrix> svd(m);
  return svd.singularValues();
}

/// (sum sigma^q)^(1/q), or max sigma for q = inf. Scaled by the largest value
/// to avoid overflow.
inline double schatten_from_singular_values(const Eigen::VectorXd& s, double q) {
  if (s.size() == 0) return 0.0;
  const double smax = s.maxCoeff();
  if (std::isinf(q)) return smax;
  if (smax == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) acc += std::pow(s(i) / smax, q);
  return smax * std::pow(acc, 1.0 / q);
}

inline NormMethod resolve_method(const TensorSumOperator& s, const NormRequest& req) {
  if (req.method != NormMethod::auto_select) return req.method;
  const Eigen::Index rows = s.rows();
  if (std::isinf(req.q)) return rows <= req.auto_dense_rows_inf ? NormMethod::dense_svd : NormMethod::lanczos;
  if (rows <= req.auto_dense_rows) return NormMethod::dense_svd;
  throw SizeCapExceeded("schatten_norm: q = " + format_number(req.q) + " needs the dense path, but the operator has " +
                        std::to_string(rows) + " rows (auto limit " + std::to_string(req.auto_dense_rows) + ")");
}

/// Schatten q-norm of a tensor-sum operator on S_2^N.
inline double schatten_norm(const TensorSumOperator& s, const NormRequest& req = {}) {
  req.validate();
  switch (resolve_method(s, req)) {
    case NormMethod::dense_svd:
      return schatten_from_singular_values(singular_values(densify(s, req.densify_cap)), req.q);
    case NormMethod::power_iteration:
      return power_iteration(s, req.tol, req.max_iter, req.start).sigma_max;
    case NormMethod::lanczos:
      return lanczos(s, req.tol, req.max_iter, req.start, req.krylov_dim).sigma_max;
    case NormMethod::auto_select:
      break;
  }
  throw InvalidArgument("schatten_norm: unresolved method");
}

/// tr |S|^p = sum sigma^p for even p >= 2, from the dense singular values.
inline double trace_moment(const TensorSumOperator& s, int p, Eigen::Index cap = kDefaultDensifyCap) {
  if (p < 2 || p % 2 != 0) {
    throw InvalidArgument("trace_moment: p = " + std::to_string(p) + " is unsupported (need an even p >= 2)");
  }
  const Eigen::VectorXd sv = singular_values(densify(s, cap));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) acc += std::pow(sv(i), p);
  return acc;
}

/// tr |M|^p for a square matrix M, any real p >= 1.
inline double trace_power_matrix(const ComplexMatrix& m, double p) {
  require_square(m, "trace_power_matrix");
  const Eigen::VectorXd sv = singular_values(m);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) acc += std::pow(sv(i), p);
  return acc;
}

inline double operator_norm_matrix(const ComplexMatrix& m) {
  require_square(m, "operator_norm_matrix");
  return singular_values(m).maxCoeff();
}

inline double trace_norm_matrix(const ComplexMatrix& m) {
  require_square(m, "trace_norm_matrix");
  return singular_values(m).sum();
}

}  // namespace qexp
