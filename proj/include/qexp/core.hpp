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

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace qexp {

using Complex = std::complex<double>;

/// Dense N x N complex matrix. Carries Ginibre/Haar samples, moduli and
/// Hilbert-Schmidt vectors alike.
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Row-major view used for the global vec convention:
/// vec(xi)[i * N + j] = xi(i, j).
using RowMajorMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr const char* kVersion = "0.1.0";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  RankDeficient(const std::string& what, double ratio)
      : Error(what), ratio_(ratio) {}
  /// Smallest over largest singular value of the offending matrix.
  double ratio() const noexcept { return ratio_; }

 private:
  double ratio_;
};

class SizeCapExceeded : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, ComplexVector last_iterate,
                 double residual)
      : Error(what), last_(std::move(last_iterate)), residual_(residual) {}
  const ComplexVector& last_iterate() const noexcept { return last_; }
  double residual() const noexcept { return residual_; }

 private:
  ComplexVector last_;
  double residual_;
};

class DegenerateConfig : public Error {
 public:
  using Error::Error;
};

inline std::string dims_string(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

inline void require_square(const ComplexMatrix& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidDimension(std::string(who) + ": expected a non-empty square matrix, got " +
                           dims_string(m.rows(), m.cols()));
  }
}

inline void require_dim(const ComplexMatrix& m, Eigen::Index n, const char* who) {
  if (m.rows() != n || m.cols() != n) {
    throw InvalidDimension(std::string(who) + ": expected " + dims_string(n, n) +
                           ", got " + dims_string(m.rows(), m.cols()));
  }
}

inline bool all_finite(const ComplexMatrix& m) {
  return m.allFinite();
}

}  // namespace qexp
