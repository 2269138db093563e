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
#include "qexp/csv.hpp"
#include "qexp/seed_stream.hpp"

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <string>

namespace qexp {

/// Smallest admissible sigma_min / sigma_max for polar decomposition.
inline constexpr double kPolarRankTolerance = 1e-10;

/// Ginibre sample with E|Y(i,j)|^2 = 1/N:
/// Y(i,j) = (g + i g') / sqrt(2N), g and g' independent standard normals.
/// Entries are drawn in row-major order, real part first.
inline ComplexMatrix sample_ginibre(Eigen::Index n, const SeedStream& stream) {
  if (n < 1) throw InvalidDimension("sample_ginibre: dimension must be >= 1, got " + std::to_string(n));
  auto gen = stream.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(2.0 * static_cast<double>(n));
  ComplexMatrix y(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = normal(gen);
      const double im = normal(gen);
      y(i, j) = Complex(re * scale, im * scale);
    }
  }
  return y;
}

struct PolarFactors {
  ComplexMatrix unitary;
  ComplexMatrix modulus;  // (M^* M)^{1/2}, Hermitian PSD
};

/// M = unitary * modulus, both factors taken from one SVD M = W S V^*:
/// unitary = W V^*, modulus = V S V^*.
inline PolarFactors polar_decompose(const ComplexMatrix& m) {
  require_square(m, "polar_decompose");
  Eigen::BDCSVD<ComplexMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  const double ratio = smax > 0.0 ? smin / smax : 0.0;
  if (!(ratio > kPolarRankTolerance)) {
    throw RankDeficient("polar_decompose: matrix is numerically singular (sigma_min/sigma_max = " +
                            format_number(ratio) + ")",
                        ratio);
  }
  const ComplexMatrix& v = svd.matrixV();
  PolarFactors f;
  f.unitary.noalias() = svd.matrixU() * v.adjoint();
  f.modulus.noalias() = v * s.asDiagonal() * v.adjoint();
  f.modulus = 0.5 * (f.modulus + f.modulus.adjoint()).eval();
  return f;
}

/// |M| = (M^* M)^{1/2} from the SVD of M; no rank requirement.
inline ComplexMatrix modulus(const ComplexMatrix& m) {
  require_square(m, "modulus");
  Eigen::BDCSVD<ComplexMatrix> svd(m, Eigen::ComputeFullV);
  const ComplexMatrix& v = svd.matrixV();
  ComplexMatrix out = v * svd.singularValues().asDiagonal() * v.adjoint();
  return 0.5 * (out + out.adjoint());
}

/// Principal square root of a Hermitian PSD matrix by eigendecomposition.
/// Eigenvalues below zero (round-off) are clamped to zero.
inline ComplexMatrix hermitian_sqrt(const ComplexMatrix& h) {
  require_square(h, "hermitian_sqrt");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const ComplexMatrix& v = es.eigenvectors();
  ComplexMatrix out = v * root.asDiagonal() * v.adjoint();
  return 0.5 * (out + out.adjoint());
}

/// Haar-distributed unitary: the unitary polar factor of a Ginibre draw.
/// A numerically singular draw is retried once on stream.child(1).
inline ComplexMatrix sample_haar_unitary(Eigen::Index n, const SeedStream& stream) {
  if (n < 1) throw InvalidDimension("sample_haar_unitary: dimension must be >= 1, got " + std::to_string(n));
  try {
    return polar_decompose(sample_ginibre(n, stream)).unitary;
  } catch (const RankDeficient&) {
    return polar_decompose(sample_ginibre(n, stream.child(1))).unitary;
  }
}

/// One CSV line per matrix row, "re,im" pairs for each entry, after a header.
inline CsvTable matrix_to_csv(const ComplexMatrix& m) {
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    header.push_back("re_" + std::to_string(j));
    header.push_back("im_" + std::to_string(j));
  }
  CsvTable t(std::move(header));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<CsvCell> row;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.emplace_back(m(i, j).real());
      row.emplace_back(m(i, j).imag());
    }
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace qexp
