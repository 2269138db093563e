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

#include "qexp/sampling.hpp"
#include "qexp/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace qexp {
namespace {

double op_norm(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues()(0);
}

TEST(Ginibre, RejectsZeroDimension) {
  EXPECT_THROW(sample_ginibre(0, SeedStream(1)), InvalidDimension);
  EXPECT_THROW(sample_haar_unitary(0, SeedStream(1)), InvalidDimension);
}

TEST(Ginibre, Deterministic) {
  const SeedStream s(42, {0, 8, 3});
  EXPECT_EQ(sample_ginibre(8, s), sample_ginibre(8, s));
  EXPECT_NE(sample_ginibre(8, s), sample_ginibre(8, s.child(0)));
}

TEST(Ginibre, SingleEntryVarianceIsOne) {
  constexpr int kTrials = 100000;
  const SeedStream root(42, {100});
  std::vector<double> sq(kTrials), re(kTrials);
  for (int t = 0; t < kTrials; ++t) {
    const Complex y = sample_ginibre(1, root.child(t))(0, 0);
    sq[t] = std::norm(y);
    re[t] = y.real();
  }
  EXPECT_NEAR(estimate_mean(sq).mean, 1.0, 0.02);
  EXPECT_NEAR(estimate_mean(re).mean, 0.0, 0.02);
}

TEST(Ginibre, NormalizedTraceOfSquare) {
  constexpr int kTrials = 1000;
  constexpr int kN = 8;
  const SeedStream root(42, {101});
  std::vector<double> v(kTrials);
  for (int t = 0; t < kTrials; ++t) {
    const ComplexMatrix y = sample_ginibre(kN, root.child(t));
    v[t] = (y.adjoint() * y).trace().real() / kN;
    ASSERT_TRUE(y.allFinite());
  }
  const auto e = estimate_mean(v);
  EXPECT_NEAR(e.mean, 1.0, 0.05);
  EXPECT_NEAR(e.mean, 1.0, 3.0 * e.std_error);
}

TEST(Polar, Identity) {
  const auto f = polar_decompose(ComplexMatrix::Identity(4, 4));
  EXPECT_LT((f.unitary - ComplexMatrix::Identity(4, 4)).norm(), 1e-14);
  EXPECT_LT((f.modulus - ComplexMatrix::Identity(4, 4)).norm(), 1e-14);
}

TEST(Polar, RealDiagonal) {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = 2.0;
  m(1, 1) = -3.0;
  const auto f = polar_decompose(m);
  ComplexMatrix u = ComplexMatrix::Zero(2, 2), mod = ComplexMatrix::Zero(2, 2);
  u(0, 0) = 1.0;
  u(1, 1) = -1.0;
  mod(0, 0) = 2.0;
  mod(1, 1) = 3.0;
  EXPECT_LT((f.unitary - u).norm(), 1e-14);
  EXPECT_LT((f.modulus - mod).norm(), 1e-14);
}

// Oracle: |M| from the eigendecomposition of M^*M, unitary factor from
// solving U |M| = M.
TEST(Polar, GinibreAgainstEigenOracle) {
  for (int t = 0; t < 5; ++t) {
    const ComplexMatrix m = sample_ginibre(16, SeedStream(42, {102, std::uint64_t(t)}));
    const auto f = polar_decompose(m);
    EXPECT_LE((f.unitary * f.modulus - m).norm() / m.norm(), 1e-10);
    EXPECT_LE(op_norm(f.unitary * f.unitary.adjoint() - ComplexMatrix::Identity(16, 16)), 1e-12);
    EXPECT_LE((f.modulus - f.modulus.adjoint()).norm(), 1e-14);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(f.modulus);
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);

    const ComplexMatrix oracle_mod = hermitian_sqrt(m.adjoint() * m);
    EXPECT_LE((f.modulus - oracle_mod).norm() / oracle_mod.norm(), 1e-10);
    const ComplexMatrix oracle_u = oracle_mod.transpose().partialPivLu().solve(m.transpose()).transpose();
    EXPECT_LE((f.unitary - oracle_u).norm() / std::sqrt(16.0), 1e-9);
  }
}

TEST(Polar, SingularMatrixReportsRatio) {
  ComplexMatrix m = ComplexMatrix::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  try {
    polar_decompose(m);
    FAIL() << "expected RankDeficient";
  } catch (const RankDeficient& e) {
    EXPECT_LE(e.ratio(), 1e-10);
    EXPECT_NE(std::string(e.what()).find("sigma_min/sigma_max"), std::string::npos);
  }
  EXPECT_THROW(polar_decompose(ComplexMatrix(2, 3)), InvalidDimension);
}

TEST(HermitianSqrt, ClampsRoundOffNegatives) {
  ComplexMatrix h = ComplexMatrix::Zero(2, 2);
  h(0, 0) = 4.0;
  h(1, 1) = -1e-18;
  const ComplexMatrix r = hermitian_sqrt(h);
  EXPECT_NEAR(r(0, 0).real(), 2.0, 1e-15);
  EXPECT_EQ(r(1, 1).real(), 0.0);
}

TEST(Haar, UnitaryToRoundOff) {
  for (int n : {1, 2, 5, 10, 33, 64}) {
    for (int t = 0; t < 20; ++t) {
      const ComplexMatrix u = sample_haar_unitary(n, SeedStream(42, {103, std::uint64_t(n), std::uint64_t(t)}));
      ASSERT_LE(op_norm(u * u.adjoint() - ComplexMatrix::Identity(n, n)), 1e-12) << "n=" << n;
    }
  }
}

// Haar columns are uniform on the unit sphere, so E|U(1,1)|^2 = 1/N.
TEST(Haar, FirstEntrySecondMoment) {
  constexpr int kN = 10;
  constexpr int kTrials = 10000;
  const SeedStream root(42, {104});
  std::vector<double> v(kTrials);
  for (int t = 0; t < kTrials; ++t) v[t] = std::norm(sample_haar_unitary(kN, root.child(t))(0, 0));
  const auto e = estimate_mean(v);
  EXPECT_NEAR(e.mean, 0.1, 0.005);
  EXPECT_NEAR(e.mean, 0.1, 3.0 * e.std_error);
}

// Translation invariance forces E tr(U) = 0.
TEST(Haar, NormalizedTraceHasZeroMean) {
  constexpr int kN = 6;
  constexpr int kTrials = 10000;
  const SeedStream root(42, {105});
  std::vector<double> re(kTrials), im(kTrials);
  for (int t = 0; t < kTrials; ++t) {
    const Complex tr = sample_haar_unitary(kN, root.child(t)).trace() / double(kN);
    re[t] = tr.real();
    im[t] = tr.imag();
  }
  EXPECT_NEAR(estimate_mean(re).mean, 0.0, 0.01);
  EXPECT_NEAR(estimate_mean(im).mean, 0.0, 0.01);
}

// Left translation by a fixed unitary V leaves the law of U(1,1) unchanged.
TEST(Haar, LeftInvarianceOfFirstEntryMoments) {
  constexpr int kN = 4;
  constexpr int kTrials = 10000;
  const ComplexMatrix v = sample_haar_unitary(kN, SeedStream(7, {1}));
  const SeedStream root(42, {106});
  std::vector<double> re_u(kTrials), abs_u(kTrials), re_vu(kTrials), abs_vu(kTrials);
  for (int t = 0; t < kTrials; ++t) {
    const ComplexMatrix u = sample_haar_unitary(kN, root.child(t));
    const ComplexMatrix vu = v * sample_haar_unitary(kN, root.child(t + kTrials));
    re_u[t] = u(0, 0).real();
    abs_u[t] = std::norm(u(0, 0));
    re_vu[t] = vu(0, 0).real();
    abs_vu[t] = std::norm(vu(0, 0));
  }
  const auto a = estimate_mean(re_u), b = estimate_mean(re_vu);
  EXPECT_LE(std::abs(a.mean - b.mean), 3.0 * combined_stderr(a, b));
  const auto c = estimate_mean(abs_u), d = estimate_mean(abs_vu);
  EXPECT_LE(std::abs(c.mean - d.mean), 3.0 * combined_stderr(c, d));
}

// The polar factors of a Ginibre matrix are independent: Re tr U and tr |Y|
// are uncorrelated.
TEST(Polar, FactorsUncorrelated) {
  constexpr int kN = 8;
  constexpr int kTrials = 10000;
  const SeedStream root(42, {107});
  std::vector<double> x(kTrials), y(kTrials);
  for (int t = 0; t < kTrials; ++t) {
    const auto f = polar_decompose(sample_ginibre(kN, root.child(t)));
    x[t] = f.unitary.trace().real();
    y[t] = f.modulus.trace().real();
  }
  const auto ex = estimate_mean(x), ey = estimate_mean(y);
  std::vector<double> prod(kTrials);
  for (int t = 0; t < kTrials; ++t) prod[t] = (x[t] - ex.mean) * (y[t] - ey.mean);
  const double sx = ex.std_error * std::sqrt(double(kTrials));
  const double sy = ey.std_error * std::sqrt(double(kTrials));
  const auto cov = estimate_mean(prod);
  const double corr = cov.mean / (sx * sy);
  // Standard error of a sample correlation near zero is about 1/sqrt(n).
  EXPECT_LE(std::abs(corr), 3.0 / std::sqrt(double(kTrials)));
}

TEST(Ginibre, NormalizationAcrossGrid) {
  const SeedStream root(42, {108});
  for (int n : {2, 4, 8, 16, 32}) {
    std::vector<double> v(2000);
    for (int t = 0; t < 2000; ++t) {
      const ComplexMatrix y = sample_ginibre(n, root.child({std::uint64_t(n), std::uint64_t(t)}));
      v[t] = y.squaredNorm() / n;
    }
    const auto e = estimate_mean(v);
    EXPECT_LE(std::abs(e.mean - 1.0), 3.0 * e.std_error) << "n=" << n;
  }
}

TEST(MatrixCsv, RowsOfPairs) {
  ComplexMatrix m(2, 2);
  m << Complex(1, 2), Complex(0.5, 0), Complex(-1, 0.25), Complex(0, -3);
  EXPECT_EQ(matrix_to_csv(m).str(), "re_0,im_0,re_1,im_1\n1,2,0.5,0\n-1,0.25,0,-3\n");
}

}  // namespace
}  // namespace qexp
