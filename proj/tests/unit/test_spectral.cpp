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

#include "qexp/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace qexp {
namespace {

Eigen::VectorXd jacobi_sv(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues();
}

TensorSumOperator gaussian_operator(Eigen::Index n, int terms, bool traceless, std::uint64_t tag) {
  std::vector<ComplexMatrix> l, r;
  std::vector<Complex> a;
  const SeedStream root(5, {tag});
  for (int j = 0; j < terms; ++j) {
    l.push_back(sample_ginibre(n, root.child({0, std::uint64_t(j)})));
    r.push_back(sample_ginibre(n, root.child({1, std::uint64_t(j)})));
    a.push_back(1.0 / std::sqrt(double(terms)));
  }
  return build_gaussian_operator(a, l, r, traceless);
}

TensorSumOperator identity_operator(Eigen::Index n) {
  return build_uu_operator({1.0}, {ComplexMatrix::Identity(n, n)}, false);
}

TEST(SchattenNorm, IdentityOperator) {
  NormRequest req;
  EXPECT_NEAR(schatten_norm(identity_operator(3), req), 1.0, 1e-14);
  req.q = 2.0;
  EXPECT_NEAR(schatten_norm(identity_operator(2), req), 2.0, 1e-14);
  req.q = 1.0;
  EXPECT_NEAR(schatten_norm(identity_operator(2), req), 4.0, 1e-13);
}

TEST(SchattenNorm, InvalidRequests) {
  NormRequest req;
  req.q = 0.5;
  EXPECT_THROW(schatten_norm(identity_operator(2), req), InvalidArgument);
  req.q = 2.0;
  req.method = NormMethod::power_iteration;
  EXPECT_THROW(schatten_norm(identity_operator(2), req), InvalidArgument);
  req = NormRequest{};
  req.tol = 0.0;
  EXPECT_THROW(schatten_norm(identity_operator(2), req), InvalidArgument);
}

TEST(SchattenNorm, DenseMatchesJacobiOracle) {
  const auto s = gaussian_operator(3, 2, true, 1);
  const Eigen::VectorXd sv = jacobi_sv(densify(s));
  for (double q : {1.0, 2.0, 3.0, 4.0}) {
    NormRequest req;
    req.q = q;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) acc += std::pow(sv(i), q);
    EXPECT_NEAR(schatten_norm(s, req), std::pow(acc, 1.0 / q), 1e-10 * std::pow(acc, 1.0 / q)) << q;
  }
}

TEST(SchattenNorm, PowerIterationMatchesDense) {
  const auto s = gaussian_operator(4, 3, false, 2);
  NormRequest dense;
  dense.method = NormMethod::dense_svd;
  NormRequest pi;
  pi.method = NormMethod::power_iteration;
  pi.max_iter = 200000;
  pi.start = SeedStream(3);
  const double d = schatten_norm(s, dense);
  EXPECT_NEAR(schatten_norm(s, pi), d, 1e-6 * d);
  NormRequest lz = pi;
  lz.method = NormMethod::lanczos;
  EXPECT_NEAR(schatten_norm(s, lz), d, 1e-10 * d);
}

TEST(SchattenNorm, PowerIterationDeterministic) {
  const auto s = gaussian_operator(4, 2, true, 3);
  NormRequest pi;
  pi.method = NormMethod::power_iteration;
  pi.max_iter = 200000;
  pi.start = SeedStream(77, {4});
  const auto a = power_iteration(s, pi.tol, pi.max_iter, pi.start);
  const auto b = power_iteration(s, pi.tol, pi.max_iter, pi.start);
  EXPECT_EQ(a.sigma_max, b.sigma_max);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(SchattenNorm, NonConvergenceCarriesIterate) {
  const auto s = gaussian_operator(4, 3, false, 4);
  try {
    power_iteration(s, 1e-14, 3, SeedStream(1));
    FAIL();
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.last_iterate().size(), 16);
    EXPECT_GT(e.residual(), 1e-14);
  }
}

TEST(SchattenNorm, ZeroOperator) {
  auto s = build_gaussian_operator({0.0}, {ComplexMatrix::Identity(3, 3)}, {ComplexMatrix::Identity(3, 3)}, false);
  for (auto m : {NormMethod::dense_svd, NormMethod::power_iteration, NormMethod::lanczos}) {
    NormRequest req;
    req.method = m;
    EXPECT_EQ(schatten_norm(s, req), 0.0);
  }
  EXPECT_EQ(trace_moment(s, 4), 0.0);
}

TEST(SchattenNorm, LanczosMatchesDenseOnLargerOperators) {
  for (std::uint64_t tag = 10; tag < 13; ++tag) {
    for (bool traceless : {false, true}) {
      const auto s = gaussian_operator(12, 3, traceless, tag);
      NormRequest dense;
      dense.method = NormMethod::dense_svd;
      NormRequest lz;
      lz.method = NormMethod::lanczos;
      lz.start = SeedStream(tag);
      const double d = schatten_norm(s, dense);
      EXPECT_NEAR(schatten_norm(s, lz), d, 1e-9 * d);
    }
  }
}

TEST(SchattenNorm, LanczosWithRestartsConverges) {
  const auto s = gaussian_operator(10, 2, true, 14);
  NormRequest dense;
  dense.method = NormMethod::dense_svd;
  const double d = schatten_norm(s, dense);
  const auto r = lanczos(s, 1e-10, 5000, SeedStream(2), 12);
  EXPECT_NEAR(r.sigma_max, d, 1e-9 * d);
}

TEST(SchattenNorm, BlockModeLanczos) {
  std::vector<ComplexMatrix> us, blocks;
  for (int j = 0; j < 3; ++j) {
    us.push_back(sample_haar_unitary(5, SeedStream(15, {std::uint64_t(j)})));
    blocks.push_back(sample_ginibre(2, SeedStream(16, {std::uint64_t(j)})));
  }
  const auto s = build_uu_block_operator(blocks, us, true);
  NormRequest dense;
  dense.method = NormMethod::dense_svd;
  NormRequest lz;
  lz.method = NormMethod::lanczos;
  const double d = schatten_norm(s, dense);
  EXPECT_NEAR(schatten_norm(s, lz), d, 1e-9 * d);
}

TEST(SchattenNorm, MonotoneInQ) {
  for (std::uint64_t tag = 20; tag < 25; ++tag) {
    const auto s = gaussian_operator(3, 2, tag % 2 == 0, tag);
    double prev = 0.0;
    for (double q : {kInf, 4.0, 2.0, 1.0}) {
      NormRequest req;
      req.q = q;
      const double v = schatten_norm(s, req);
      EXPECT_GE(v, prev * (1 - 1e-12));
      prev = v;
    }
  }
}

// Conjugating the densified operator by a unitary W = U (x) conj(U) leaves
// all Schatten norms unchanged.
TEST(SchattenNorm, UnitaryInvariance) {
  const auto s = gaussian_operator(3, 3, true, 30);
  const ComplexMatrix u = sample_haar_unitary(3, SeedStream(31));
  const ComplexMatrix w = densify_term(u, u);
  const ComplexMatrix m = densify(s);
  const ComplexMatrix c = w * m * w.adjoint();
  for (double q : {1.0, 2.0, 4.0, kInf}) {
    const double a = schatten_from_singular_values(singular_values(m), q);
    const double b = schatten_from_singular_values(singular_values(c), q);
    EXPECT_NEAR(a, b, 1e-8 * a);
  }
}

TEST(TraceMoment, Examples) {
  EXPECT_NEAR(trace_moment(identity_operator(3), 2), 9.0, 1e-12);
  EXPECT_THROW(trace_moment(identity_operator(2), 3), InvalidArgument);
  EXPECT_THROW(trace_moment(identity_operator(2), 0), InvalidArgument);
  const auto s = gaussian_operator(3, 2, false, 40);
  const Eigen::VectorXd sv = jacobi_sv(densify(s));
  const double p4 = sv.array().pow(4).sum();
  EXPECT_NEAR(trace_moment(s, 4), p4, 1e-10 * p4);
}

TEST(TraceMoment, SecondMomentIsFrobenius) {
  for (std::uint64_t tag = 41; tag < 45; ++tag) {
    const auto s = gaussian_operator(3, 3, tag % 2 == 1, tag);
    const double f = densify(s).squaredNorm();
    EXPECT_NEAR(trace_moment(s, 2), f, 1e-10 * f);
  }
}

TEST(MatrixNorms, Examples) {
  EXPECT_NEAR(operator_norm_matrix(ComplexMatrix::Identity(5, 5)), 1.0, 1e-15);
  EXPECT_NEAR(trace_norm_matrix(ComplexMatrix::Identity(5, 5)), 5.0, 1e-14);
  ComplexMatrix d = ComplexMatrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = -4.0;
  EXPECT_NEAR(operator_norm_matrix(d), 4.0, 1e-15);
  EXPECT_NEAR(trace_norm_matrix(d), 7.0, 1e-14);
  EXPECT_THROW(operator_norm_matrix(ComplexMatrix(2, 3)), InvalidDimension);
}

// Limiting operator norm of a normalized Ginibre matrix is 2.
TEST(MatrixNorms, GinibreOperatorNormNearTwo) {
  int inside = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const double v = operator_norm_matrix(sample_ginibre(200, SeedStream(42, {50, t})));
    inside += (v >= 1.7 && v <= 2.3);
  }
  EXPECT_EQ(inside, 50);
}

}  // namespace
}  // namespace qexp
