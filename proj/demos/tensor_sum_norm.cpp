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

// Builds S = sum_j a_j U_j (x) conj(U_j) (1 - P) for a few Haar unitaries and
// prints its operator norm next to the Gaussian counterpart and 2/chi_N.
//
//   ./tensor_sum_norm [N] [n] [seed]

#include "qexp/chi.hpp"
#include "qexp/sampling.hpp"
#include "qexp/spectral.hpp"
#include "qexp/superop.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
  using namespace qexp;
  const Eigen::Index n_dim = argc > 1 ? std::atol(argv[1]) : 24;
  const int terms = argc > 2 ? std::atoi(argv[2]) : 4;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 42;
  if (n_dim < 2 || terms < 1) {
    std::fprintf(stderr, "usage: tensor_sum_norm [N >= 2] [n >= 1] [seed]\n");
    return 2;
  }
  const SeedStream root(seed);
  const std::vector<Complex> a(terms, Complex(1.0 / std::sqrt(static_cast<double>(terms)), 0.0));

  std::vector<ComplexMatrix> us, ys, yps;
  for (int j = 0; j < terms; ++j) {
    us.push_back(sample_haar_unitary(n_dim, root.child({0, static_cast<std::uint64_t>(j)})));
    ys.push_back(sample_ginibre(n_dim, root.child({1, static_cast<std::uint64_t>(j)})));
    yps.push_back(sample_ginibre(n_dim, root.child({2, static_cast<std::uint64_t>(j)})));
  }
  const auto s = build_uu_operator(a, us, /*traceless=*/true);
  const auto g = build_gaussian_operator(a, ys, yps, /*traceless=*/false);

  NormRequest req;
  req.tol = 1e-8;
  req.start = root.child(3);
  const double s_norm = schatten_norm(s, req);
  const double g_norm = schatten_norm(g, req);
  const auto chi = estimate_chi_entrywise(n_dim, 500, root.child(4));

  std::printf("N = %ld, n = %d, method %s\n", static_cast<long>(n_dim), terms, to_string(resolve_method(s, req)));
  std::printf("||sum a_j U_j (x) conj U_j (1-P)|| = %.6f\n", s_norm);
  std::printf("||sum a_j Y_j (x) conj Y'_j||      = %.6f\n", g_norm);
  std::printf("chi_N = %.4f +- %.4f, 2/chi_N = %.4f, limit of chi_N = %.6f\n", chi.chi_hat, chi.std_error,
              2.0 / chi.chi_hat, estimate_chi_limit());
  return 0;
}
