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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace qexp {

/// Pairwise (cascade) summation. The split points depend only on the length,
/// so the result is independent of how the inputs were produced.
inline double pairwise_sum(std::span<const double> xs) {
  constexpr std::size_t kBlock = 16;
  if (xs.size() <= kBlock) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

/// Monte Carlo estimate of a mean.
struct EstimateResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  double ci95_halfwidth = 0.0;
};

inline EstimateResult estimate_mean(std::span<const double> samples) {
  EstimateResult r;
  r.trials = samples.size();
  if (samples.empty()) return r;
  const double n = static_cast<double>(samples.size());
  r.mean = pairwise_sum(samples) / n;
  if (samples.size() >= 2) {
    std::vector<double> dev(samples.size());
    std::transform(samples.begin(), samples.end(), dev.begin(),
                   [m = r.mean](double x) { return (x - m) * (x - m); });
    const double var = pairwise_sum(dev) / (n - 1.0);
    r.std_error = std::sqrt(var / n);
  }
  r.ci95_halfwidth = 1.96 * r.std_error;
  return r;
}

inline EstimateResult estimate_mean(const std::vector<double>& samples) {
  return estimate_mean(std::span<const double>(samples));
}

/// Standard error of a difference of two independent estimates.
inline double combined_stderr(const EstimateResult& a, const EstimateResult& b) {
  return std::hypot(a.std_error, b.std_error);
}

/// Estimate of g(mean) with g(m) = m^(1/p), propagated by the delta method.
inline EstimateResult root_of_mean(const EstimateResult& e, double p) {
  EstimateResult r = e;
  if (e.mean > 0.0) {
    r.mean = std::pow(e.mean, 1.0 / p);
    r.std_error = r.mean / (p * e.mean) * e.std_error;
  } else {
    r.mean = 0.0;
    r.std_error = 0.0;
  }
  r.ci95_halfwidth = 1.96 * r.std_error;
  return r;
}

}  // namespace qexp
