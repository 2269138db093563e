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

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace qexp {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Hierarchical deterministic randomness.
///
/// A stream is identified by a master seed and a path of non-negative
/// integers, typically (experiment family, N, trial, matrix index). Streams
/// are values: `child` returns a new stream and never mutates `*this`, so a
/// stream can be shared freely between threads. The generator for a path is
/// seeded by folding the path through splitmix64, which decorrelates
/// neighbouring paths.
class SeedStream {
 public:
  using Engine = std::mt19937_64;

  SeedStream() = default;
  explicit SeedStream(std::uint64_t master_seed) : master_(master_seed) {}
  SeedStream(std::uint64_t master_seed, std::vector<std::uint64_t> path)
      : master_(master_seed), path_(std::move(path)) {}

  std::uint64_t master_seed() const noexcept { return master_; }
  const std::vector<std::uint64_t>& path() const noexcept { return path_; }

  SeedStream child(std::uint64_t index) const {
    std::vector<std::uint64_t> p = path_;
    p.push_back(index);
    return SeedStream(master_, std::move(p));
  }

  SeedStream child(std::initializer_list<std::uint64_t> indices) const {
    std::vector<std::uint64_t> p = path_;
    p.insert(p.end(), indices.begin(), indices.end());
    return SeedStream(master_, std::move(p));
  }

  /// 64-bit digest of (master seed, path).
  std::uint64_t key() const noexcept {
    std::uint64_t h = detail::splitmix64(master_);
    for (std::uint64_t idx : path_) {
      h = detail::splitmix64(h ^ detail::splitmix64(idx + 0x632BE59BD9B4E019ull));
    }
    return h;
  }

  Engine engine() const {
    const std::uint64_t k = key();
    std::seed_seq seq{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                      static_cast<std::uint32_t>(path_.size())};
    return Engine(seq);
  }

  /// "seed/a/b/c" form used in provenance descriptors.
  std::string to_string() const {
    std::string s = std::to_string(master_);
    for (std::uint64_t idx : path_) {
      s += '/';
      s += std::to_string(idx);
    }
    return s;
  }

  friend bool operator==(const SeedStream&, const SeedStream&) = default;

 private:
  std::uint64_t master_ = 0;
  std::vector<std::uint64_t> path_;
};

}  // namespace qexp
