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
#include "qexp/sampling.hpp"
#include "qexp/seed_stream.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace qexp {

/// Rows allowed by densify unless the caller raises the cap.
inline constexpr Eigen::Index kDefaultDensifyCap = 4096;

/// Where a tensor factor came from. Factors are re-derived from their seed
/// paths when an operator is rebuilt from its descriptor; "custom" factors
/// cannot be rebuilt.
struct FactorSource {
  std::string kind = "custom";  // haar | ginibre | ginibre_plus | ginibre_minus | identity | custom
  std::vector<SeedStream> streams;

  static FactorSource haar(SeedStream s) { return {"haar", {std::move(s)}}; }
  static FactorSource ginibre(SeedStream s) { return {"ginibre", {std::move(s)}}; }
  /// (Y + Y') / sqrt(2) for Y, Y' drawn from a and b.
  static FactorSource ginibre_plus(SeedStream a, SeedStream b) {
    return {"ginibre_plus", {std::move(a), std::move(b)}};
  }
  /// (Y - Y') / sqrt(2).
  static FactorSource ginibre_minus(SeedStream a, SeedStream b) {
    return {"ginibre_minus", {std::move(a), std::move(b)}};
  }
  static FactorSource identity() { return {"identity", {}}; }
};

inline ComplexMatrix materialize(const FactorSource& src, Eigen::Index n) {
  if (src.kind == "haar" && src.streams.size() == 1) return sample_haar_unitary(n, src.streams[0]);
  if (src.kind == "ginibre" && src.streams.size() == 1) return sample_ginibre(n, src.streams[0]);
  if ((src.kind == "ginibre_plus" || src.kind == "ginibre_minus") && src.streams.size() == 2) {
    const ComplexMatrix a = sample_ginibre(n, src.streams[0]);
    const ComplexMatrix b = sample_ginibre(n, src.streams[1]);
    const double r = 1.0 / std::sqrt(2.0);
    return src.kind == "ginibre_plus" ? ComplexMatrix(r * (a + b)) : ComplexMatrix(r * (a - b));
  }
  if (src.kind == "identity") return ComplexMatrix::Identity(n, n);
  throw InvalidArgument("materialize: factor of kind '" + src.kind + "' cannot be re-derived");
}

/// One elementary tensor x (x) conj(y), acting as xi -> x xi y^*.
struct TensorTerm {
  ComplexMatrix left;
  ComplexMatrix right;
  FactorSource left_source;
  FactorSource right_source;
};

/// Block-vector of k N x N slices: an element of C^k (x) S_2^N.
using BlockVector = std::vector<ComplexMatrix>;

/// xi - (tr(xi)/N) I, the projection onto traceless matrices.
inline ComplexMatrix project_traceless(const ComplexMatrix& xi) {
  require_square(xi, "project_traceless");
  ComplexMatrix out = xi;
  const Complex shift = xi.trace() / static_cast<double>(xi.rows());
  out.diagonal().array() -= shift;
  return out;
}

/// S = sum_j a_j (x_j (x) conj(y_j)), optionally pre-composed with the
/// traceless projection, acting on S_2^N (scalar coefficients) or on
/// C^k (x) S_2^N (k x k block coefficients).
///
/// Immutable after construction. The vec convention is row-major
/// throughout: slice r, entry (i, j) sits at index r N^2 + i N + j.
class TensorSumOperator {
 public:
  TensorSumOperator(Eigen::Index dim, std::vector<TensorTerm> terms, std::vector<Complex> coeffs,
                    bool traceless)
      : dim_(dim), terms_(std::move(terms)), coeffs_(std::move(coeffs)), traceless_(traceless) {
    validate_terms();
    if (coeffs_.size() != terms_.size()) {
      throw InvalidArgument("TensorSumOperator: " + std::to_string(coeffs_.size()) +
                            " coefficients for " + std::to_string(terms_.size()) + " terms");
    }
  }

  TensorSumOperator(Eigen::Index dim, std::vector<TensorTerm> terms, std::vector<ComplexMatrix> blocks,
                    bool traceless, Eigen::Index block_dim)
      : dim_(dim),
        block_dim_(block_dim),
        terms_(std::move(terms)),
        blocks_(std::move(blocks)),
        traceless_(traceless),
        block_mode_(true) {
    validate_terms();
    if (block_dim_ < 1) throw InvalidDimension("TensorSumOperator: block dimension must be >= 1");
    if (blocks_.size() != terms_.size()) {
      throw InvalidArgument("TensorSumOperator: " + std::to_string(blocks_.size()) +
                            " coefficient blocks for " + std::to_string(terms_.size()) + " terms");
    }
    for (const auto& b : blocks_) {
      if (b.rows() != block_dim_ || b.cols() != block_dim_) {
        throw InvalidDimension("TensorSumOperator: coefficient block is " + dims_string(b.rows(), b.cols()) +
                               ", expected " + dims_string(block_dim_, block_dim_));
      }
    }
  }

  Eigen::Index dim() const noexcept { return dim_; }
  Eigen::Index block_dim() const noexcept { return block_dim_; }
  bool block_mode() const noexcept { return block_mode_; }
  bool traceless() const noexcept { return traceless_; }
  std::size_t term_count() const noexcept { return terms_.size(); }
  const std::vector<TensorTerm>& terms() const noexcept { return terms_; }
  const std::vector<Complex>& coeffs() const noexcept { return coeffs_; }
  const std::vector<ComplexMatrix>& blocks() const noexcept { return blocks_; }

  /// Dimension of the space acted on: N^2 k.
  Eigen::Index rows() const noexcept { return dim_ * dim_ * block_dim_; }
  Eigen::Index cols() const noexcept { return rows(); }

  ComplexMatrix apply(const ComplexMatrix& xi) const {
    if (block_mode_) throw InvalidArgument("apply: operator has matrix coefficients, use apply_block");
    require_dim(xi, dim_, "apply");
    const ComplexMatrix in = traceless_ ? project_traceless(xi) : xi;
    ComplexMatrix out = ComplexMatrix::Zero(dim_, dim_);
    ComplexMatrix tmp(dim_, dim_), term(dim_, dim_);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
      tmp.noalias() = in * terms_[j].right.adjoint();
      term.noalias() = terms_[j].left * tmp;
      out += coeffs_[j] * term;
    }
    return out;
  }

  ComplexMatrix apply_adjoint(const ComplexMatrix& eta) const {
    if (block_mode_) throw InvalidArgument("apply_adjoint: operator has matrix coefficients, use apply_block_adjoint");
    require_dim(eta, dim_, "apply_adjoint");
    ComplexMatrix out = ComplexMatrix::Zero(dim_, dim_);
    ComplexMatrix tmp(dim_, dim_), term(dim_, dim_);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
      tmp.noalias() = eta * terms_[j].right;
      term.noalias() = terms_[j].left.adjoint() * tmp;
      out += std::conj(coeffs_[j]) * term;
    }
    return traceless_ ? project_traceless(out) : out;
  }

  BlockVector apply_block(const BlockVector& xi) const {
    check_block_input(xi, "apply_block");
    const Eigen::Index k = block_dim_;
    BlockVector in(k);
    for (Eigen::Index s = 0; s < k; ++s) in[s] = traceless_ ? project_traceless(xi[s]) : xi[s];
    BlockVector out(k, ComplexMatrix::Zero(dim_, dim_));
    ComplexMatrix tmp(dim_, dim_), term(dim_, dim_);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
      const ComplexMatrix& a = block_mode_ ? blocks_[j] : scalar_block(j);
      for (Eigen::Index s = 0; s < k; ++s) {
        tmp.noalias() = in[s] * terms_[j].right.adjoint();
        term.noalias() = terms_[j].left * tmp;
        for (Eigen::Index r = 0; r < k; ++r) {
          if (a(r, s) != Complex(0.0)) out[r] += a(r, s) * term;
        }
      }
    }
    return out;
  }

  BlockVector apply_block_adjoint(const BlockVector& eta) const {
    check_block_input(eta, "apply_block_adjoint");
    const Eigen::Index k = block_dim_;
    BlockVector out(k, ComplexMatrix::Zero(dim_, dim_));
    ComplexMatrix tmp(dim_, dim_), term(dim_, dim_);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
      const ComplexMatrix& a = block_mode_ ? blocks_[j] : scalar_block(j);
      for (Eigen::Index r = 0; r < k; ++r) {
        tmp.noalias() = eta[r] * terms_[j].right;
        term.noalias() = terms_[j].left.adjoint() * tmp;
        for (Eigen::Index s = 0; s < k; ++s) {
          if (a(r, s) != Complex(0.0)) out[s] += std::conj(a(r, s)) * term;
        }
      }
    }
    if (traceless_) {
      for (auto& o : out) o = project_traceless(o);
    }
    return out;
  }

  /// y = S v on vec-space (length N^2 k).
  void matvec(const ComplexVector& v, ComplexVector& y) const {
    if (block_mode_) {
      from_blocks(apply_block(to_blocks(v)), y);
    } else {
      from_matrix(apply(to_matrix(v, 0)), y, 0);
    }
  }

  /// y = S^* v on vec-space.
  void rmatvec(const ComplexVector& v, ComplexVector& y) const {
    if (block_mode_) {
      from_blocks(apply_block_adjoint(to_blocks(v)), y);
    } else {
      from_matrix(apply_adjoint(to_matrix(v, 0)), y, 0);
    }
  }

  ComplexMatrix to_matrix(const ComplexVector& v, Eigen::Index slice) const {
    const Eigen::Index n2 = dim_ * dim_;
    return Eigen::Map<const RowMajorMatrix>(v.data() + slice * n2, dim_, dim_);
  }

  BlockVector to_blocks(const ComplexVector& v) const {
    if (v.size() != rows()) {
      throw InvalidDimension("to_blocks: expected vector of length " + std::to_string(rows()) + ", got " +
                             std::to_string(v.size()));
    }
    BlockVector b(block_dim_);
    for (Eigen::Index s = 0; s < block_dim_; ++s) b[s] = to_matrix(v, s);
    return b;
  }

  void from_matrix(const ComplexMatrix& m, ComplexVector& y, Eigen::Index slice) const {
    const Eigen::Index n2 = dim_ * dim_;
    if (y.size() != rows()) y.resize(rows());
    Eigen::Map<RowMajorMatrix>(y.data() + slice * n2, dim_, dim_) = m;
  }

  void from_blocks(const BlockVector& b, ComplexVector& y) const {
    if (y.size() != rows()) y.resize(rows());
    for (Eigen::Index s = 0; s < block_dim_; ++s) from_matrix(b[s], y, s);
  }

 private:
  void validate_terms() const {
    if (dim_ < 1) throw InvalidDimension("TensorSumOperator: dimension must be >= 1");
    for (const auto& t : terms_) {
      require_dim(t.left, dim_, "TensorSumOperator left factor");
      require_dim(t.right, dim_, "TensorSumOperator right factor");
    }
  }

  void check_block_input(const BlockVector& xi, const char* who) const {
    if (static_cast<Eigen::Index>(xi.size()) != block_dim_) {
      throw InvalidDimension(std::string(who) + ": expected " + std::to_string(block_dim_) + " slices, got " +
                             std::to_string(xi.size()));
    }
    for (const auto& s : xi) require_dim(s, dim_, who);
  }

  ComplexMatrix scalar_block(std::size_t j) const {
    ComplexMatrix a(1, 1);
    a(0, 0) = coeffs_[j];
    return a;
  }

  Eigen::Index dim_;
  Eigen::Index block_dim_ = 1;
  std::vector<TensorTerm> terms_;
  std::vector<Complex> coeffs_;
  std::vector<ComplexMatrix> blocks_;
  bool traceless_ = false;
  bool block_mode_ = false;
};

inline ComplexMatrix apply(const TensorSumOperator& s, const ComplexMatrix& xi) { return s.apply(xi); }
inline ComplexMatrix apply_adjoint(const TensorSumOperator& s, const ComplexMatrix& xi) {
  return s.apply_adjoint(xi);
}
inline BlockVector apply_block(const TensorSumOperator& s, const BlockVector& xi) { return s.apply_block(xi); }

/// Row-major vec of a square matrix.
inline ComplexVector vec(const ComplexMatrix& m) {
  ComplexVector v(m.size());
  Eigen::Map<RowMajorMatrix>(v.data(), m.rows(), m.cols()) = m;
  return v;
}

inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index n) {
  if (v.size() != n * n) throw InvalidDimension("unvec: length " + std::to_string(v.size()) + " is not " + std::to_string(n) + "^2");
  return Eigen::Map<const RowMajorMatrix>(v.data(), n, n);
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Dense matrix of xi -> x xi y^* under row-major vec: kron(x, conj(y)).
inline ComplexMatrix densify_term(const ComplexMatrix& x, const ComplexMatrix& y) { return kron(x, y.conjugate()); }

/// Dense N^2 x N^2 projection onto C I (the rank-one projection P).
inline ComplexMatrix identity_projection_dense(Eigen::Index n) {
  const ComplexVector v = vec(ComplexMatrix::Identity(n, n)) / std::sqrt(static_cast<double>(n));
  return v * v.adjoint();
}

/// Dense N^2 x N^2 matrix of the traceless projection I - P.
inline ComplexMatrix traceless_projection_dense(Eigen::Index n) {
  return ComplexMatrix::Identity(n * n, n * n) - identity_projection_dense(n);
}

/// Exact dense matrix M with M vec(xi) = vec(S xi).
inline ComplexMatrix densify(const TensorSumOperator& s, Eigen::Index cap = kDefaultDensifyCap) {
  const Eigen::Index rows = s.rows();
  if (rows > cap) {
    throw SizeCapExceeded("densify: operator has " + std::to_string(rows) + " rows, cap is " + std::to_string(cap) +
                          "; use the matrix-free path");
  }
  const Eigen::Index n = s.dim();
  const Eigen::Index k = s.block_dim();
  ComplexMatrix m = ComplexMatrix::Zero(rows, rows);
  for (std::size_t j = 0; j < s.term_count(); ++j) {
    const ComplexMatrix t = densify_term(s.terms()[j].left, s.terms()[j].right);
    if (s.block_mode()) {
      m += kron(s.blocks()[j], t);
    } else {
      m += s.coeffs()[j] * t;
    }
  }
  if (s.traceless()) {
    const ComplexMatrix q = traceless_projection_dense(n);
    if (k == 1) {
      m = (m * q).eval();
    } else {
      m = (m * kron(ComplexMatrix::Identity(k, k), q)).eval();
    }
  }
  return m;
}

/// Scalar-mode operator sum_j a_j U_j (x) conj(U_j).
inline TensorSumOperator build_uu_operator(std::vector<Complex> coeffs, const std::vector<ComplexMatrix>& unitaries,
                                           bool traceless, const std::vector<FactorSource>& sources = {}) {
  if (unitaries.empty()) throw InvalidArgument("build_uu_operator: no unitaries given");
  if (coeffs.size() != unitaries.size()) {
    throw InvalidArgument("build_uu_operator: " + std::to_string(coeffs.size()) + " coefficients for " +
                          std::to_string(unitaries.size()) + " unitaries");
  }
  std::vector<TensorTerm> terms;
  for (std::size_t j = 0; j < unitaries.size(); ++j) {
    const FactorSource src = j < sources.size() ? sources[j] : FactorSource{};
    terms.push_back({unitaries[j], unitaries[j], src, src});
  }
  return TensorSumOperator(unitaries.front().rows(), std::move(terms), std::move(coeffs), traceless);
}

/// Block-mode operator sum_j a_j (x) U_j (x) conj(U_j), a_j in M_k.
inline TensorSumOperator build_uu_block_operator(std::vector<ComplexMatrix> blocks,
                                                 const std::vector<ComplexMatrix>& unitaries, bool traceless,
                                                 const std::vector<FactorSource>& sources = {}) {
  if (unitaries.empty() || blocks.empty()) throw InvalidArgument("build_uu_block_operator: no terms given");
  std::vector<TensorTerm> terms;
  for (std::size_t j = 0; j < unitaries.size(); ++j) {
    const FactorSource src = j < sources.size() ? sources[j] : FactorSource{};
    terms.push_back({unitaries[j], unitaries[j], src, src});
  }
  const Eigen::Index k = blocks.front().rows();
  return TensorSumOperator(unitaries.front().rows(), std::move(terms), std::move(blocks), traceless, k);
}

/// Scalar-mode operator sum_j a_j Y_j (x) conj(Y'_j) with independent factor lists.
inline TensorSumOperator build_gaussian_operator(std::vector<Complex> coeffs, const std::vector<ComplexMatrix>& lefts,
                                                 const std::vector<ComplexMatrix>& rights, bool traceless,
                                                 const std::vector<FactorSource>& left_sources = {},
                                                 const std::vector<FactorSource>& right_sources = {}) {
  if (lefts.empty()) throw InvalidArgument("build_gaussian_operator: no factors given");
  if (lefts.size() != rights.size() || coeffs.size() != lefts.size()) {
    throw InvalidArgument("build_gaussian_operator: length mismatch (" + std::to_string(coeffs.size()) +
                          " coefficients, " + std::to_string(lefts.size()) + " left, " +
                          std::to_string(rights.size()) + " right factors)");
  }
  std::vector<TensorTerm> terms;
  for (std::size_t j = 0; j < lefts.size(); ++j) {
    terms.push_back({lefts[j], rights[j], j < left_sources.size() ? left_sources[j] : FactorSource{},
                     j < right_sources.size() ? right_sources[j] : FactorSource{}});
  }
  return TensorSumOperator(lefts.front().rows(), std::move(terms), std::move(coeffs), traceless);
}

inline TensorSumOperator build_gaussian_block_operator(std::vector<ComplexMatrix> blocks,
                                                       const std::vector<ComplexMatrix>& lefts,
                                                       const std::vector<ComplexMatrix>& rights, bool traceless) {
  if (lefts.empty() || lefts.size() != rights.size() || blocks.size() != lefts.size()) {
    throw InvalidArgument("build_gaussian_block_operator: length mismatch");
  }
  std::vector<TensorTerm> terms;
  for (std::size_t j = 0; j < lefts.size(); ++j) terms.push_back({lefts[j], rights[j], {}, {}});
  const Eigen::Index k = blocks.front().rows();
  return TensorSumOperator(lefts.front().rows(), std::move(terms), std::move(blocks), traceless, k);
}

/// sum_{i,j} a_ij L_i (x) conj(R_j); n^2 terms ordered row by row.
/// Pass the same list twice for the unitary double sum.
inline TensorSumOperator build_double_sum_operator(const ComplexMatrix& coeff_matrix,
                                                   const std::vector<ComplexMatrix>& lefts,
                                                   const std::vector<ComplexMatrix>& rights, bool traceless,
                                                   const std::vector<FactorSource>& left_sources = {},
                                                   const std::vector<FactorSource>& right_sources = {}) {
  const auto n = static_cast<Eigen::Index>(lefts.size());
  if (n == 0) throw InvalidArgument("build_double_sum_operator: no factors given");
  if (coeff_matrix.rows() != n || coeff_matrix.cols() != n || static_cast<Eigen::Index>(rights.size()) != n) {
    throw InvalidArgument("build_double_sum_operator: coefficient array is " +
                          dims_string(coeff_matrix.rows(), coeff_matrix.cols()) + " for " + std::to_string(n) +
                          " left and " + std::to_string(rights.size()) + " right factors");
  }
  std::vector<TensorTerm> terms;
  std::vector<Complex> coeffs;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      terms.push_back({lefts[i], rights[j],
                       static_cast<std::size_t>(i) < left_sources.size() ? left_sources[i] : FactorSource{},
                       static_cast<std::size_t>(j) < right_sources.size() ? right_sources[j] : FactorSource{}});
      coeffs.push_back(coeff_matrix(i, j));
    }
  }
  return TensorSumOperator(lefts.front().rows(), std::move(terms), std::move(coeffs), traceless);
}

// ---------------------------------------------------------------------------
// JSON descriptors

inline nlohmann::json complex_to_json(Complex z) { return nlohmann::json::array({z.real(), z.imag()}); }

/// A number, or a two-element [re, im] array.
inline Complex complex_from_json(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw InvalidArgument("expected a number or [re, im] pair, got " + j.dump());
}

inline nlohmann::json matrix_to_json(const ComplexMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ComplexMatrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw InvalidArgument("expected a matrix (list of rows)");
  const auto r = static_cast<Eigen::Index>(j.size());
  const auto c = static_cast<Eigen::Index>(j[0].size());
  ComplexMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != c) throw InvalidArgument("ragged matrix rows");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = complex_from_json(j[i][k]);
  }
  return m;
}

inline nlohmann::json stream_to_json(const SeedStream& s) {
  return {{"master_seed", s.master_seed()}, {"path", s.path()}};
}

inline SeedStream stream_from_json(const nlohmann::json& j) {
  return SeedStream(j.at("master_seed").get<std::uint64_t>(), j.at("path").get<std::vector<std::uint64_t>>());
}

inline nlohmann::json source_to_json(const FactorSource& src) {
  nlohmann::json streams = nlohmann::json::array();
  for (const auto& s : src.streams) streams.push_back(stream_to_json(s));
  return {{"kind", src.kind}, {"streams", streams}};
}

inline FactorSource source_from_json(const nlohmann::json& j) {
  FactorSource src;
  src.kind = j.at("kind").get<std::string>();
  for (const auto& s : j.at("streams")) src.streams.push_back(stream_from_json(s));
  return src;
}

/// Reproducibility descriptor: dimensions, coefficients and the seed path of
/// every factor. Raw factor entries are never stored.
inline nlohmann::json to_descriptor(const TensorSumOperator& s) {
  nlohmann::json d;
  d["dim"] = s.dim();
  d["block_dim"] = s.block_dim();
  d["traceless"] = s.traceless();
  nlohmann::json coeffs = nlohmann::json::array();
  if (s.block_mode()) {
    for (const auto& b : s.blocks()) coeffs.push_back(matrix_to_json(b));
    d["coefficient_mode"] = "block";
  } else {
    for (Complex c : s.coeffs()) coeffs.push_back(complex_to_json(c));
    d["coefficient_mode"] = "scalar";
  }
  d["coefficients"] = coeffs;
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : s.terms()) {
    terms.push_back({{"left", source_to_json(t.left_source)}, {"right", source_to_json(t.right_source)}});
  }
  d["terms"] = terms;
  return d;
}

/// Rebuilds an operator from its descriptor by re-deriving every factor.
inline TensorSumOperator from_descriptor(const nlohmann::json& d) {
  const auto n = d.at("dim").get<Eigen::Index>();
  const bool traceless = d.at("traceless").get<bool>();
  std::vector<TensorTerm> terms;
  for (const auto& t : d.at("terms")) {
    FactorSource l = source_from_json(t.at("left"));
    FactorSource r = source_from_json(t.at("right"));
    ComplexMatrix lm = materialize(l, n);
    ComplexMatrix rm = materialize(r, n);
    terms.push_back({std::move(lm), std::move(rm), std::move(l), std::move(r)});
  }
  if (d.at("coefficient_mode").get<std::string>() == "block") {
    std::vector<ComplexMatrix> blocks;
    for (const auto& b : d.at("coefficients")) blocks.push_back(matrix_from_json(b));
    return TensorSumOperator(n, std::move(terms), std::move(blocks), traceless, d.at("block_dim").get<Eigen::Index>());
  }
  std::vector<Complex> coeffs;
  for (const auto& c : d.at("coefficients")) coeffs.push_back(complex_from_json(c));
  return TensorSumOperator(n, std::move(terms), std::move(coeffs), traceless);
}

}  // namespace qexp
