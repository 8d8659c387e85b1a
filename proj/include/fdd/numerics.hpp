// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The fdd-recon authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fdd {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

}  // namespace fdd

namespace fdd::numerics {

/// Raised for malformed inputs (NaN/Inf entries, dimension mismatches, asymmetric "Hermitian" data).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A block of a block-diagonal system could not be factorized.
class SingularBlock : public std::runtime_error {
 public:
  SingularBlock(Index block, double rcond);
  Index block() const noexcept { return block_; }
  double rcond() const noexcept { return rcond_; }

 private:
  Index block_;
  double rcond_;
};

/// Dense complex Hermitian matrix. Construction checks conj-symmetry and stores the
/// exactly symmetrized average so downstream code can rely on it bit-for-bit.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(Index dim, bool psd = false);

  /// Tolerance is absolute 1e-12, scaled by the largest entry magnitude when that exceeds one.
  static HermitianMatrix from_dense(const CMatrix& m, bool psd = false);

  Index dim() const noexcept { return m_.rows(); }
  const CMatrix& dense() const noexcept { return m_; }
  bool psd() const noexcept { return psd_; }
  double trace() const;
  double quadratic_form(const CVector& v) const;

 private:
  CMatrix m_;
  bool psd_ = false;
};

/// K x K block-diagonal operator with N x N blocks plus `shift * I`.
///
/// Blocks are shared pointers so that operators built from the same per-user
/// covariance (the A_k of every user share one block) cost no copies; a null
/// block means the zero matrix.
class BlockDiagOperator {
 public:
  using BlockPtr = std::shared_ptr<const CMatrix>;

  BlockDiagOperator() = default;
  BlockDiagOperator(std::vector<BlockPtr> blocks, Index block_dim, double shift = 0.0);
  BlockDiagOperator(const std::vector<CMatrix>& blocks, double shift = 0.0);

  /// `count` copies of one block.
  static BlockDiagOperator repeated(BlockPtr block, Index count, Index block_dim, double shift = 0.0);

  Index block_count() const noexcept { return static_cast<Index>(blocks_.size()); }
  Index block_dim() const noexcept { return block_dim_; }
  Index dim() const noexcept { return block_count() * block_dim_; }
  double shift() const noexcept { return shift_; }

  /// Block k without the shift; zero matrix for null blocks.
  CMatrix block(Index k) const;
  const BlockPtr& block_ptr(Index k) const { return blocks_.at(static_cast<std::size_t>(k)); }

  CVector apply(const CVector& v) const;
  /// Re(v^H B v); exact for Hermitian blocks.
  double quadratic_form(const CVector& v) const;
  CMatrix dense() const;

 private:
  std::vector<BlockPtr> blocks_;
  Index block_dim_ = 0;
  double shift_ = 0.0;
};

/// Moore-Penrose pseudo-inverse through the SVD; singular values below
/// `rel_tol * sigma_max` are treated as zero. The all-zero matrix maps to zero.
CMatrix pinv(const CMatrix& m, double rel_tol = 1e-10);

/// Numerical rank at the same relative cutoff pinv uses.
Index numerical_rank(const CMatrix& m, double rel_tol = 1e-10);

enum class EigenMode { kMax, kMin };

struct EigenPair {
  double value = 0.0;
  CVector vector;
  int iterations = 0;
  bool converged = false;
  /// Diagonal shift applied internally (power iteration needs a PSD operand,
  /// inverse iteration an invertible one).
  double shift = 0.0;
  double residual = 0.0;
};

/// Extreme eigenpair by power iteration (max) or inverse power iteration (min).
/// `max_iter <= 0` selects 10 * dim. Non-convergence is reported through
/// `converged == false` with the best iterate, never thrown.
EigenPair extreme_eigenpair(const HermitianMatrix& h, EigenMode mode, double tol = 1e-8,
                            int max_iter = 0);

/// Self-adjoint map with respect to the real inner product Re(x^H y). Covers
/// complex-linear Hermitian operators as well as widely-linear ones such as
/// real Hessians written on complex coordinates.
using SelfAdjointMap = std::function<CVector(const CVector&)>;

enum class BlockKind { kGeneral, kHermitianPositive };

struct BlockSolution {
  CVector x;
  /// Reciprocal condition estimate of the worst block.
  double worst_rcond = 1.0;
  Index worst_block = 0;
};

/// Solves B x = rhs one N x N block at a time (K independent factorizations).
/// Throws SingularBlock naming the first block whose factorization fails.
BlockSolution block_solve(const BlockDiagOperator& b, const CVector& rhs,
                          BlockKind kind = BlockKind::kGeneral);

bool all_finite(const CMatrix& m);

}  // namespace fdd::numerics
