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

#include "fdd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace fdd::numerics {

namespace {

std::string singular_message(Index block, double rcond) {
  std::ostringstream os;
  os << "block " << block << " is singular (rcond " << rcond << ")";
  return os.str();
}

void require_finite(const CMatrix& m, const char* what) {
  if (!all_finite(m)) throw InvalidInput(std::string(what) + ": NaN or Inf entry");
}

// Gershgorin enclosure [lo, hi] of the (real) spectrum of a Hermitian matrix.
std::pair<double, double> gershgorin(const CMatrix& m) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Index i = 0; i < m.rows(); ++i) {
    double radius = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
    lo = std::min(lo, m(i, i).real() - radius);
    hi = std::max(hi, m(i, i).real() + radius);
  }
  return {lo, hi};
}

CVector deterministic_start(Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  CVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = cplx(nd(gen), nd(gen));
  return v / v.norm();
}


}  // namespace

SingularBlock::SingularBlock(Index block, double rcond)
    : std::runtime_error(singular_message(block, rcond)), block_(block), rcond_(rcond) {}

bool all_finite(const CMatrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

// ---------------------------------------------------------------------------
// HermitianMatrix

HermitianMatrix::HermitianMatrix(Index dim, bool psd) : m_(CMatrix::Zero(dim, dim)), psd_(psd) {
  if (dim < 1) throw InvalidInput("HermitianMatrix: dimension must be positive");
}

HermitianMatrix HermitianMatrix::from_dense(const CMatrix& m, bool psd) {
  if (m.rows() != m.cols() || m.rows() < 1) throw InvalidInput("HermitianMatrix: not square");
  require_finite(m, "HermitianMatrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    std::ostringstream os;
    os << "HermitianMatrix: asymmetry " << asym << " exceeds tolerance";
    throw InvalidInput(os.str());
  }
  HermitianMatrix h;
  h.m_ = 0.5 * (m + m.adjoint());
  h.psd_ = psd;
  return h;
}

double HermitianMatrix::trace() const { return m_.trace().real(); }

double HermitianMatrix::quadratic_form(const CVector& v) const { return v.dot(m_ * v).real(); }

// ---------------------------------------------------------------------------
// BlockDiagOperator

BlockDiagOperator::BlockDiagOperator(std::vector<BlockPtr> blocks, Index block_dim, double shift)
    : blocks_(std::move(blocks)), block_dim_(block_dim), shift_(shift) {
  if (blocks_.empty() || block_dim_ < 1) throw InvalidInput("BlockDiagOperator: empty");
  if (shift_ < 0.0 || !std::isfinite(shift_)) throw InvalidInput("BlockDiagOperator: bad shift");
  for (const auto& b : blocks_) {
    if (b && (b->rows() != block_dim_ || b->cols() != block_dim_))
      throw InvalidInput("BlockDiagOperator: block size mismatch");
  }
}

BlockDiagOperator::BlockDiagOperator(const std::vector<CMatrix>& blocks, double shift) {
  if (blocks.empty()) throw InvalidInput("BlockDiagOperator: empty");
  std::vector<BlockPtr> ptrs;
  ptrs.reserve(blocks.size());
  for (const auto& b : blocks) ptrs.push_back(std::make_shared<const CMatrix>(b));
  *this = BlockDiagOperator(std::move(ptrs), blocks.front().rows(), shift);
}

BlockDiagOperator BlockDiagOperator::repeated(BlockPtr block, Index count, Index block_dim,
                                              double shift) {
  return BlockDiagOperator(std::vector<BlockPtr>(static_cast<std::size_t>(count), std::move(block)),
                           block_dim, shift);
}

CMatrix BlockDiagOperator::block(Index k) const {
  const auto& p = block_ptr(k);
  return p ? *p : CMatrix::Zero(block_dim_, block_dim_);
}

CVector BlockDiagOperator::apply(const CVector& v) const {
  if (v.size() != dim()) throw InvalidInput("BlockDiagOperator::apply: length mismatch");
  CVector out = shift_ * v;
  for (Index k = 0; k < block_count(); ++k) {
    if (const auto& p = block_ptr(k))
      out.segment(k * block_dim_, block_dim_).noalias() += (*p) * v.segment(k * block_dim_, block_dim_);
  }
  return out;
}

double BlockDiagOperator::quadratic_form(const CVector& v) const {
  if (v.size() != dim()) throw InvalidInput("BlockDiagOperator::quadratic_form: length mismatch");
  double q = shift_ * v.squaredNorm();
  for (Index k = 0; k < block_count(); ++k) {
    if (const auto& p = block_ptr(k)) {
      const auto seg = v.segment(k * block_dim_, block_dim_);
      q += seg.dot((*p) * seg).real();
    }
  }
  return q;
}

CMatrix BlockDiagOperator::dense() const {
  CMatrix d = shift_ * CMatrix::Identity(dim(), dim());
  for (Index k = 0; k < block_count(); ++k)
    if (const auto& p = block_ptr(k)) d.block(k * block_dim_, k * block_dim_, block_dim_, block_dim_) += *p;
  return d;
}

// ---------------------------------------------------------------------------
// pinv

CMatrix pinv(const CMatrix& m, double rel_tol) {
  if (m.rows() < 1 || m.cols() < 1) throw InvalidInput("pinv: empty matrix");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw InvalidInput("pinv: tolerance must lie in (0, 1)");
  require_finite(m, "pinv");
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  CMatrix out = CMatrix::Zero(m.cols(), m.rows());
  if (s.size() == 0 || s(0) == 0.0) return out;
  const double cutoff = rel_tol * s(0);
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) <= cutoff) break;
    out.noalias() += (svd.matrixV().col(i) / s(i)) * svd.matrixU().col(i).adjoint();
  }
  return out;
}

Index numerical_rank(const CMatrix& m, double rel_tol) {
  require_finite(m, "numerical_rank");
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<Index>((s.array() > rel_tol * s(0)).count());
}

// ---------------------------------------------------------------------------
// extreme_eigenpair (dense)

EigenPair extreme_eigenpair(const HermitianMatrix& h, EigenMode mode, double tol, int max_iter) {
  const CMatrix& m = h.dense();
  const Index n = h.dim();
  if (n < 1) throw InvalidInput("extreme_eigenpair: empty matrix");
  if (max_iter <= 0) max_iter = static_cast<int>(10 * n);

  const auto [lo, hi] = gershgorin(m);
  const double norm_est = std::max({std::abs(lo), std::abs(hi), std::numeric_limits<double>::min()});

  EigenPair out;
  CVector v = deterministic_start(n, 0x9e3779b97f4a7c15ULL);

  if (mode == EigenMode::kMax) {
    // Power iteration needs a PSD operand, otherwise it finds the largest magnitude.
    out.shift = (h.psd() || lo >= 0.0) ? 0.0 : -lo;
    CMatrix shifted = m;
    shifted.diagonal().array() += out.shift;
    for (int it = 1; it <= max_iter; ++it) {
      CVector w = shifted * v;
      const double wn = w.norm();
      if (wn == 0.0) break;  // zero operator: any vector is an eigenvector
      v = w / wn;
      out.iterations = it;
      const double lambda = h.quadratic_form(v);
      const double res = (m * v - lambda * v).norm();
      out.value = lambda;
      out.residual = res;
      if (res <= tol * norm_est) {
        out.converged = true;
        break;
      }
    }
  } else {
    // Inverse iteration on a PSD translate; a tiny diagonal shift keeps it invertible.
    const double base = (h.psd() || lo >= 0.0) ? 0.0 : -lo;
    const double reg = 1e-12 * std::max(std::abs(h.trace()) / static_cast<double>(n), norm_est * 1e-3);
    out.shift = base;
    CMatrix shifted = m;
    shifted.diagonal().array() += base;
    Eigen::PartialPivLU<CMatrix> lu(shifted);
    if (!(lu.rcond() > 1e-15)) {
      out.shift = base + reg;
      shifted.diagonal().array() += reg;
      lu.compute(shifted);
    }
    for (int it = 1; it <= max_iter; ++it) {
      CVector w = lu.solve(v);
      const double wn = w.norm();
      if (!std::isfinite(wn) || wn == 0.0) break;
      v = w / wn;
      out.iterations = it;
      const double lambda = h.quadratic_form(v);
      const double res = (m * v - lambda * v).norm();
      out.value = lambda;
      out.residual = res;
      if (res <= tol * norm_est) {
        out.converged = true;
        break;
      }
    }
  }
  if (out.iterations == 0) {
    out.value = h.quadratic_form(v);
    out.residual = (m * v - out.value * v).norm();
    out.converged = out.residual <= tol * norm_est;
  }
  out.vector = v;
  return out;
}

// ---------------------------------------------------------------------------
// block_solve

BlockSolution block_solve(const BlockDiagOperator& b, const CVector& rhs, BlockKind kind) {
  if (rhs.size() != b.dim()) throw InvalidInput("block_solve: rhs length mismatch");
  const Index n = b.block_dim();
  BlockSolution out;
  out.x.resize(rhs.size());
  out.worst_rcond = std::numeric_limits<double>::infinity();

  const CMatrix eye = CMatrix::Identity(n, n);
  const CMatrix* last_ptr = nullptr;
  bool have_last = false;
  Eigen::PartialPivLU<CMatrix> lu;
  Eigen::LLT<CMatrix> llt;
  double rcond = 0.0;

  for (Index k = 0; k < b.block_count(); ++k) {
    const auto& p = b.block_ptr(k);
    // Blocks sharing storage share one factorization.
    if (!have_last || p.get() != last_ptr) {
      CMatrix blk = p ? CMatrix(*p + b.shift() * eye) : CMatrix(b.shift() * eye);
      if (!all_finite(blk)) throw SingularBlock(k, 0.0);
      if (kind == BlockKind::kHermitianPositive) {
        llt.compute(blk);
        rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
      } else {
        lu.compute(blk);
        rcond = lu.rcond();
      }
      if (!(rcond > 1e-15)) throw SingularBlock(k, rcond);
      last_ptr = p.get();
      have_last = true;
    }
    if (rcond < out.worst_rcond) {
      out.worst_rcond = rcond;
      out.worst_block = k;
    }
    const auto seg = rhs.segment(k * n, n);
    out.x.segment(k * n, n) = kind == BlockKind::kHermitianPositive ? CVector(llt.solve(seg)) : CVector(lu.solve(seg));
  }
  return out;
}

}  // namespace fdd::numerics
