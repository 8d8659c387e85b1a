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

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdd/numerics.hpp"

namespace fdd::precoding {

/// Transmitter-side channel knowledge for K users on an N-antenna array.
struct CsitBundle {
  std::vector<CVector> h_hat;
  std::vector<CMatrix> phi;  // empty matrices are read as zero
  std::vector<double> sigma2;
  double P = 1.0;

  Index K() const noexcept { return static_cast<Index>(h_hat.size()); }
  Index N() const noexcept { return h_hat.empty() ? 0 : h_hat.front().size(); }
  void validate() const;
};

/// A_k = I_K (x) M_k + s_k I and B_k = A_k - e_k e_k^T (x) M_k, with
/// M_k = h_k h_k^H + Phi_k and s_k = sigma_k^2 / P.
struct OperatorSet {
  Index K = 0;
  Index N = 0;
  std::vector<numerics::BlockDiagOperator::BlockPtr> M;
  std::vector<double> s;
  std::vector<numerics::BlockDiagOperator> A;
  std::vector<numerics::BlockDiagOperator> B;
};

OperatorSet build_operators(const CsitBundle& bundle);

/// Per-user quadratic forms a_k = f^H A_k f and b_k = f^H B_k f.
struct QuadraticForms {
  std::vector<double> a;
  std::vector<double> b;
};

/// Evaluated from the user Gram terms f_j^H M_k f_j, never through A_k - (e_k e_k^T (x) M_k),
/// so b_k does not suffer cancellation at high SINR.
QuadraticForms quadratic_forms(const CVector& f, const OperatorSet& ops);

double log_gamma(const CVector& f, const OperatorSet& ops);

/// prod_k a_k / b_k, accumulated as a sum of logs.
double gamma(const CVector& f, const OperatorSet& ops);

/// Normalized weighted sums A_hat = sum_k A_k / a_k and B_hat = sum_k B_k / b_k.
/// A_hat(f) f - B_hat(f) f is parallel to the stationarity condition
/// A_bar(f) f = gamma(f) B_bar(f) f, since A_bar = prod(a) A_hat and B_bar = prod(b) B_hat.
struct WeightedOperators {
  numerics::BlockDiagOperator a_hat;
  numerics::BlockDiagOperator b_hat;
  QuadraticForms forms;
};

WeightedOperators weighted_operators(const CVector& f, const OperatorSet& ops, double extra_shift = 0.0);

/// ||A_bar f - gamma B_bar f|| / ||A_bar f||.
double stationarity_residual(const CVector& f, const OperatorSet& ops);

struct StepResult {
  CVector f;
  Index regularized = 0;  // 1 when a singular B_bar block forced a diagonal shift
};

/// One fixed-point update f <- normalize(B_bar(f)^-1 A_bar(f) f).
StepResult gpip_step(const CVector& f, const OperatorSet& ops);

struct SecondOrderReport {
  /// Exact local-maximum test: the real Hessian of log gamma, restricted to the
  /// complement of its K + 1 invariance directions, is negative definite.
  /// Decided by an exact inertia count, not by an iterative eigensolver.
  bool certified = false;
  double curvature = 0.0;        // largest eigenvalue of the restriction (bisection midpoint)
  double curvature_bound = 0.0;  // upper end of the bisection bracket
  double scale = 0.0;            // bound on the Hessian norm; the tolerance is relative to it
  bool eigen_converged = false;
  /// Literal eigenvalue comparison rho_min(S_A) > rho_max(S_B) with
  /// S_A = sum_i A_i f f^H A_i / (f^H A_i f)^2 and S_B likewise.
  double rho_min = 0.0;
  double rho_max = 0.0;
  bool literal_condition = false;
  std::string diagnostic;
};

SecondOrderReport check_second_order(const CVector& f, const OperatorSet& ops, double tol = 1e-9);

/// Hessian of log gamma at f as a map on complex coordinates with the real
/// inner product Re(x^H y); exposed for verification.
numerics::SelfAdjointMap log_gamma_hessian(const CVector& f, const OperatorSet& ops);

struct PrecoderSolution {
  CVector f;
  double gamma = 0.0;
  double log_gamma = 0.0;
  std::vector<CVector> per_user_f;
  int iterations = 0;         // until the epsilon rule fired (or max_iter)
  int polish_iterations = 0;  // extra updates spent reaching the stationarity tolerance
  int restarts = 0;
  bool converged = false;
  bool second_order_certified = false;
  double stationarity_residual = 0.0;
  Index regularized_steps = 0;
  SecondOrderReport second_order;
  std::vector<CVector> trajectory;  // iterates of the returned run, when recorded
};

enum class InitKind { kZf, kRandom, kGiven };

struct GpipOptions {
  double epsilon = 0.01;
  int max_iter = 100;
  int max_restarts = 5;
  InitKind init = InitKind::kZf;
  CVector given;
  std::uint64_t seed = 1;
  double polish_tol = 1e-4;
  int max_polish = 1000;
  /// Polish steps use f <- normalize(w x + (1 - w) f), x = B_bar^-1 A_bar f; the
  /// fixed points are unchanged (x = f there) and w < 1 damps the two-cycle the
  /// plain map falls into at high SINR. The epsilon-rule iterations are undamped.
  double polish_damping = 0.5;
  bool certify = true;
  double curvature_tol = 1e-9;
  bool record_trajectory = false;
};

PrecoderSolution gpip_solve(const CsitBundle& bundle, const GpipOptions& opts = {});

/// Stacked channels are rank deficient or K > N.
class ZfInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Equal-power zero forcing: directions are the columns of H (H^H H)^-1, each
/// normalized and scaled by 1/sqrt(K).
PrecoderSolution zf_precoder(const std::vector<CVector>& h);

/// Maximum-ratio directions with equal power; used when ZF is infeasible.
CVector mrt_precoder(const std::vector<CVector>& h);

/// Sum_k log2(1 + |h_k^H f_k|^2 / (sum_{i != k} |h_k^H f_i|^2 + sigma_k^2 / P)).
double sum_se_true(const CVector& f, const std::vector<CVector>& true_h, const std::vector<double>& sigma2,
                   double P);

/// Sum-SE predicted from (h_hat, Phi): log2 of gamma.
double sum_se_approx(const CVector& f, const OperatorSet& ops);

std::vector<CVector> split_users(const CVector& f, Index K, Index N);

}  // namespace fdd::precoding
