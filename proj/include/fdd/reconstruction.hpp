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

#include <stdexcept>

#include "fdd/channel.hpp"
#include "fdd/numerics.hpp"

namespace fdd::reconstruction {

enum class EstimatorKind { kMmse, kLmmse };

const char* to_string(EstimatorKind kind);

/// Uplink/downlink per-path gain correlation for a wavelength ratio kappa.
struct Eta {
  double kappa = 1.0;
  cplx value{1.0, 0.0};
};

/// [sin(2 pi k) - 2j sin^2(pi k)] / (2 pi (k - 1)); exactly 1 for |k - 1| < 1e-9.
Eta eta(double kappa);

/// The uplink steering matrix at the supplied angles is numerically rank deficient.
class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReconstructOptions {
  /// Project the normalized path gains onto the unit circle before the
  /// fractional power. Meant for estimated geometry, where the moduli are off.
  bool unit_modulus = false;
  double rank_tol = 1e-10;
  /// When false, near-collinear angles fall back to the truncated pseudo-inverse
  /// instead of raising RankDeficient.
  bool require_full_rank = true;
};

struct ReconstructionResult {
  CVector h_hat;
  numerics::HermitianMatrix phi;
  EstimatorKind kind = EstimatorKind::kLmmse;
  Index dropped_paths = 0;  // paths with b == 0 left out of the MMSE estimator
};

/// u -> |u|^kappa exp(j kappa Arg(u)), Arg in [0, 2 pi).
cplx fractional_power(cplx u, double kappa);

ReconstructionResult reconstruct_mmse(const CVector& h_ul, const channel::UserGeometry& geo,
                                      const channel::ArrayConfig& cfg, const ReconstructOptions& opts = {});

ReconstructionResult reconstruct_lmmse(const CVector& h_ul, const channel::UserGeometry& geo,
                                       const channel::ArrayConfig& cfg, const ReconstructOptions& opts = {});

ReconstructionResult reconstruct(EstimatorKind kind, const CVector& h_ul, const channel::UserGeometry& geo,
                                 const channel::ArrayConfig& cfg, const ReconstructOptions& opts = {});

/// (1 - q) A_dl Sigma A_dl^H with q = |eta|^2 (MMSE) or Re(eta)^2 (L-MMSE).
numerics::HermitianMatrix error_covariance(const channel::UserGeometry& geo, const channel::ArrayConfig& cfg,
                                           EstimatorKind kind);

/// 1 - |eta|^2 or 1 - Re(eta)^2.
double asymptotic_mse(double kappa, EstimatorKind kind);

/// sin^4(pi k) / (pi^2 (1 - k)^2), the L-MMSE excess over MMSE.
double delta_mse(double kappa);

/// h_hat h_hat^H + Phi.
numerics::HermitianMatrix outer_approx(const ReconstructionResult& res);

struct DeltaError {
  /// (1/N^2) || h_dl h_dl^H - (h_hat h_hat^H + Phi) ||_F^2
  double empirical = 0.0;
  /// Large-N limit: sum over ordered pairs l != l' of
  /// (1 + Re(eta)^4) b_l^2 b_l'^2 - 2 Re(eta)^2 Re(g_l^dl conj(g_l'^dl) conj(g_l^ul) g_l'^ul).
  double theoretical = 0.0;
  /// Variant with twice the pair weights and the uplink gains unconjugated.
  /// Kept for comparison; it is nonzero at kappa = 1.
  double theoretical_uncorrected = 0.0;
};

DeltaError delta_error(const channel::ChannelPair& pair, const ReconstructionResult& res,
                       const channel::UserGeometry& geo, const channel::ArrayConfig& cfg,
                       channel::PhaseConvention conv = channel::PhaseConvention::kPropagationResidual);

}  // namespace fdd::reconstruction
