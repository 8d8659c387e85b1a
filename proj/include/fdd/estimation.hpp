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
#include <limits>
#include <vector>

#include "fdd/channel.hpp"
#include "fdd/numerics.hpp"

namespace fdd::estimation {

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

struct PilotObservation {
  CVector y;
  double snr_db = kNoiseless;
  std::uint64_t seed = 0;
  double noise_variance = 0.0;  // per antenna
};

/// y = h_ul + n, n ~ CN(0, ||h_ul||^2 / (N 10^(snr/10)) I). snr_db = +inf gives y = h_ul.
PilotObservation observe_pilot(const CVector& h_ul, double snr_db, std::uint64_t seed);

struct AoaOptions {
  double grid_step_deg = 0.02;
  Index subarray = 0;  // 0 selects ceil(N / 2)
  bool forward_backward = true;
  /// Signal eigenvalues below this fraction of the largest count as collapsed.
  double significance = 1e-10;
};

struct AoaEstimate {
  std::vector<double> theta;  // ascending
  Index unresolved = 0;       // L minus the number of angles found
};

/// Spatially smoothed MUSIC on one or more snapshots.
AoaEstimate estimate_aoa(const std::vector<CVector>& snapshots, Index L, const channel::ArrayConfig& cfg,
                         const AoaOptions& opts = {});
AoaEstimate estimate_aoa(const CVector& y, Index L, const channel::ArrayConfig& cfg,
                         const AoaOptions& opts = {});

/// MUSIC null spectrum ||a||^2 - ||E_s^H a||^2 on the smoothed subarray,
/// exposed for diagnostics and tests.
struct NullSpectrum {
  CMatrix signal_subspace;  // M x r
  double eval(double theta, double lambda, double d) const;
};

NullSpectrum music_subspace(const std::vector<CVector>& snapshots, Index L, const AoaOptions& opts);

struct GainEstimate {
  CVector g;              // pinv(A(theta_hat)) y
  std::vector<double> b;  // |g|
};

GainEstimate estimate_gains_ls(const CVector& y, const std::vector<double>& theta_hat,
                               const channel::ArrayConfig& cfg);

/// Full uplink chain: angles, least-squares gains, canonical ordering by b_hat.
/// r is unknown to the receiver and set to lambda_ul; phi holds arg(g_hat).
channel::UserGeometry estimate_geometry(const PilotObservation& obs, Index L, const channel::ArrayConfig& cfg,
                                        const AoaOptions& opts = {}, Index* unresolved = nullptr);

/// Absolute angle errors after optimal one-to-one matching (sorted pairing,
/// which minimizes the total absolute distance on a line).
std::vector<double> matched_angle_errors(std::vector<double> estimate, std::vector<double> truth);

}  // namespace fdd::estimation
