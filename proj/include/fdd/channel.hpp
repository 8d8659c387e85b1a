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
#include <vector>

#include "fdd/numerics.hpp"

namespace fdd::channel {

/// Uniform linear array shared by the uplink and downlink carriers.
struct ArrayConfig {
  Index N = 1;
  double d = 0.0;  // element spacing [m]
  double lambda_ul = 0.0;
  double lambda_dl = 0.0;

  double kappa() const noexcept { return lambda_ul / lambda_dl; }
  void validate() const;

  /// Half-wavelength spacing at the uplink carrier.
  static ArrayConfig from_carriers(Index n, double f_ul_hz, double f_dl_hz);
};

inline constexpr double kSpeedOfLight = 299792458.0;

/// Frequency-invariant per-user path set. Canonical order: b descending,
/// ties broken by theta ascending.
struct UserGeometry {
  std::vector<double> theta;  // [rad], in (-pi/2, pi/2)
  std::vector<double> b;      // amplitude, >= 0
  std::vector<double> r;      // path length [m], > 0
  std::vector<double> phi;    // reflection phase [rad], [0, 2 pi)

  Index L() const noexcept { return static_cast<Index>(theta.size()); }
  void validate() const;
  void canonicalize();
  double power() const;  // sum of b^2
};

/// How the frequency-invariant (r, phi) pair turns into the two carrier phases.
///
/// kPropagationResidual: the propagation delay is taken modulo one uplink
///   wavelength, r_eff = r mod lambda_ul, and both carriers see exp(-j 2 pi r_eff / lambda + j phi).
///   The uplink gain is unchanged; the downlink phase is correlated with it through eta.
/// kUplinkPrincipal: the uplink phase psi = wrap(phi - 2 pi r_eff / lambda_ul) in [0, 2 pi)
///   is the reference; the downlink phase is kappa * psi + (1 - kappa) * phi.
/// kAbsolute: raw r on both carriers (physical delay, phases decorrelate).
enum class PhaseConvention { kPropagationResidual, kUplinkPrincipal, kAbsolute };

struct PathLossModel {
  double r0 = 1.0;            // reference distance [m]
  double m = 3.0;             // exponent, dB per decade is 10 m
  double shadow_sigma = 4.0;  // [dB]
};

struct PathLoss {
  double db = 0.0;
  bool clamped = false;  // r < r0 was raised to r0
};

struct ChannelPair {
  CVector h_ul;
  CVector h_dl;
};

struct PathGains {
  CVector ul;
  CVector dl;
};

struct ScenarioConfig {
  Index L = 3;
  double isd = 500.0;
  double bs_height = 32.0;
  double ue_height = 1.5;
  double min_distance = 10.0;        // 2-D exclusion radius around the BS [m]
  double angular_spread_deg = 15.0;  // half-width around the user bearing
  double max_excess_m = 30.0;        // per-path excess length, uniform in [0, max]
  double lambda_ref = kSpeedOfLight / 10e9;
  PathLossModel path_loss;
  bool split_power_across_paths = true;  // b /= sqrt(L)

  void validate() const;
  double cell_radius() const;  // hexagon circumradius
};

struct UserDrop {
  UserGeometry geo;
  double x = 0.0;
  double y = 0.0;
  double distance_2d = 0.0;
  double bearing = 0.0;  // broadside angle of the line of sight
};

/// a(theta, lambda)[n] = exp(-j 2 pi n d sin(theta) / lambda).
CVector array_response(double theta, double lambda, const ArrayConfig& cfg);

/// N x L matrix with columns a(theta_l, lambda).
CMatrix steering_matrix(const std::vector<double>& theta, double lambda, const ArrayConfig& cfg);

/// b * exp(-j 2 pi r / lambda + j phi).
cplx path_gain(double b, double r, double phi, double lambda);

PathGains path_gains(const UserGeometry& geo, const ArrayConfig& cfg,
                     PhaseConvention conv = PhaseConvention::kPropagationResidual);

ChannelPair synthesize_pair(const UserGeometry& geo, const ArrayConfig& cfg,
                            PhaseConvention conv = PhaseConvention::kPropagationResidual);

/// 20 log10(4 pi r0 / lambda) + 10 m log10(r / r0) + shadow_db.
PathLoss path_loss_db(double r, double lambda, const PathLossModel& model, double shadow_db);

/// Linear amplitude 10^(-loss_db / 20), so the received power falls by loss_db.
double amplitude_from_db(double loss_db);

UserDrop sample_user(std::uint64_t seed, const ScenarioConfig& scenario);
UserGeometry sample_geometry(std::uint64_t seed, const ScenarioConfig& scenario);

/// Total path power sum b^2 of a user at the cell edge without shadowing or excess length.
double cell_edge_power(const ScenarioConfig& scenario);

}  // namespace fdd::channel
