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

#include "fdd/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace fdd::channel {

using numerics::InvalidInput;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_2pi(double x) {
  double w = x - kTwoPi * std::floor(x / kTwoPi);
  return w >= kTwoPi ? 0.0 : w;
}

}  // namespace

void ArrayConfig::validate() const {
  if (N < 1) throw InvalidInput("ArrayConfig: N must be >= 1");
  if (!(d > 0.0) || !(lambda_ul > 0.0) || !(lambda_dl > 0.0))
    throw InvalidInput("ArrayConfig: spacing and wavelengths must be positive");
}

ArrayConfig ArrayConfig::from_carriers(Index n, double f_ul_hz, double f_dl_hz) {
  if (!(f_ul_hz > 0.0) || !(f_dl_hz > 0.0)) throw InvalidInput("ArrayConfig: carriers must be positive");
  ArrayConfig cfg;
  cfg.N = n;
  cfg.lambda_ul = kSpeedOfLight / f_ul_hz;
  cfg.lambda_dl = kSpeedOfLight / f_dl_hz;
  cfg.d = 0.5 * cfg.lambda_ul;
  cfg.validate();
  return cfg;
}

void UserGeometry::validate() const {
  const auto n = theta.size();
  if (n == 0) throw InvalidInput("UserGeometry: L must be >= 1");
  if (b.size() != n || r.size() != n || phi.size() != n)
    throw InvalidInput("UserGeometry: field lengths differ");
  for (std::size_t l = 0; l < n; ++l) {
    if (!std::isfinite(theta[l]) || std::abs(theta[l]) >= 0.5 * std::numbers::pi)
      throw InvalidInput("UserGeometry: theta outside (-pi/2, pi/2)");
    if (!(b[l] >= 0.0) || !std::isfinite(b[l])) throw InvalidInput("UserGeometry: negative b");
    if (!(r[l] > 0.0) || !std::isfinite(r[l])) throw InvalidInput("UserGeometry: r must be positive");
    if (!std::isfinite(phi[l])) throw InvalidInput("UserGeometry: phi not finite");
  }
}

void UserGeometry::canonicalize() {
  std::vector<std::size_t> idx(theta.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t c) {
    if (b[a] != b[c]) return b[a] > b[c];
    return theta[a] < theta[c];
  });
  auto permute = [&](std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
    v.swap(out);
  };
  permute(theta);
  permute(b);
  permute(r);
  permute(phi);
}

double UserGeometry::power() const {
  double s = 0.0;
  for (double x : b) s += x * x;
  return s;
}

void ScenarioConfig::validate() const {
  if (L < 1) throw InvalidInput("ScenarioConfig: L must be >= 1");
  if (!(isd > 0.0)) throw InvalidInput("ScenarioConfig: isd must be positive");
  if (!(min_distance >= 0.0) || min_distance >= 0.8 * cell_radius())
    throw InvalidInput("ScenarioConfig: min_distance must lie inside the cell");
  if (!(angular_spread_deg >= 0.0) || angular_spread_deg >= 89.0)
    throw InvalidInput("ScenarioConfig: angular spread must lie in [0, 89) degrees");
  if (!(max_excess_m >= 0.0)) throw InvalidInput("ScenarioConfig: max_excess_m must be >= 0");
  if (!(lambda_ref > 0.0)) throw InvalidInput("ScenarioConfig: lambda_ref must be positive");
  if (!(path_loss.r0 > 0.0) || !(path_loss.shadow_sigma >= 0.0))
    throw InvalidInput("ScenarioConfig: bad path-loss model");
}

double ScenarioConfig::cell_radius() const { return isd / std::sqrt(3.0); }

CVector array_response(double theta, double lambda, const ArrayConfig& cfg) {
  const double step = kTwoPi * cfg.d * std::sin(theta) / lambda;
  CVector a(cfg.N);
  a(0) = cplx(1.0, 0.0);
  for (Index n = 1; n < cfg.N; ++n) a(n) = std::polar(1.0, -step * static_cast<double>(n));
  return a;
}

CMatrix steering_matrix(const std::vector<double>& theta, double lambda, const ArrayConfig& cfg) {
  CMatrix a(cfg.N, static_cast<Index>(theta.size()));
  for (std::size_t l = 0; l < theta.size(); ++l) a.col(static_cast<Index>(l)) = array_response(theta[l], lambda, cfg);
  return a;
}

cplx path_gain(double b, double r, double phi, double lambda) {
  return std::polar(b, -kTwoPi * r / lambda + phi);
}

PathGains path_gains(const UserGeometry& geo, const ArrayConfig& cfg, PhaseConvention conv) {
  const Index L = geo.L();
  PathGains g{CVector(L), CVector(L)};
  const double kappa = cfg.kappa();
  for (Index l = 0; l < L; ++l) {
    const auto i = static_cast<std::size_t>(l);
    const double b = geo.b[i];
    const double phi = geo.phi[i];
    switch (conv) {
      case PhaseConvention::kAbsolute:
        g.ul(l) = path_gain(b, geo.r[i], phi, cfg.lambda_ul);
        g.dl(l) = path_gain(b, geo.r[i], phi, cfg.lambda_dl);
        break;
      case PhaseConvention::kPropagationResidual: {
        const double r_eff = std::fmod(geo.r[i], cfg.lambda_ul);
        g.ul(l) = path_gain(b, r_eff, phi, cfg.lambda_ul);
        g.dl(l) = path_gain(b, r_eff, phi, cfg.lambda_dl);
        break;
      }
      case PhaseConvention::kUplinkPrincipal: {
        const double r_eff = std::fmod(geo.r[i], cfg.lambda_ul);
        const double psi = wrap_2pi(phi - kTwoPi * r_eff / cfg.lambda_ul);
        g.ul(l) = std::polar(b, psi);
        g.dl(l) = std::polar(b, kappa * psi + (1.0 - kappa) * phi);
        break;
      }
    }
  }
  return g;
}

ChannelPair synthesize_pair(const UserGeometry& geo, const ArrayConfig& cfg, PhaseConvention conv) {
  geo.validate();
  cfg.validate();
  const PathGains g = path_gains(geo, cfg, conv);
  ChannelPair p{CVector::Zero(cfg.N), CVector::Zero(cfg.N)};
  for (Index l = 0; l < geo.L(); ++l) {
    const double theta = geo.theta[static_cast<std::size_t>(l)];
    p.h_ul += g.ul(l) * array_response(theta, cfg.lambda_ul, cfg);
    p.h_dl += g.dl(l) * array_response(theta, cfg.lambda_dl, cfg);
  }
  return p;
}

PathLoss path_loss_db(double r, double lambda, const PathLossModel& model, double shadow_db) {
  if (!(lambda > 0.0) || !(model.r0 > 0.0)) throw InvalidInput("path_loss_db: bad wavelength or r0");
  PathLoss out;
  if (r < model.r0) {
    r = model.r0;
    out.clamped = true;
  }
  out.db = 20.0 * std::log10(2.0 * kTwoPi * model.r0 / lambda) + 10.0 * model.m * std::log10(r / model.r0) +
           shadow_db;
  return out;
}

double amplitude_from_db(double loss_db) { return std::pow(10.0, -loss_db / 20.0); }

UserDrop sample_user(std::uint64_t seed, const ScenarioConfig& sc) {
  sc.validate();
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Flat-topped hexagon with vertices at 0, 60, ... degrees.
  const double R = sc.cell_radius();
  const double h = 0.5 * std::sqrt(3.0) * R;
  UserDrop drop;
  for (;;) {
    const double x = (2.0 * unit(gen) - 1.0) * R;
    const double y = (2.0 * unit(gen) - 1.0) * h;
    if (std::abs(y) > h || std::sqrt(3.0) * std::abs(x) + std::abs(y) > std::sqrt(3.0) * R) continue;
    const double dist = std::hypot(x, y);
    if (dist < sc.min_distance) continue;
    drop.x = x;
    drop.y = y;
    drop.distance_2d = dist;
    break;
  }
  // The array axis is the y axis; azimuth folds onto the broadside half plane.
  drop.bearing = std::asin(std::sin(std::atan2(drop.y, drop.x)));

  const double spread = sc.angular_spread_deg * std::numbers::pi / 180.0;
  const double limit = 89.0 * std::numbers::pi / 180.0;
  const double dz = sc.bs_height - sc.ue_height;
  const double d3 = std::sqrt(drop.distance_2d * drop.distance_2d + dz * dz);
  const double split = sc.split_power_across_paths ? 1.0 / std::sqrt(static_cast<double>(sc.L)) : 1.0;

  UserGeometry& g = drop.geo;
  const auto L = static_cast<std::size_t>(sc.L);
  g.theta.resize(L);
  g.b.resize(L);
  g.r.resize(L);
  g.phi.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    g.theta[l] = std::clamp(drop.bearing + (2.0 * unit(gen) - 1.0) * spread, -limit, limit);
    g.r[l] = d3 + sc.max_excess_m * unit(gen);
    const double shadow = sc.path_loss.shadow_sigma * normal(gen);
    g.b[l] = split * amplitude_from_db(path_loss_db(g.r[l], sc.lambda_ref, sc.path_loss, shadow).db);
    g.phi[l] = kTwoPi * unit(gen);
    if (g.phi[l] >= kTwoPi) g.phi[l] = 0.0;
  }
  g.canonicalize();
  return drop;
}

UserGeometry sample_geometry(std::uint64_t seed, const ScenarioConfig& scenario) {
  return sample_user(seed, scenario).geo;
}

double cell_edge_power(const ScenarioConfig& sc) {
  const double dz = sc.bs_height - sc.ue_height;
  const double R = sc.cell_radius();
  const double b = amplitude_from_db(path_loss_db(std::sqrt(R * R + dz * dz), sc.lambda_ref, sc.path_loss, 0.0).db);
  return b * b;
}

}  // namespace fdd::channel
