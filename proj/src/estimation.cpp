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

#include "fdd/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

namespace fdd::estimation {

using numerics::InvalidInput;

namespace {

constexpr double kPi = std::numbers::pi;

struct SpectrumValue {
  double value;  // M - ||E^H a||^2
  double slope;  // d value / d theta
};

// Evaluates the null spectrum and its derivative in one pass over the subarray.
SpectrumValue evaluate(const CMatrix& es, double theta, double lambda, double d) {
  const Index m = es.rows();
  const double k = 2.0 * kPi * d / lambda;
  const cplx z = std::polar(1.0, -k * std::sin(theta));
  const double dphase = -k * std::cos(theta);  // d(phase step)/d theta
  CVector p = CVector::Zero(es.cols());   // E^H a
  CVector dp = CVector::Zero(es.cols());  // E^H da/dtheta
  cplx zn(1.0, 0.0);
  for (Index n = 0; n < m; ++n) {
    const cplx dz = zn * cplx(0.0, dphase * static_cast<double>(n));
    for (Index c = 0; c < es.cols(); ++c) {
      const cplx e = std::conj(es(n, c));
      p(c) += e * zn;
      dp(c) += e * dz;
    }
    zn *= z;
    if ((n & 31) == 31) zn /= std::abs(zn);  // keep the recurrence on the unit circle
  }
  return {static_cast<double>(m) - p.squaredNorm(), -2.0 * p.dot(dp).real()};
}

}  // namespace

PilotObservation observe_pilot(const CVector& h_ul, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw InvalidInput("observe_pilot: snr_db must be finite or +inf");
  PilotObservation obs;
  obs.snr_db = snr_db;
  obs.seed = seed;
  obs.y = h_ul;
  if (snr_db == kNoiseless) return obs;
  const auto n = static_cast<double>(h_ul.size());
  obs.noise_variance = h_ul.squaredNorm() / (n * std::pow(10.0, snr_db / 10.0));
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5 * obs.noise_variance));
  for (Index i = 0; i < h_ul.size(); ++i) obs.y(i) += cplx(nd(gen), nd(gen));
  return obs;
}

double NullSpectrum::eval(double theta, double lambda, double d) const {
  return evaluate(signal_subspace, theta, lambda, d).value;
}

NullSpectrum music_subspace(const std::vector<CVector>& snapshots, Index L, const AoaOptions& opts) {
  if (snapshots.empty()) throw InvalidInput("estimate_aoa: no snapshots");
  const Index n = snapshots.front().size();
  if (L < 1) throw InvalidInput("estimate_aoa: L must be >= 1");
  if (n < 2 * L + 1) throw InvalidInput("estimate_aoa: need N >= 2L + 1 for spatial smoothing");
  const Index m = opts.subarray > 0 ? opts.subarray : (n + 1) / 2;
  if (m <= L || m > n) throw InvalidInput("estimate_aoa: subarray length must exceed L and not exceed N");
  const Index count = n - m + 1;

  CMatrix r = CMatrix::Zero(m, m);
  for (const auto& y : snapshots) {
    if (y.size() != n) throw InvalidInput("estimate_aoa: snapshot lengths differ");
    for (Index p = 0; p < count; ++p) r.noalias() += y.segment(p, m) * y.segment(p, m).adjoint();
  }
  r /= static_cast<double>(count * static_cast<Index>(snapshots.size()));
  if (opts.forward_backward) {
    // J conj(R) J with J the exchange matrix.
    CMatrix back = r.conjugate().reverse();
    r = 0.5 * (r + back);
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
  const auto& ev = es.eigenvalues();
  const double top = ev(m - 1);
  Index rank = 0;
  for (Index i = 0; i < L; ++i)
    if (ev(m - 1 - i) > opts.significance * top && top > 0.0) ++rank;
  NullSpectrum out;
  out.signal_subspace = es.eigenvectors().rightCols(rank);
  return out;
}

AoaEstimate estimate_aoa(const std::vector<CVector>& snapshots, Index L, const channel::ArrayConfig& cfg,
                         const AoaOptions& opts) {
  cfg.validate();
  if (!(opts.grid_step_deg > 0.0)) throw InvalidInput("estimate_aoa: grid step must be positive");
  for (const auto& y : snapshots)
    if (y.size() != cfg.N) throw InvalidInput("estimate_aoa: snapshot length differs from N");
  const NullSpectrum ns = music_subspace(snapshots, L, opts);
  const CMatrix& es = ns.signal_subspace;
  AoaEstimate out;
  const Index rank = es.cols();
  if (rank == 0) {
    out.unresolved = L;
    return out;
  }

  const double step = opts.grid_step_deg * kPi / 180.0;
  const double edge = 0.5 * kPi - 1e-9;
  const auto points = static_cast<Index>(std::floor(2.0 * edge / step)) + 1;
  std::vector<double> grid(static_cast<std::size_t>(points));
  std::vector<double> val(static_cast<std::size_t>(points));
  for (Index i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = -edge + static_cast<double>(i) * step;
    val[static_cast<std::size_t>(i)] = evaluate(es, grid[static_cast<std::size_t>(i)], cfg.lambda_ul, cfg.d).value;
  }

  std::vector<std::size_t> minima;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const bool left = i == 0 || val[i] <= val[i - 1];
    const bool right = i + 1 == val.size() || val[i] < val[i + 1];
    if (left && right) minima.push_back(i);
  }
  std::sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
  if (static_cast<Index>(minima.size()) > rank) minima.resize(static_cast<std::size_t>(rank));

  for (std::size_t i : minima) {
    double lo = i > 0 ? grid[i - 1] : grid[i];
    double hi = i + 1 < grid.size() ? grid[i + 1] : grid[i];
    double theta = grid[i];
    if (i > 0 && i + 1 < grid.size()) {
      // Parabolic vertex through the three grid samples.
      const double denom = val[i - 1] - 2.0 * val[i] + val[i + 1];
      if (denom > 0.0) theta += 0.5 * step * (val[i - 1] - val[i + 1]) / denom;
      theta = std::clamp(theta, lo, hi);
    }
    // Bisection on the slope sharpens the vertex to machine precision.
    double s_lo = evaluate(es, lo, cfg.lambda_ul, cfg.d).slope;
    double s_hi = evaluate(es, hi, cfg.lambda_ul, cfg.d).slope;
    if (s_lo < 0.0 && s_hi > 0.0) {
      for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (evaluate(es, mid, cfg.lambda_ul, cfg.d).slope < 0.0)
          lo = mid;
        else
          hi = mid;
      }
      theta = 0.5 * (lo + hi);
    }
    out.theta.push_back(theta);
  }
  std::sort(out.theta.begin(), out.theta.end());
  out.unresolved = L - static_cast<Index>(out.theta.size());
  return out;
}

AoaEstimate estimate_aoa(const CVector& y, Index L, const channel::ArrayConfig& cfg, const AoaOptions& opts) {
  return estimate_aoa(std::vector<CVector>{y}, L, cfg, opts);
}

GainEstimate estimate_gains_ls(const CVector& y, const std::vector<double>& theta_hat,
                               const channel::ArrayConfig& cfg) {
  cfg.validate();
  if (y.size() != cfg.N) throw InvalidInput("estimate_gains_ls: y length differs from N");
  if (theta_hat.empty()) throw InvalidInput("estimate_gains_ls: no angles");
  const CMatrix a = channel::steering_matrix(theta_hat, cfg.lambda_ul, cfg);
  if (numerics::numerical_rank(a) < a.cols())
    throw numerics::InvalidInput("estimate_gains_ls: steering matrix at the estimated angles is rank deficient");
  GainEstimate out;
  out.g = numerics::pinv(a) * y;
  out.b.resize(theta_hat.size());
  for (Index l = 0; l < out.g.size(); ++l) out.b[static_cast<std::size_t>(l)] = std::abs(out.g(l));
  return out;
}

channel::UserGeometry estimate_geometry(const PilotObservation& obs, Index L, const channel::ArrayConfig& cfg,
                                        const AoaOptions& opts, Index* unresolved) {
  const AoaEstimate aoa = estimate_aoa(obs.y, L, cfg, opts);
  if (unresolved) *unresolved = aoa.unresolved;
  if (aoa.theta.empty()) throw InvalidInput("estimate_geometry: no resolvable path");
  const GainEstimate gains = estimate_gains_ls(obs.y, aoa.theta, cfg);
  channel::UserGeometry geo;
  geo.theta = aoa.theta;
  geo.b = gains.b;
  geo.r.assign(aoa.theta.size(), cfg.lambda_ul);
  geo.phi.resize(aoa.theta.size());
  for (std::size_t l = 0; l < aoa.theta.size(); ++l) {
    double a = std::arg(gains.g(static_cast<Index>(l)));
    geo.phi[l] = a < 0.0 ? a + 2.0 * kPi : a;
  }
  geo.canonicalize();
  return geo;
}

std::vector<double> matched_angle_errors(std::vector<double> estimate, std::vector<double> truth) {
  if (estimate.size() != truth.size()) throw InvalidInput("matched_angle_errors: size mismatch");
  std::sort(estimate.begin(), estimate.end());
  std::sort(truth.begin(), truth.end());
  std::vector<double> err(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) err[i] = std::abs(estimate[i] - truth[i]);
  return err;
}

}  // namespace fdd::estimation
