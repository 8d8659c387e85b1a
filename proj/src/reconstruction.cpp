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

#include "fdd/reconstruction.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace fdd::reconstruction {

using numerics::HermitianMatrix;
using numerics::InvalidInput;

namespace {

constexpr double kPi = std::numbers::pi;

double q_factor(const Eta& e, EstimatorKind kind) {
  return kind == EstimatorKind::kMmse ? std::norm(e.value) : e.value.real() * e.value.real();
}

void check_rank(const CMatrix& a_ul, double tol) {
  const Index rank = numerics::numerical_rank(a_ul, tol);
  if (rank < a_ul.cols()) {
    std::ostringstream os;
    os << "uplink steering matrix has rank " << rank << " < " << a_ul.cols()
       << " paths; check the angle separation (or N)";
    throw RankDeficient(os.str());
  }
}

}  // namespace

const char* to_string(EstimatorKind kind) { return kind == EstimatorKind::kMmse ? "mmse" : "lmmse"; }

Eta eta(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidInput("eta: kappa must be positive");
  Eta e;
  e.kappa = kappa;
  if (std::abs(kappa - 1.0) < 1e-9) return e;
  const double s = std::sin(kPi * kappa);
  e.value = cplx(std::sin(2.0 * kPi * kappa), -2.0 * s * s) / (2.0 * kPi * (kappa - 1.0));
  return e;
}

cplx fractional_power(cplx u, double kappa) {
  double arg = std::arg(u);
  if (arg < 0.0) arg += 2.0 * kPi;
  return std::polar(std::pow(std::abs(u), kappa), kappa * arg);
}

ReconstructionResult reconstruct_mmse(const CVector& h_ul, const channel::UserGeometry& geo,
                                      const channel::ArrayConfig& cfg, const ReconstructOptions& opts) {
  geo.validate();
  cfg.validate();
  if (h_ul.size() != cfg.N) throw InvalidInput("reconstruct_mmse: h_ul length differs from N");

  // Paths without power carry no phase information.
  channel::UserGeometry kept;
  for (Index l = 0; l < geo.L(); ++l) {
    const auto i = static_cast<std::size_t>(l);
    if (geo.b[i] > 0.0) {
      kept.theta.push_back(geo.theta[i]);
      kept.b.push_back(geo.b[i]);
      kept.r.push_back(geo.r[i]);
      kept.phi.push_back(geo.phi[i]);
    }
  }
  ReconstructionResult res;
  res.kind = EstimatorKind::kMmse;
  res.dropped_paths = geo.L() - kept.L();
  const Eta e = eta(cfg.kappa());

  if (kept.L() == 0) {
    res.h_hat = CVector::Zero(cfg.N);
    res.phi = HermitianMatrix(cfg.N, true);
    return res;
  }

  const CMatrix a_ul = channel::steering_matrix(kept.theta, cfg.lambda_ul, cfg);
  if (opts.require_full_rank) check_rank(a_ul, opts.rank_tol);
  const CMatrix a_dl = channel::steering_matrix(kept.theta, cfg.lambda_dl, cfg);
  const CVector g = numerics::pinv(a_ul, opts.rank_tol) * h_ul;

  CVector scaled(kept.L());
  for (Index l = 0; l < kept.L(); ++l) {
    const double b = kept.b[static_cast<std::size_t>(l)];
    cplx u = g(l) / b;
    if (opts.unit_modulus) u = std::abs(u) > 0.0 ? u / std::abs(u) : cplx(1.0, 0.0);
    scaled(l) = b * fractional_power(u, cfg.kappa());
  }
  res.h_hat = e.value * (a_dl * scaled);
  res.phi = error_covariance(kept, cfg, EstimatorKind::kMmse);
  return res;
}

ReconstructionResult reconstruct_lmmse(const CVector& h_ul, const channel::UserGeometry& geo,
                                       const channel::ArrayConfig& cfg, const ReconstructOptions& opts) {
  geo.validate();
  cfg.validate();
  if (h_ul.size() != cfg.N) throw InvalidInput("reconstruct_lmmse: h_ul length differs from N");
  const CMatrix a_ul = channel::steering_matrix(geo.theta, cfg.lambda_ul, cfg);
  if (opts.require_full_rank) check_rank(a_ul, opts.rank_tol);
  const CMatrix a_dl = channel::steering_matrix(geo.theta, cfg.lambda_dl, cfg);
  const Eta e = eta(cfg.kappa());

  ReconstructionResult res;
  res.kind = EstimatorKind::kLmmse;
  res.h_hat = e.value.real() * (a_dl * (numerics::pinv(a_ul, opts.rank_tol) * h_ul));
  res.phi = error_covariance(geo, cfg, EstimatorKind::kLmmse);
  return res;
}

ReconstructionResult reconstruct(EstimatorKind kind, const CVector& h_ul, const channel::UserGeometry& geo,
                                 const channel::ArrayConfig& cfg, const ReconstructOptions& opts) {
  return kind == EstimatorKind::kMmse ? reconstruct_mmse(h_ul, geo, cfg, opts)
                                      : reconstruct_lmmse(h_ul, geo, cfg, opts);
}

HermitianMatrix error_covariance(const channel::UserGeometry& geo, const channel::ArrayConfig& cfg,
                                 EstimatorKind kind) {
  geo.validate();
  cfg.validate();
  const double w = 1.0 - q_factor(eta(cfg.kappa()), kind);
  CMatrix a_dl = channel::steering_matrix(geo.theta, cfg.lambda_dl, cfg);
  for (Index l = 0; l < geo.L(); ++l) a_dl.col(l) *= geo.b[static_cast<std::size_t>(l)];
  CMatrix phi = w * (a_dl * a_dl.adjoint());
  return HermitianMatrix::from_dense(phi, true);
}

double asymptotic_mse(double kappa, EstimatorKind kind) { return 1.0 - q_factor(eta(kappa), kind); }

double delta_mse(double kappa) {
  if (!(kappa > 0.0)) throw InvalidInput("delta_mse: kappa must be positive");
  if (std::abs(kappa - 1.0) < 1e-9) return 0.0;
  const double s = std::sin(kPi * kappa);
  const double d = kPi * (1.0 - kappa);
  return s * s * s * s / (d * d);
}

HermitianMatrix outer_approx(const ReconstructionResult& res) {
  CMatrix m = res.h_hat * res.h_hat.adjoint() + res.phi.dense();
  return HermitianMatrix::from_dense(m, true);
}

DeltaError delta_error(const channel::ChannelPair& pair, const ReconstructionResult& res,
                       const channel::UserGeometry& geo, const channel::ArrayConfig& cfg,
                       channel::PhaseConvention conv) {
  const Index n = cfg.N;
  if (pair.h_dl.size() != n || res.h_hat.size() != n) throw InvalidInput("delta_error: length mismatch");
  DeltaError out;
  const CMatrix diff = pair.h_dl * pair.h_dl.adjoint() - res.h_hat * res.h_hat.adjoint() - res.phi.dense();
  out.empirical = diff.squaredNorm() / (static_cast<double>(n) * static_cast<double>(n));

  const double c = std::pow(eta(cfg.kappa()).value.real(), 2);
  const channel::PathGains g = channel::path_gains(geo, cfg, conv);
  for (Index l = 0; l < geo.L(); ++l) {
    for (Index m = 0; m < geo.L(); ++m) {
      if (l == m) continue;
      const double bb = std::pow(geo.b[static_cast<std::size_t>(l)] * geo.b[static_cast<std::size_t>(m)], 2);
      const cplx cross = g.dl(l) * std::conj(g.dl(m)) * std::conj(g.ul(l)) * g.ul(m);
      out.theoretical += (1.0 + c * c) * bb - 2.0 * c * cross.real();
      const cplx uncorrected = g.dl(l) * std::conj(g.dl(m)) * g.ul(l) * std::conj(g.ul(m));
      out.theoretical_uncorrected += 2.0 * (1.0 + c * c) * bb - 4.0 * c * uncorrected.real();
    }
  }
  return out;
}

}  // namespace fdd::reconstruction
