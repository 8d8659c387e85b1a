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

#include "fdd/precoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace fdd::precoding {

using numerics::BlockDiagOperator;
using numerics::InvalidInput;

namespace {

using BlockPtr = BlockDiagOperator::BlockPtr;

CVector random_unit(Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  CVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = cplx(nd(gen), nd(gen));
  return v / v.norm();
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// u(k, j) = f_j^H M_k f_j
Eigen::MatrixXd user_gram(const CVector& f, const OperatorSet& ops) {
  Eigen::Map<const CMatrix> F(f.data(), ops.N, ops.K);
  Eigen::MatrixXd u(ops.K, ops.K);
  CMatrix mf(ops.N, ops.K);
  for (Index k = 0; k < ops.K; ++k) {
    mf.noalias() = (*ops.M[static_cast<std::size_t>(k)]) * F;
    for (Index j = 0; j < ops.K; ++j) u(k, j) = F.col(j).dot(mf.col(j)).real();
  }
  return u;
}

struct StepWork {
  CVector next;
  double residual = 0.0;
  Index regularized = 0;
};

StepWork step_with_residual(const CVector& f, const OperatorSet& ops, double damping = 1.0) {
  StepWork out;
  WeightedOperators w = weighted_operators(f, ops);
  const CVector af = w.a_hat.apply(f);
  out.residual = (af - w.b_hat.apply(f)).norm() / af.norm();
  CVector x;
  try {
    x = numerics::block_solve(w.b_hat, af, numerics::BlockKind::kHermitianPositive).x;
  } catch (const numerics::SingularBlock&) {
    double diag = 0.0;
    for (Index k = 0; k < ops.K; ++k) diag += w.b_hat.block(k).trace().real();
    const double extra = 1e-12 * std::max(w.b_hat.shift(), diag / static_cast<double>(ops.K * ops.N));
    w = weighted_operators(f, ops, std::max(extra, std::numeric_limits<double>::min()));
    x = numerics::block_solve(w.b_hat, af, numerics::BlockKind::kGeneral).x;
    out.regularized = 1;
  }
  if (damping != 1.0) x = damping * x + (1.0 - damping) * f;
  out.next = x / x.norm();
  return out;
}

}  // namespace

void CsitBundle::validate() const {
  const Index k = K();
  if (k < 1) throw InvalidInput("CsitBundle: K must be >= 1");
  const Index n = N();
  if (n < 1) throw InvalidInput("CsitBundle: N must be >= 1");
  if (static_cast<Index>(sigma2.size()) != k) throw InvalidInput("CsitBundle: sigma2 needs one entry per user");
  if (!phi.empty() && static_cast<Index>(phi.size()) != k)
    throw InvalidInput("CsitBundle: phi needs one entry per user (or none)");
  if (!(P > 0.0) || !std::isfinite(P)) throw InvalidInput("CsitBundle: P must be positive");
  for (Index i = 0; i < k; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (h_hat[u].size() != n) throw InvalidInput("CsitBundle: channel lengths differ");
    if (!numerics::all_finite(h_hat[u])) throw InvalidInput("CsitBundle: non-finite channel");
    if (!(sigma2[u] > 0.0)) throw InvalidInput("CsitBundle: sigma2 must be positive");
    if (!phi.empty() && phi[u].size() != 0 && (phi[u].rows() != n || phi[u].cols() != n))
      throw InvalidInput("CsitBundle: phi has the wrong shape");
    if (!phi.empty() && phi[u].size() != 0) {
      const CMatrix herm = numerics::HermitianMatrix::from_dense(phi[u]).dense();
      // PSD up to round-off: Cholesky of a slightly shifted copy.
      const double slack = 1e-9 * std::max(1.0, std::abs(herm.trace().real()));
      CMatrix shifted = herm;
      shifted.diagonal().array() += slack;
      if (Eigen::LLT<CMatrix>(shifted).info() != Eigen::Success)
        throw InvalidInput("CsitBundle: phi is not positive semi-definite");
    }
  }
}

OperatorSet build_operators(const CsitBundle& bundle) {
  bundle.validate();
  OperatorSet ops;
  ops.K = bundle.K();
  ops.N = bundle.N();
  for (Index k = 0; k < ops.K; ++k) {
    const auto u = static_cast<std::size_t>(k);
    CMatrix m = bundle.h_hat[u] * bundle.h_hat[u].adjoint();
    if (!bundle.phi.empty() && bundle.phi[u].size() != 0) {
      const numerics::HermitianMatrix checked = numerics::HermitianMatrix::from_dense(bundle.phi[u], true);
      m += checked.dense();
    }
    m = 0.5 * (m + m.adjoint()).eval();
    auto mp = std::make_shared<const CMatrix>(std::move(m));
    const double s = bundle.sigma2[u] / bundle.P;
    ops.M.push_back(mp);
    ops.s.push_back(s);
    ops.A.push_back(BlockDiagOperator::repeated(mp, ops.K, ops.N, s));
    std::vector<BlockPtr> blocks(static_cast<std::size_t>(ops.K), mp);
    blocks[u] = nullptr;
    ops.B.emplace_back(std::move(blocks), ops.N, s);
  }
  return ops;
}

QuadraticForms quadratic_forms(const CVector& f, const OperatorSet& ops) {
  if (f.size() != ops.K * ops.N) throw InvalidInput("quadratic_forms: f has the wrong length");
  const double fn = f.squaredNorm();
  if (!(fn > 0.0)) throw InvalidInput("quadratic_forms: f is zero");
  const Eigen::MatrixXd u = user_gram(f, ops);
  QuadraticForms q;
  q.a.resize(static_cast<std::size_t>(ops.K));
  q.b.resize(static_cast<std::size_t>(ops.K));
  for (Index k = 0; k < ops.K; ++k) {
    double interference = 0.0;
    for (Index j = 0; j < ops.K; ++j)
      if (j != k) interference += u(k, j);
    const double noise = ops.s[static_cast<std::size_t>(k)] * fn;
    q.b[static_cast<std::size_t>(k)] = interference + noise;
    q.a[static_cast<std::size_t>(k)] = interference + u(k, k) + noise;
  }
  return q;
}

double log_gamma(const CVector& f, const OperatorSet& ops) {
  const QuadraticForms q = quadratic_forms(f, ops);
  double lg = 0.0;
  for (Index k = 0; k < ops.K; ++k) lg += std::log(q.a[static_cast<std::size_t>(k)]) - std::log(q.b[static_cast<std::size_t>(k)]);
  return lg;
}

double gamma(const CVector& f, const OperatorSet& ops) { return std::exp(log_gamma(f, ops)); }

WeightedOperators weighted_operators(const CVector& f, const OperatorSet& ops, double extra_shift) {
  const Index K = ops.K;
  const Index N = ops.N;
  QuadraticForms q = quadratic_forms(f, ops);

  CMatrix a_blk = CMatrix::Zero(N, N);
  double a_shift = 0.0;
  double b_shift = extra_shift;
  for (Index k = 0; k < K; ++k) {
    const auto u = static_cast<std::size_t>(k);
    a_blk += *ops.M[u] / q.a[u];
    a_shift += ops.s[u] / q.a[u];
    b_shift += ops.s[u] / q.b[u];
  }

  // Block j of B_hat is sum_{k != j} M_k / b_k, built from prefix and suffix
  // sums so that no large term is subtracted back out.
  std::vector<CMatrix> suffix(static_cast<std::size_t>(K) + 1, CMatrix::Zero(N, N));
  for (Index k = K - 1; k >= 0; --k) {
    const auto u = static_cast<std::size_t>(k);
    suffix[u] = suffix[u + 1] + *ops.M[u] / q.b[u];
  }
  std::vector<BlockPtr> b_blocks(static_cast<std::size_t>(K));
  CMatrix prefix = CMatrix::Zero(N, N);
  for (Index j = 0; j < K; ++j) {
    const auto u = static_cast<std::size_t>(j);
    b_blocks[u] = std::make_shared<const CMatrix>(prefix + suffix[u + 1]);
    prefix += *ops.M[u] / q.b[u];
  }

  return WeightedOperators{
      BlockDiagOperator::repeated(std::make_shared<const CMatrix>(std::move(a_blk)), K, N, a_shift),
      BlockDiagOperator(std::move(b_blocks), N, b_shift), std::move(q)};
}

double stationarity_residual(const CVector& f, const OperatorSet& ops) {
  const WeightedOperators w = weighted_operators(f, ops);
  const CVector af = w.a_hat.apply(f);
  return (af - w.b_hat.apply(f)).norm() / af.norm();
}

StepResult gpip_step(const CVector& f, const OperatorSet& ops) {
  StepWork w = step_with_residual(f, ops);
  return StepResult{std::move(w.next), w.regularized};
}

numerics::SelfAdjointMap log_gamma_hessian(const CVector& f, const OperatorSet& ops) {
  const Index K = ops.K;
  const Index N = ops.N;
  auto w = std::make_shared<WeightedOperators>(weighted_operators(f, ops));
  // A_k f / a_k and B_k f / b_k for the rank-one corrections.
  auto av = std::make_shared<std::vector<CVector>>();
  auto bv = std::make_shared<std::vector<CVector>>();
  for (Index k = 0; k < K; ++k) {
    const auto u = static_cast<std::size_t>(k);
    CVector akf = ops.A[u].apply(f);
    CVector bkf = akf;
    bkf.segment(k * N, N) -= (*ops.M[u]) * f.segment(k * N, N);
    av->push_back(akf / w->forms.a[u]);
    bv->push_back(bkf / w->forms.b[u]);
  }
  return [w, av, bv](const CVector& d) {
    CVector out = 2.0 * (w->a_hat.apply(d) - w->b_hat.apply(d));
    for (std::size_t k = 0; k < av->size(); ++k) {
      out -= 4.0 * (*av)[k].dot(d).real() * (*av)[k];
      out += 4.0 * (*bv)[k].dot(d).real() * (*bv)[k];
    }
    return out;
  };
}

SecondOrderReport check_second_order(const CVector& f_in, const OperatorSet& ops, double tol) {
  const Index K = ops.K;
  const Index N = ops.N;
  if (f_in.size() != K * N) throw InvalidInput("check_second_order: f has the wrong length");
  const double fnorm = f_in.norm();
  if (!(fnorm > 0.0)) throw InvalidInput("check_second_order: f is zero");
  const CVector f = f_in / fnorm;
  SecondOrderReport rep;

  // Literal test on S_A = V_A V_A^H and S_B = V_B V_B^H through their K x K Gram matrices.
  {
    const QuadraticForms q = quadratic_forms(f, ops);
    CMatrix va(K * N, K);
    CMatrix vb(K * N, K);
    for (Index k = 0; k < K; ++k) {
      const auto u = static_cast<std::size_t>(k);
      CVector akf = ops.A[u].apply(f);
      CVector bkf = akf;
      bkf.segment(k * N, N) -= (*ops.M[u]) * f.segment(k * N, N);
      va.col(k) = akf / q.a[u];
      vb.col(k) = bkf / q.b[u];
    }
    const int cap = 10000;
    const auto ga = numerics::HermitianMatrix::from_dense(va.adjoint() * va, true);
    const auto gb = numerics::HermitianMatrix::from_dense(vb.adjoint() * vb, true);
    const auto top_b = numerics::extreme_eigenpair(gb, numerics::EigenMode::kMax, 1e-10, cap);
    rep.rho_max = top_b.value;
    if (K * N > K) {
      rep.rho_min = 0.0;  // rank of S_A is at most K
    } else {
      rep.rho_min = numerics::extreme_eigenpair(ga, numerics::EigenMode::kMin, 1e-10, cap).value;
    }
    rep.literal_condition = rep.rho_min > rep.rho_max;
  }

  // The real Hessian is D + sum_c c u u^T: D = 2 (A_hat - B_hat) is complex linear
  // and block diagonal, the rank-one terms carry c = -4 (A side) and +4 (B side).
  // It is tested on the complement of the exact invariance directions
  // Z = {f, i P_j f}. Haynsworth additivity plus the bordered-matrix inertia
  // theorem reduce the inertia of that restriction, shifted by mu, to the blocks
  // of D - mu I and one small symmetric matrix, so eigenvalue counts are exact.
  std::vector<CVector> z{f};
  for (Index j = 0; j < K; ++j) {
    CVector v = CVector::Zero(K * N);
    v.segment(j * N, N) = cplx(0.0, 1.0) * f.segment(j * N, N);
    const double n = v.norm();
    if (n > 1e-14) z.push_back(v / n);
  }
  const auto r = static_cast<Index>(z.size());
  const WeightedOperators w = weighted_operators(f, ops);
  std::vector<Eigen::VectorXd> lam(static_cast<std::size_t>(K));
  std::vector<CMatrix> proj(static_cast<std::size_t>(K));  // V_j^H [U Z]_j
  CMatrix u(K * N, 2 * K + r);
  for (Index k = 0; k < K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    CVector akf = ops.A[uk].apply(f);
    CVector bkf = akf;
    bkf.segment(k * N, N) -= (*ops.M[uk]) * f.segment(k * N, N);
    u.col(k) = akf / w.forms.a[uk];
    u.col(K + k) = bkf / w.forms.b[uk];
  }
  for (Index i = 0; i < r; ++i) u.col(2 * K + i) = z[static_cast<std::size_t>(i)];
  double bound = 0.0;
  for (Index j = 0; j < K; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    CMatrix d = 2.0 * (w.a_hat.block(j) - w.b_hat.block(j));
    d.diagonal().array() += 2.0 * (w.a_hat.shift() - w.b_hat.shift());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (d + d.adjoint()));
    lam[uj] = es.eigenvalues();
    proj[uj] = es.eigenvectors().adjoint() * u.middleRows(j * N, N);
    bound = std::max(bound, lam[uj].cwiseAbs().maxCoeff());
  }
  bound += 4.0 * u.leftCols(2 * K).colwise().squaredNorm().sum();
  rep.scale = bound;

  // Eigenvalues of the restricted Hessian strictly above mu.
  auto count_above = [&](double mu) {
    Index pos = 0;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * K + r, 2 * K + r);
    s.diagonal().head(K).setConstant(0.25);
    s.diagonal().segment(K, K).setConstant(-0.25);
    for (Index j = 0; j < K; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      Eigen::VectorXd inv(N);
      for (Index i = 0; i < N; ++i) {
        double g = lam[uj](i) - mu;
        if (g == 0.0) g = std::numeric_limits<double>::min();
        if (g > 0.0) pos += 2;  // each complex eigenvalue is double in the real picture
        inv(i) = 1.0 / g;
      }
      s -= (proj[uj].adjoint() * inv.asDiagonal() * proj[uj]).real();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
    for (Index i = 0; i < 2 * K + r; ++i)
      if (small.eigenvalues()(i) > 0.0) ++pos;
    return pos - K - r;
  };
  // m-th largest eigenvalue by bisection on the count.
  auto kth_largest = [&](Index m, double& upper) {
    double lo = -bound, hi = bound;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * bound; ++it) {
      const double mid = 0.5 * (lo + hi);
      (count_above(mid) >= m ? lo : hi) = mid;
    }
    upper = hi;
    return 0.5 * (lo + hi);
  };

  const double threshold = -tol * rep.scale;
  rep.curvature = kth_largest(1, rep.curvature_bound);
  rep.eigen_converged = true;
  rep.certified = count_above(threshold) == 0;
  if (!rep.certified)
    rep.diagnostic = rep.curvature > 0.0 ? "positive curvature: saddle point or minimum"
                                         : "curvature too close to zero to certify";
  return rep;
}

namespace {

struct Run {
  CVector f;
  double lg = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  int polish = 0;
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  Index regularized = 0;
  bool certified = false;
  SecondOrderReport report;
  std::vector<CVector> trajectory;
};

Run run_once(const CVector& f0, const OperatorSet& ops, const GpipOptions& opts) {
  Run run;
  run.f = f0 / f0.norm();
  run.lg = log_gamma(run.f, ops);
  if (opts.record_trajectory) run.trajectory.push_back(run.f);
  for (int t = 1; t <= opts.max_iter; ++t) {
    StepWork w = step_with_residual(run.f, ops);
    run.regularized += w.regularized;
    const double lg = log_gamma(w.next, ops);
    const double rel = std::abs(std::expm1(lg - run.lg));
    run.f = std::move(w.next);
    run.lg = lg;
    run.iterations = t;
    if (opts.record_trajectory) run.trajectory.push_back(run.f);
    if (rel < opts.epsilon) {
      run.converged = true;
      break;
    }
  }
  // Continue the same update until the fixed-point equation holds to polish_tol.
  for (;;) {
    StepWork w = step_with_residual(run.f, ops, opts.polish_damping);
    run.residual = w.residual;
    if (run.residual <= opts.polish_tol || run.polish >= opts.max_polish) break;
    run.regularized += w.regularized;
    run.f = std::move(w.next);
    run.lg = log_gamma(run.f, ops);
    ++run.polish;
  }
  if (opts.certify && run.residual <= opts.polish_tol) {
    run.report = check_second_order(run.f, ops, opts.curvature_tol);
    run.certified = run.report.certified;
  }
  return run;
}

}  // namespace

PrecoderSolution gpip_solve(const CsitBundle& bundle, const GpipOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw InvalidInput("gpip_solve: epsilon must be positive");
  if (opts.max_iter < 1 || opts.max_restarts < 0 || opts.max_polish < 0)
    throw InvalidInput("gpip_solve: bad iteration caps");
  if (!(opts.polish_damping > 0.0 && opts.polish_damping <= 1.0))
    throw InvalidInput("gpip_solve: polish_damping must lie in (0, 1]");
  const OperatorSet ops = build_operators(bundle);
  const Index dim = ops.K * ops.N;

  CVector f0;
  switch (opts.init) {
    case InitKind::kZf:
      try {
        f0 = zf_precoder(bundle.h_hat).f;
      } catch (const ZfInfeasible&) {
        f0 = mrt_precoder(bundle.h_hat);
      }
      break;
    case InitKind::kRandom:
      f0 = random_unit(dim, mix(opts.seed));
      break;
    case InitKind::kGiven:
      if (opts.given.size() != dim || !(opts.given.norm() > 0.0))
        throw InvalidInput("gpip_solve: given start has the wrong length or is zero");
      f0 = opts.given;
      break;
  }

  Run best;
  bool have_best = false;
  int restarts = 0;
  const int attempts = opts.certify ? opts.max_restarts + 1 : 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      f0 = random_unit(dim, mix(opts.seed ^ mix(static_cast<std::uint64_t>(attempt))));
      restarts = attempt;
    }
    Run run = run_once(f0, ops, opts);
    const bool better = !have_best || (run.certified && !best.certified) ||
                        (run.certified == best.certified && run.lg > best.lg);
    if (better) {
      best = std::move(run);
      have_best = true;
    }
    if (best.certified) break;
  }

  PrecoderSolution sol;
  sol.f = best.f;
  sol.log_gamma = best.lg;
  sol.gamma = std::exp(best.lg);
  sol.per_user_f = split_users(best.f, ops.K, ops.N);
  sol.iterations = best.iterations;
  sol.polish_iterations = best.polish;
  sol.restarts = restarts;
  sol.converged = best.converged;
  sol.second_order_certified = best.certified;
  sol.stationarity_residual = best.residual;
  sol.regularized_steps = best.regularized;
  sol.second_order = std::move(best.report);
  sol.trajectory = std::move(best.trajectory);
  return sol;
}

std::vector<CVector> split_users(const CVector& f, Index K, Index N) {
  if (f.size() != K * N) throw InvalidInput("split_users: length mismatch");
  std::vector<CVector> out;
  out.reserve(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) out.emplace_back(f.segment(k * N, N));
  return out;
}

PrecoderSolution zf_precoder(const std::vector<CVector>& h) {
  if (h.empty()) throw InvalidInput("zf_precoder: no users");
  const auto K = static_cast<Index>(h.size());
  const Index N = h.front().size();
  if (K > N) throw ZfInfeasible("zero forcing needs K <= N; drop users");
  CMatrix H(N, K);
  for (Index k = 0; k < K; ++k) {
    if (h[static_cast<std::size_t>(k)].size() != N) throw InvalidInput("zf_precoder: channel lengths differ");
    H.col(k) = h[static_cast<std::size_t>(k)];
  }
  if (numerics::numerical_rank(H) < K) throw ZfInfeasible("stacked channel is rank deficient; drop users");
  const CMatrix W = H * numerics::pinv(H.adjoint() * H);
  PrecoderSolution sol;
  sol.f.resize(K * N);
  const double scale = 1.0 / std::sqrt(static_cast<double>(K));
  for (Index k = 0; k < K; ++k) sol.f.segment(k * N, N) = W.col(k) / W.col(k).norm() * scale;
  sol.per_user_f = split_users(sol.f, K, N);
  sol.converged = true;
  return sol;
}

CVector mrt_precoder(const std::vector<CVector>& h) {
  if (h.empty()) throw InvalidInput("mrt_precoder: no users");
  const auto K = static_cast<Index>(h.size());
  const Index N = h.front().size();
  CVector f(K * N);
  const double scale = 1.0 / std::sqrt(static_cast<double>(K));
  for (Index k = 0; k < K; ++k) {
    const CVector& hk = h[static_cast<std::size_t>(k)];
    const double n = hk.norm();
    f.segment(k * N, N) = n > 0.0 ? CVector(hk / n * scale) : CVector(CVector::Constant(N, scale / std::sqrt(static_cast<double>(N))));
  }
  return f;
}

double sum_se_true(const CVector& f, const std::vector<CVector>& true_h, const std::vector<double>& sigma2,
                   double P) {
  const auto K = static_cast<Index>(true_h.size());
  if (K < 1 || static_cast<Index>(sigma2.size()) != K) throw InvalidInput("sum_se_true: user count mismatch");
  const Index N = true_h.front().size();
  if (f.size() != K * N) throw InvalidInput("sum_se_true: f has the wrong length");
  if (!(P > 0.0)) throw InvalidInput("sum_se_true: P must be positive");
  double se = 0.0;
  for (Index k = 0; k < K; ++k) {
    const CVector& hk = true_h[static_cast<std::size_t>(k)];
    double signal = 0.0;
    double interference = 0.0;
    for (Index i = 0; i < K; ++i) {
      const double p = std::norm(hk.dot(f.segment(i * N, N)));
      (i == k ? signal : interference) += p;
    }
    se += std::log2(1.0 + signal / (interference + sigma2[static_cast<std::size_t>(k)] / P));
  }
  return se;
}

double sum_se_approx(const CVector& f, const OperatorSet& ops) { return log_gamma(f, ops) / std::log(2.0); }

}  // namespace fdd::precoding
