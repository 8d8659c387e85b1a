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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Reference values come from tests/oracles.hpp or are recomputed inline.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fdd/channel.hpp"
#include "fdd/estimation.hpp"
#include "fdd/harness.hpp"
#include "fdd/precoding.hpp"
#include "fdd/reconstruction.hpp"
#include "oracles.hpp"

using namespace fdd;
using channel::PhaseConvention;
using reconstruction::EstimatorKind;

namespace {

constexpr double kPi = std::numbers::pi;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Scenario geometry with the delays and reflection phases redrawn each trial.
channel::UserGeometry redraw_phases(channel::UserGeometry g, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t l = 0; l < g.theta.size(); ++l) {
        g.r[l] = 100.0 + 60.0 * u(gen);
        g.phi[l] = 2.0 * kPi * u(gen);
    }
    return g;
}

channel::UserGeometry scenario_geometry(Index L, std::uint64_t seed) {
    channel::ScenarioConfig s;
    s.L = L;
    return channel::sample_geometry(seed, s);
}

precoding::CsitBundle bundle_of(const harness::DropCsit& d, bool with_phi) {
    return {d.h_hat, with_phi ? d.phi : std::vector<CMatrix>{}, d.sigma2, d.P};
}

oracle::DenseOperators dense_of(const precoding::CsitBundle& b) {
    std::vector<CMatrix> M;
    std::vector<double> s;
    for (Index k = 0; k < b.K(); ++k) {
        CMatrix m = b.h_hat[k] * b.h_hat[k].adjoint();
        if (static_cast<Index>(b.phi.size()) > k && b.phi[k].size() > 0) m += b.phi[k];
        M.push_back(m);
        s.push_back(b.sigma2[k] / b.P);
    }
    return oracle::dense_operators(M, s);
}

// 1
Outcome eta_closed_form() {
    const auto t0 = Clock::now();
    const double err = std::abs(reconstruction::eta(1.2).value - oracle::eta_quadrature(1.2));
    const cplx e1 = reconstruction::eta(1.0).value;
    const double e2 = std::abs(reconstruction::eta(2.0).value);
    const double t = seconds_since(t0);
    return {err <= 1e-9 && e1 == cplx(1.0, 0.0) && e2 <= 1e-15 && t < 1.0,
            fmt("|eta(1.2) - quadrature| = %.2e, eta(1) = %g%+gj, |eta(2)| = %.1e, %.3f s", err, e1.real(), e1.imag(),
                e2, t)};
}

// 2
Outcome trace_identity() {
    double worst = 0.0;
    for (Index n : {8, 32, 128}) {
        const auto cfg = channel::ArrayConfig::from_carriers(n, 10e9, 12e9);
        const auto g = scenario_geometry(3, 1000 + static_cast<std::uint64_t>(n));
        const cplx e = oracle::eta_quadrature(1.2);
        const double tr = g.power();
        const double mmse = reconstruction::error_covariance(g, cfg, EstimatorKind::kMmse).trace() / (n * tr);
        const double lmmse = reconstruction::error_covariance(g, cfg, EstimatorKind::kLmmse).trace() / (n * tr);
        worst = std::max({worst, std::abs(mmse - (1.0 - std::norm(e))), std::abs(lmmse - (1.0 - e.real() * e.real()))});
    }
    return {worst <= 1e-10, fmt("max deviation %.2e over N in {8, 32, 128}", worst)};
}

// 3
Outcome monte_carlo_mse() {
    const auto t0 = Clock::now();
    const auto cfg = channel::ArrayConfig::from_carriers(32, 10e9, 12e9);
    const auto base = scenario_geometry(3, 3);
    std::mt19937_64 gen(3);
    double mmse = 0.0, lmmse = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        const auto g = redraw_phases(base, gen);
        const double norm = 32.0 * g.power();
        const auto pp = channel::synthesize_pair(g, cfg, PhaseConvention::kUplinkPrincipal);
        const auto pr = channel::synthesize_pair(g, cfg, PhaseConvention::kPropagationResidual);
        mmse += (pp.h_dl - reconstruction::reconstruct_mmse(pp.h_ul, g, cfg).h_hat).squaredNorm() / norm;
        lmmse += (pr.h_dl - reconstruction::reconstruct_lmmse(pr.h_ul, g, cfg).h_hat).squaredNorm() / norm;
    }
    mmse /= trials;
    lmmse /= trials;
    const double rm = std::abs(mmse / 0.12484 - 1.0);
    const double rl = std::abs(lmmse / 0.42722 - 1.0);
    const double t = seconds_since(t0);
    return {rm <= 0.015 && rl <= 0.015 && t < 30.0,
            fmt("MMSE %.5f (%.2f%%), L-MMSE %.5f (%.2f%%), %.1f s", mmse, 100 * rm, lmmse, 100 * rl, t)};
}

// 4
Outcome delta_identity() {
    double worst = 0.0;
    for (int i = 0; i < 1500; ++i) {
        const double k = 0.5 + 1.5 * i / 1499.0;
        const double s = std::sin(kPi * k);
        const double lhs = s * s * s * s / (kPi * kPi * (1.0 - k) * (1.0 - k));
        const double im = reconstruction::eta(k).value.imag();
        worst = std::max(worst, std::abs(lhs - im * im));
    }
    return {worst <= 1e-12, fmt("max |difference| %.2e on 1500 points", worst)};
}

// 5
Outcome unbiasedness() {
    const auto cfg = channel::ArrayConfig::from_carriers(16, 10e9, 12e9);
    const auto base = scenario_geometry(3, 5);
    std::mt19937_64 gen(5);
    CMatrix truth = CMatrix::Zero(16, 16), approx = CMatrix::Zero(16, 16);
    for (int t = 0; t < 10000; ++t) {
        const auto g = redraw_phases(base, gen);
        const auto p = channel::synthesize_pair(g, cfg);
        const auto res = reconstruction::reconstruct_lmmse(p.h_ul, g, cfg);
        truth += p.h_dl * p.h_dl.adjoint();
        approx += res.h_hat * res.h_hat.adjoint() + res.phi.dense();
    }
    const double rel = (truth - approx).norm() / truth.norm();
    return {rel <= 0.05, fmt("relative Frobenius gap %.4f at 1e4 trials", rel)};
}

// 6
Outcome delta_limits() {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto single = [&](Index n, double kappa) {
        const auto cfg = channel::ArrayConfig::from_carriers(n, 10e9, 10e9 * kappa);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            channel::UserGeometry g{{-1.2 + 2.4 * u(gen)}, {1.0}, {100.0 + 50.0 * u(gen)}, {2.0 * kPi * u(gen)}};
            const auto p = channel::synthesize_pair(g, cfg);
            const auto d = reconstruction::delta_error(p, reconstruction::reconstruct_lmmse(p.h_ul, g, cfg), g, cfg);
            worst = std::max(worst, d.empirical);
        }
        return worst;
    };
    const double at_tdd = single(64, 1.0);
    std::vector<double> l1;
    for (Index n : {32, 128, 512}) l1.push_back(single(n, 1.2));
    // Values at round-off cannot be ordered; below 1e-24 the limit is reached.
    bool shrinking = true;
    for (std::size_t i = 1; i < l1.size(); ++i)
        if (!(l1[i] < l1[i - 1] || l1[i] <= 1e-24)) shrinking = false;
    const bool l1_ok = at_tdd <= 1e-12 && shrinking && l1.back() <= 1e-12;

    const auto cfg = channel::ArrayConfig::from_carriers(256, 10e9, 12e9);
    double worst_rel = 0.0;
    for (int t = 0; t < 100; ++t) {
        const double a = -1.0 + 1.2 * u(gen);
        const double sep = (10.0 + 50.0 * u(gen)) * kPi / 180.0;
        channel::UserGeometry g{{a, a + sep}, {1.0, 1.0}, {0, 0}, {0, 0}};
        g = redraw_phases(g, gen);
        const auto p = channel::synthesize_pair(g, cfg);
        const auto d = reconstruction::delta_error(p, reconstruction::reconstruct_lmmse(p.h_ul, g, cfg), g, cfg);
        worst_rel = std::max(worst_rel, std::abs(d.empirical / d.theoretical - 1.0));
    }
    return {l1_ok && worst_rel <= 0.10,
            fmt("L=1: %.1e at kappa=1, %.1e / %.1e / %.1e at N=32/128/512; L=2 N=256: worst relative gap %.1e over 100 "
                "draws",
                at_tdd, l1[0], l1[1], l1[2], worst_rel)};
}

// 7
Outcome single_user() {
    std::mt19937_64 gen(7);
    double worst_align = 1.0, worst_gamma = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Index n = 16;
        const CVector h = oracle::random_vector(n, gen);
        const CMatrix phi = 0.2 * oracle::random_psd(n, 3, gen);
        const double sigma2 = 0.5, P = 2.0;
        const auto sol = precoding::gpip_solve({{h}, {phi}, {sigma2}, P});
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h * h.adjoint() + phi);
        const CVector top = es.eigenvectors().col(n - 1);
        const double expect = 1.0 + (P / sigma2) * es.eigenvalues()(n - 1);
        worst_align = std::min(worst_align, std::abs(top.dot(sol.f)));
        worst_gamma = std::max(worst_gamma, std::abs(sol.gamma - expect) / expect);
    }
    return {worst_align >= 1.0 - 1e-6 && worst_gamma <= 1e-6,
            fmt("min alignment 1 - %.1e, max relative gamma error %.1e over 20 draws", 1.0 - worst_align, worst_gamma)};
}

// 8
Outcome stationarity_certification() {
    harness::ExperimentConfig cfg;
    harness::DropSpec spec{16, 8, 3, 1.2, 20.0, false, false, true};
    int certified = 0, stationary = 0, dense_negative = 0, literal = 0, instances = 200;
    double worst_res = 0.0;
    for (Index t = 0; t < instances; ++t) {
        const auto d = harness::build_csit(cfg, spec, t);
        const auto b = bundle_of(d, true);
        precoding::GpipOptions o;
        o.seed = harness::stream_seed(cfg.seed, static_cast<std::uint64_t>(t), 99);
        const auto sol = precoding::gpip_solve(b, o);
        if (!sol.second_order_certified) continue;
        ++certified;
        worst_res = std::max(worst_res, sol.stationarity_residual);
        if (sol.stationarity_residual <= 1e-4) ++stationary;
        const auto dense = dense_of(b);
        const Eigen::VectorXd spec_h = oracle::restricted_hessian_spectrum(sol.f, dense, 16);
        if (spec_h(spec_h.size() - 1) < 0.0) ++dense_negative;
        // Literal eigenvalue inequality, dense.
        const Index n = sol.f.size();
        CMatrix sa = CMatrix::Zero(n, n), sb = CMatrix::Zero(n, n);
        for (std::size_t k = 0; k < dense.A.size(); ++k) {
            const CVector af = dense.A[k] * sol.f, bf = dense.B[k] * sol.f;
            const double a = sol.f.dot(af).real(), bq = sol.f.dot(bf).real();
            sa += af * af.adjoint() / (a * a);
            sb += bf * bf.adjoint() / (bq * bq);
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> ea(sa, Eigen::EigenvaluesOnly), eb(sb, Eigen::EigenvaluesOnly);
        if (ea.eigenvalues().minCoeff() > eb.eigenvalues().maxCoeff()) ++literal;
    }
    const bool ok = certified > 0 && stationary == certified && literal == certified;
    return {ok, fmt("%d/%d certified; of those %d with residual <= 1e-4 (worst %.1e), %d with a negative definite dense "
                    "restricted Hessian, %d satisfying the literal rho_min(S_A) > rho_max(S_B)",
                    certified, instances, stationary, worst_res, dense_negative, literal)};
}

struct Paired {
    harness::Accumulator a, b, c, ab, bc;
};

// 9
Outcome precoder_ordering() {
    const auto t0 = Clock::now();
    harness::ExperimentConfig cfg;
    harness::DropSpec spec{64, 16, 3, 1.2, cfg.fixed_snr_db, true, false, true};
    Paired p;
    for (Index t = 0; t < 200; ++t) {
        const auto r = harness::simulate_drop(cfg, spec, t);
        p.a.add(r.se_gpip_phi);
        p.b.add(r.se_recon_zf);
        p.c.add(r.se_ul_as_dl_zf);
        p.ab.add(r.se_gpip_phi - r.se_recon_zf);
        p.bc.add(r.se_recon_zf - r.se_ul_as_dl_zf);
    }
    const bool ok = p.ab.mean() > 2.0 * p.ab.stderr_() && p.bc.mean() > 2.0 * p.bc.stderr_();
    return {ok, fmt("GPIP(h_hat+Phi) %.2f >= ZF(h_hat) %.2f >= ZF(UL as DL) %.2f bit/s/Hz; gaps %.2f (se %.2f), %.2f "
                    "(se %.2f); %.0f s",
                    p.a.mean(), p.b.mean(), p.c.mean(), p.ab.mean(), p.ab.stderr_(), p.bc.mean(), p.bc.stderr_(),
                    seconds_since(t0))};
}

// 10
Outcome convergence_envelope() {
    const auto t0 = Clock::now();
    harness::ExperimentConfig cfg;
    std::string detail;
    bool ok = true;
    for (Index n : {16, 64}) {
        harness::DropSpec spec{n, 16, 3, 1.2, cfg.fixed_snr_db, false, false, true};
        std::vector<int> coarse, fine;
        for (Index t = 0; t < 100; ++t) {
            const auto d = harness::build_csit(cfg, spec, t);
            const auto b = bundle_of(d, true);
            for (double eps : {0.1, 0.01}) {
                precoding::GpipOptions o;
                o.epsilon = eps;
                o.max_restarts = 0;
                o.max_polish = 0;
                o.certify = false;
                (eps == 0.1 ? coarse : fine).push_back(precoding::gpip_solve(b, o).iterations);
            }
        }
        std::sort(coarse.begin(), coarse.end());
        const double median = 0.5 * (coarse[49] + coarse[50]);
        const int worst = *std::max_element(fine.begin(), fine.end());
        ok = ok && median <= 8.0 && worst <= 30;
        detail += fmt("N=%lld: median(eps=0.1) %.1f, max(eps=0.01) %d; ", static_cast<long long>(n), median, worst);
    }
    const double t = seconds_since(t0);
    return {ok && t < 300.0, detail + fmt("%.0f s", t)};
}

// 11
Outcome structure_and_scaling() {
    std::mt19937_64 gen(11);
    auto random_bundle = [&](Index n, Index k) {
        precoding::CsitBundle b;
        for (Index i = 0; i < k; ++i) {
            b.h_hat.push_back(oracle::random_vector(n, gen));
            b.phi.push_back(0.1 * oracle::random_psd(n, 3, gen));
            b.sigma2.push_back(0.1);
        }
        return b;
    };
    const auto b = random_bundle(4, 3);
    const auto ops = precoding::build_operators(b);
    const auto dense = dense_of(b);
    CVector f = oracle::random_vector(12, gen);
    f /= f.norm();
    double worst = 0.0;
    for (int s = 0; s < 30; ++s) {
        const CVector next = precoding::gpip_step(f, ops).f;
        const CVector ref = oracle::dense_gpip_step(f, dense);
        const cplx phase = ref.dot(next);
        worst = std::max(worst, (next - ref * (phase / std::abs(phase))).norm());
        f = next;
    }

    auto per_step = [&](Index n, Index k) {
        const auto bb = random_bundle(n, k);
        const auto o = precoding::build_operators(bb);
        CVector x = oracle::random_vector(n * k, gen);
        x /= x.norm();
        double best = 1e300;
        for (int rep = 0; rep < 5; ++rep) {
            const auto t0 = Clock::now();
            CVector y = x;
            for (int s = 0; s < 10; ++s) y = precoding::gpip_step(y, o).f;
            best = std::min(best, seconds_since(t0) / 10.0);
        }
        return best;
    };
    const double small = per_step(32, 8), large = per_step(64, 16);
    const double exponent = std::log(large / small) / std::log(4.0);
    return {worst <= 1e-8 && exponent < 2.5,
            fmt("block vs dense step max gap %.1e over 30 steps; %.2f ms -> %.2f ms per step, exponent %.2f on KN",
                worst, 1e3 * small, 1e3 * large, exponent)};
}

// 12
Outcome estimation_pipeline() {
    const auto t0 = Clock::now();
    harness::ExperimentConfig cfg;
    double worst = 0.0;
    const auto arr = cfg.array(64, 1.2);
    channel::ScenarioConfig sc;
    sc.L = 3;
    sc.lambda_ref = arr.lambda_ul;
    for (std::uint64_t u = 0; u < 50; ++u) {
        const auto geo = channel::sample_geometry(harness::stream_seed(12, 0, u), sc);
        const auto pair = channel::synthesize_pair(geo, arr);
        const auto obs = estimation::observe_pilot(pair.h_ul, estimation::kNoiseless, 0);
        const auto est = estimation::estimate_geometry(obs, 3, arr);
        const CVector ref = reconstruction::reconstruct_lmmse(pair.h_ul, geo, arr).h_hat;
        const CVector got = reconstruction::reconstruct_lmmse(pair.h_ul, est, arr).h_hat;
        worst = std::max(worst, (got - ref).norm() / ref.norm());
    }

    harness::DropSpec spec{64, 16, 3, 1.2, cfg.fixed_snr_db, false, false, true};
    harness::ExperimentConfig noisy = cfg;
    noisy.parameter_mode = harness::ParameterMode::kEstimated;
    noisy.pilot_snr_db = 20.0;
    harness::Accumulator perfect, estimated;
    for (Index t = 0; t < 50; ++t) {
        perfect.add(harness::simulate_drop(cfg, spec, t).se_gpip_phi);
        estimated.add(harness::simulate_drop(noisy, spec, t).se_gpip_phi);
    }
    const double loss = 1.0 - estimated.mean() / perfect.mean();
    return {worst <= 1e-6 && loss < 0.15,
            fmt("noiseless: max relative gap %.1e over 50 users; 20 dB pilots: GPIP SE %.2f vs %.2f (%.1f%% loss), "
                "N=64 K=16 L=3, 50 drops; %.0f s",
                worst, estimated.mean(), perfect.mean(), 100.0 * loss, seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"eta closed form", eta_closed_form},
        {"finite-N trace identity", trace_identity},
        {"Monte Carlo MSE", monte_carlo_mse},
        {"delta MSE identity", delta_identity},
        {"outer-product unbiasedness", unbiasedness},
        {"approximation error limits", delta_limits},
        {"single-user GPIP", single_user},
        {"GPIP stationarity and certification", stationarity_certification},
        {"precoder ordering", precoder_ordering},
        {"convergence envelope", convergence_envelope},
        {"block structure and scaling", structure_and_scaling},
        {"estimation pipeline", estimation_pipeline},
    };
    // Optional argument: comma-free list of criterion numbers to run, e.g. "1 2 7".
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
