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

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

#include "fdd/estimation.hpp"
#include "fdd/harness.hpp"
#include "fdd/precoding.hpp"

namespace fdd::harness {

namespace {

using reconstruction::EstimatorKind;

constexpr std::uint64_t kPilotStream = 0x70696c6f74ULL;
constexpr std::uint64_t kGpipStream = 0x67706970ULL;

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

channel::ScenarioConfig scenario_for(const ExperimentConfig& cfg, Index L, const channel::ArrayConfig& arr) {
  channel::ScenarioConfig s = cfg.scenario;
  s.L = L;
  s.lambda_ref = arr.lambda_ul;
  return s;
}

struct Emitter {
  const ExperimentConfig& cfg;
  std::string experiment;
  std::string variable;
  std::string hash;
  std::vector<ResultRecord> out;

  void add(double value, const std::string& metric, double mean, double se, Index trials) {
    out.push_back({experiment, variable, value, metric, mean, se, trials, cfg.seed, hash});
  }
  void add(double value, const std::string& metric, const Accumulator& acc) {
    add(value, metric, acc.mean(), acc.stderr_(), acc.count());
  }
};

double normalized_error(const CVector& h, const CVector& est, const channel::UserGeometry& geo) {
  return (h - est).squaredNorm() / (static_cast<double>(h.size()) * geo.power());
}

}  // namespace

DropCsit build_csit(const ExperimentConfig& cfg, const DropSpec& spec, Index trial) {
  const channel::ArrayConfig arr = cfg.array(spec.N, spec.kappa);
  const channel::ScenarioConfig sc = scenario_for(cfg, spec.L, arr);
  DropCsit d;
  d.P = cfg.transmit_power(spec.snr_db);
  for (Index k = 0; k < spec.K; ++k) {
    const auto t = static_cast<std::uint64_t>(trial);
    const auto u = static_cast<std::uint64_t>(k);
    const channel::UserGeometry geo = channel::sample_geometry(stream_seed(cfg.seed, t, u), sc);
    const channel::ChannelPair pair = channel::synthesize_pair(geo, arr, cfg.phase);
    reconstruction::ReconstructOptions ro;
    ro.require_full_rank = false;
    channel::UserGeometry known = geo;
    CVector h_ul = pair.h_ul;
    if (cfg.parameter_mode == ParameterMode::kEstimated) {
      const auto obs = estimation::observe_pilot(pair.h_ul, cfg.pilot_snr_db, stream_seed(cfg.seed ^ kPilotStream, t, u));
      Index unresolved = 0;
      known = estimation::estimate_geometry(obs, spec.L, arr, {}, &unresolved);
      d.unresolved_paths += unresolved;
      h_ul = obs.y;
      ro.unit_modulus = true;
    }
    const auto res = reconstruction::reconstruct(cfg.estimator, h_ul, known, arr, ro);
    d.h_dl.push_back(pair.h_dl);
    d.h_ul.push_back(h_ul);
    d.h_hat.push_back(res.h_hat);
    d.phi.push_back(res.phi.dense());
    d.sigma2.push_back(cfg.noise_power());
  }
  return d;
}

DropResult simulate_drop(const ExperimentConfig& cfg, const DropSpec& spec, Index trial) {
  const DropCsit d = build_csit(cfg, spec, trial);
  DropResult r;
  auto zf_se = [&](const std::vector<CVector>& known) {
    try {
      return precoding::sum_se_true(precoding::zf_precoder(known).f, d.h_dl, d.sigma2, d.P);
    } catch (const precoding::ZfInfeasible&) {
      return static_cast<double>(NAN);
    }
  };
  if (spec.run_zf && spec.K <= spec.N) {
    r.se_perfect_zf = zf_se(d.h_dl);
    r.se_recon_zf = zf_se(d.h_hat);
    r.se_ul_as_dl_zf = zf_se(d.h_ul);
  }
  precoding::GpipOptions go;
  go.epsilon = cfg.epsilon;
  go.max_iter = cfg.max_iter;
  go.max_restarts = cfg.max_restarts;
  go.seed = stream_seed(cfg.seed ^ kGpipStream, static_cast<std::uint64_t>(trial), 0);
  if (spec.run_gpip_hhat) {
    const precoding::CsitBundle b{d.h_hat, {}, d.sigma2, d.P};
    r.se_gpip_hhat = precoding::sum_se_true(precoding::gpip_solve(b, go).f, d.h_dl, d.sigma2, d.P);
  }
  if (spec.run_gpip_phi) {
    const precoding::CsitBundle b{d.h_hat, d.phi, d.sigma2, d.P};
    const auto sol = precoding::gpip_solve(b, go);
    r.se_gpip_phi = precoding::sum_se_true(sol.f, d.h_dl, d.sigma2, d.P);
    r.gpip_iterations = sol.iterations;
    r.gpip_certified = sol.second_order_certified;
  }
  return r;
}

std::vector<ResultRecord> run_mse_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  Emitter em{cfg, "mse-sweep", "kappa", cfg.hash(), {}};
  struct Trial {
    double mse, lmse, mse_cross, lmse_cross;
  };
  for (double kappa : cfg.kappas) {
    em.add(kappa, "mse_closed", reconstruction::asymptotic_mse(kappa, EstimatorKind::kMmse), 0.0, cfg.trials);
    em.add(kappa, "lmse_closed", reconstruction::asymptotic_mse(kappa, EstimatorKind::kLmmse), 0.0, cfg.trials);
    em.add(kappa, "delta_mse_closed", reconstruction::delta_mse(kappa), 0.0, cfg.trials);

    const channel::ArrayConfig arr = cfg.array(cfg.N, kappa);
    const channel::ScenarioConfig sc = scenario_for(cfg, cfg.L, arr);
    const auto trials = run_trials<Trial>(cfg.trials, cfg.threads, [&](Index t) {
      const auto geo = channel::sample_geometry(stream_seed(cfg.seed, static_cast<std::uint64_t>(t), 0), sc);
      reconstruction::ReconstructOptions ro;
      ro.require_full_rank = false;
      // Each estimator is scored under the phase model its derivation assumes,
      // and additionally under the other one.
      const auto principal = channel::synthesize_pair(geo, arr, channel::PhaseConvention::kUplinkPrincipal);
      const auto residual = channel::synthesize_pair(geo, arr, channel::PhaseConvention::kPropagationResidual);
      Trial r{};
      r.mse = normalized_error(principal.h_dl, reconstruction::reconstruct_mmse(principal.h_ul, geo, arr, ro).h_hat, geo);
      r.lmse = normalized_error(residual.h_dl, reconstruction::reconstruct_lmmse(residual.h_ul, geo, arr, ro).h_hat, geo);
      r.mse_cross = normalized_error(residual.h_dl, reconstruction::reconstruct_mmse(residual.h_ul, geo, arr, ro).h_hat, geo);
      r.lmse_cross = normalized_error(principal.h_dl, reconstruction::reconstruct_lmmse(principal.h_ul, geo, arr, ro).h_hat, geo);
      return r;
    });
    Accumulator mse, lmse, delta, mse_x, lmse_x;
    for (const auto& r : trials) {
      mse.add(r.mse);
      lmse.add(r.lmse);
      delta.add(r.lmse - r.mse);
      mse_x.add(r.mse_cross);
      lmse_x.add(r.lmse_cross);
    }
    em.add(kappa, "mse_empirical", mse);
    em.add(kappa, "lmse_empirical", lmse);
    em.add(kappa, "delta_mse_empirical", delta);
    em.add(kappa, "mse_empirical_residual_model", mse_x);
    em.add(kappa, "lmse_empirical_principal_model", lmse_x);
  }
  return em.out;
}

std::vector<ResultRecord> run_delta_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  Emitter em{cfg, "delta-sweep", "kappa", cfg.hash(), {}};
  struct Trial {
    double empirical, theory, uncorrected;
    bool ok;
  };
  for (double kappa : cfg.kappas) {
    const channel::ArrayConfig arr = cfg.array(cfg.N, kappa);
    for (Index L : cfg.delta_paths) {
      const channel::ScenarioConfig sc = scenario_for(cfg, L, arr);
      const auto trials = run_trials<Trial>(cfg.trials, cfg.threads, [&](Index t) {
        const auto geo = channel::sample_geometry(stream_seed(cfg.seed, static_cast<std::uint64_t>(t), 0), sc);
        const auto pair = channel::synthesize_pair(geo, arr, cfg.phase);
        reconstruction::ReconstructOptions ro;
        ro.require_full_rank = false;
        const auto res = reconstruction::reconstruct_lmmse(pair.h_ul, geo, arr, ro);
        const auto d = reconstruction::delta_error(pair, res, geo, arr, cfg.phase);
        // Reported relative to (sum b^2)^2 so that path loss drops out.
        const double norm = geo.power() * geo.power();
        return Trial{d.empirical / norm, d.theoretical / norm, d.theoretical_uncorrected / norm, true};
      });
      Accumulator emp, th, pub;
      for (const auto& r : trials) {
        emp.add(r.empirical);
        th.add(r.theory);
        pub.add(r.uncorrected);
      }
      const std::string tag = "[L=" + std::to_string(L) + "]";
      em.add(kappa, "delta_empirical" + tag, emp);
      em.add(kappa, "delta_theory" + tag, th);
      em.add(kappa, "delta_theory_uncorrected" + tag, pub);
    }
  }
  return em.out;
}

std::vector<ResultRecord> run_se_vs_antennas(const ExperimentConfig& cfg) {
  cfg.validate();
  Emitter em{cfg, "se-vs-n", "N", cfg.hash(), {}};
  const double kappa = cfg.f_dl_hz / cfg.f_ul_hz;
  for (double snr : cfg.snr_db) {
    const std::string tag = "@snr=" + fmt(snr) + "dB";
    for (Index n : cfg.antennas) {
      DropSpec spec{n, cfg.K, cfg.L, kappa, snr, true, true, true};
      if (cfg.K > n)
        std::cerr << "notice: K=" << cfg.K << " > N=" << n << ", zero-forcing rows skipped\n";
      const auto trials = run_trials<DropResult>(cfg.trials, cfg.threads, [&](Index t) { return simulate_drop(cfg, spec, t); });
      std::map<std::string, Accumulator> acc;
      for (const auto& r : trials) {
        auto put = [&](const char* name, double v) {
          if (!std::isnan(v)) acc[name].add(v);
        };
        put("se_zf_perfect", r.se_perfect_zf);
        put("se_zf_reconstructed", r.se_recon_zf);
        put("se_gpip_hhat", r.se_gpip_hhat);
        put("se_gpip_hhat_phi", r.se_gpip_phi);
        put("se_zf_ul_as_dl", r.se_ul_as_dl_zf);
        acc["gpip_certified_fraction"].add(r.gpip_certified ? 1.0 : 0.0);
      }
      for (const auto& [name, a] : acc) em.add(static_cast<double>(n), name + tag, a);
    }
  }
  return em.out;
}

std::vector<ResultRecord> run_paths_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  Emitter em{cfg, "paths-sweep", "N", cfg.hash(), {}};
  const double kappa = cfg.f_dl_hz / cfg.f_ul_hz;
  for (Index L : cfg.paths) {
    for (Index n : cfg.antennas) {
      DropSpec spec{n, cfg.K, L, kappa, cfg.fixed_snr_db, false, false, true};
      const auto trials = run_trials<DropResult>(cfg.trials, cfg.threads, [&](Index t) { return simulate_drop(cfg, spec, t); });
      Accumulator se;
      for (const auto& r : trials) se.add(r.se_gpip_phi);
      em.add(static_cast<double>(n), "se_gpip_hhat_phi[L=" + std::to_string(L) + "]", se);
    }
  }
  return em.out;
}

std::vector<ResultRecord> run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  Emitter em{cfg, "convergence", "N", cfg.hash(), {}};
  const double kappa = cfg.f_dl_hz / cfg.f_ul_hz;
  for (Index n : cfg.convergence_antennas) {
    DropSpec spec{n, cfg.K, cfg.L, kappa, cfg.fixed_snr_db, false, false, true};
    const auto counts = run_trials<std::vector<int>>(cfg.trials, cfg.threads, [&](Index t) {
      const DropCsit d = build_csit(cfg, spec, t);
      const precoding::CsitBundle b{d.h_hat, d.phi, d.sigma2, d.P};
      std::vector<int> it;
      for (double eps : cfg.epsilons) {
        precoding::GpipOptions go;
        go.epsilon = eps;
        go.max_iter = cfg.max_iter;
        go.max_restarts = 0;
        go.certify = false;
        go.max_polish = 0;
        it.push_back(precoding::gpip_solve(b, go).iterations);
      }
      return it;
    });
    for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
      const std::string tag = "[eps=" + fmt(cfg.epsilons[e]) + "]";
      std::vector<int> v;
      Accumulator mean;
      for (const auto& c : counts) {
        v.push_back(c[e]);
        mean.add(c[e]);
      }
      std::sort(v.begin(), v.end());
      const std::size_t m = v.size();
      const double median = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
      em.add(static_cast<double>(n), "iterations_mean" + tag, mean);
      em.add(static_cast<double>(n), "iterations_median" + tag, median, 0.0, static_cast<Index>(m));
      em.add(static_cast<double>(n), "iterations_max" + tag, v.back(), 0.0, static_cast<Index>(m));
      std::map<int, Index> hist;
      for (int x : v) ++hist[x];
      for (const auto& [iters, count] : hist)
        em.add(static_cast<double>(n), "iterations_hist" + tag + "[t=" + std::to_string(iters) + "]",
               static_cast<double>(count) / static_cast<double>(m), 0.0, static_cast<Index>(m));
    }
  }
  return em.out;
}

}  // namespace fdd::harness
