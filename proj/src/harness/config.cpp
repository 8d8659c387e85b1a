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

#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "fdd/harness.hpp"

namespace fdd::harness {

using nlohmann::json;
using numerics::InvalidInput;

const char* to_string(ParameterMode m) { return m == ParameterMode::kPerfect ? "perfect" : "estimated"; }

const char* to_string(channel::PhaseConvention c) {
  switch (c) {
    case channel::PhaseConvention::kPropagationResidual:
      return "propagation_residual";
    case channel::PhaseConvention::kUplinkPrincipal:
      return "uplink_principal";
    case channel::PhaseConvention::kAbsolute:
      return "absolute";
  }
  return "?";
}

namespace {

channel::PhaseConvention parse_phase(const std::string& s) {
  if (s == "propagation_residual") return channel::PhaseConvention::kPropagationResidual;
  if (s == "uplink_principal") return channel::PhaseConvention::kUplinkPrincipal;
  if (s == "absolute") return channel::PhaseConvention::kAbsolute;
  throw InvalidInput("config: unknown phase_convention '" + s + "'");
}

reconstruction::EstimatorKind parse_estimator(const std::string& s) {
  if (s == "mmse") return reconstruction::EstimatorKind::kMmse;
  if (s == "lmmse") return reconstruction::EstimatorKind::kLmmse;
  throw InvalidInput("config: unknown estimator '" + s + "'");
}

ParameterMode parse_mode(const std::string& s) {
  if (s == "perfect") return ParameterMode::kPerfect;
  if (s == "estimated") return ParameterMode::kEstimated;
  throw InvalidInput("config: unknown parameter_mode '" + s + "'");
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t user) {
  return splitmix(splitmix(splitmix(master) ^ trial) ^ (user * 0xd1b54a32d192ed03ULL));
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (!(f_ul_hz > 0.0) || !(f_dl_hz > 0.0)) throw InvalidInput("config: carriers must be positive");
  if (N < 1 || K < 1 || L < 1) throw InvalidInput("config: N, K, L must be >= 1");
  if (trials < 1) throw InvalidInput("config: trials must be >= 1");
  if (!(epsilon > 0.0) || max_iter < 1 || max_restarts < 0) throw InvalidInput("config: bad GPIP settings");
  for (double k : kappas)
    if (!(k > 0.0)) throw InvalidInput("config: kappa values must be positive");
  for (double e : epsilons)
    if (!(e > 0.0)) throw InvalidInput("config: epsilon values must be positive");
  for (auto v : {antennas, paths, delta_paths, convergence_antennas})
    for (Index x : v)
      if (x < 1) throw InvalidInput("config: sweep sizes must be >= 1");
}

json ExperimentConfig::to_json() const {
  json s = {{"isd_m", scenario.isd},
            {"bs_height_m", scenario.bs_height},
            {"ue_height_m", scenario.ue_height},
            {"min_distance_m", scenario.min_distance},
            {"angular_spread_deg", scenario.angular_spread_deg},
            {"max_excess_m", scenario.max_excess_m},
            {"path_loss_r0_m", scenario.path_loss.r0},
            {"path_loss_exponent", scenario.path_loss.m},
            {"shadow_sigma_db", scenario.path_loss.shadow_sigma},
            {"split_power_across_paths", scenario.split_power_across_paths}};
  return json{{"schema_version", kConfigSchemaVersion},
              {"scenario", s},
              {"f_ul_hz", f_ul_hz},
              {"f_dl_hz", f_dl_hz},
              {"N", N},
              {"K", K},
              {"L", L},
              {"kappas", kappas},
              {"antennas", antennas},
              {"paths", paths},
              {"delta_paths", delta_paths},
              {"convergence_antennas", convergence_antennas},
              {"epsilons", epsilons},
              {"snr_db", snr_db},
              {"fixed_snr_db", fixed_snr_db},
              {"pilot_snr_db", pilot_snr_db},
              {"noise_power_db", noise_power_db},
              {"trials", trials},
              {"seed", seed},
              {"estimator", reconstruction::to_string(estimator)},
              {"parameter_mode", to_string(parameter_mode)},
              {"phase_convention", to_string(phase)},
              {"epsilon", epsilon},
              {"max_iter", max_iter},
              {"max_restarts", max_restarts}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("config: top level must be an object");
  static const std::set<std::string> known{
      "schema_version", "scenario", "f_ul_hz", "f_dl_hz", "N", "K", "L", "kappas", "antennas", "paths",
      "delta_paths", "convergence_antennas", "epsilons", "snr_db", "fixed_snr_db", "pilot_snr_db",
      "noise_power_db", "trials", "seed", "estimator", "parameter_mode", "phase_convention", "epsilon",
      "max_iter", "max_restarts", "threads"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw InvalidInput("config: unknown key '" + key + "'");
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != kConfigSchemaVersion)
    throw InvalidInput("config: unsupported schema_version");

  ExperimentConfig c;
  try {
    if (j.contains("scenario")) {
      const json& s = j.at("scenario");
      static const std::set<std::string> skeys{"isd_m", "bs_height_m", "ue_height_m", "min_distance_m",
                                               "angular_spread_deg", "max_excess_m", "path_loss_r0_m",
                                               "path_loss_exponent", "shadow_sigma_db",
                                               "split_power_across_paths"};
      for (const auto& [key, _] : s.items())
        if (!skeys.count(key)) throw InvalidInput("config: unknown scenario key '" + key + "'");
      read(s, "isd_m", c.scenario.isd);
      read(s, "bs_height_m", c.scenario.bs_height);
      read(s, "ue_height_m", c.scenario.ue_height);
      read(s, "min_distance_m", c.scenario.min_distance);
      read(s, "angular_spread_deg", c.scenario.angular_spread_deg);
      read(s, "max_excess_m", c.scenario.max_excess_m);
      read(s, "path_loss_r0_m", c.scenario.path_loss.r0);
      read(s, "path_loss_exponent", c.scenario.path_loss.m);
      read(s, "shadow_sigma_db", c.scenario.path_loss.shadow_sigma);
      read(s, "split_power_across_paths", c.scenario.split_power_across_paths);
    }
    read(j, "f_ul_hz", c.f_ul_hz);
    read(j, "f_dl_hz", c.f_dl_hz);
    read(j, "N", c.N);
    read(j, "K", c.K);
    read(j, "L", c.L);
    read(j, "kappas", c.kappas);
    read(j, "antennas", c.antennas);
    read(j, "paths", c.paths);
    read(j, "delta_paths", c.delta_paths);
    read(j, "convergence_antennas", c.convergence_antennas);
    read(j, "epsilons", c.epsilons);
    read(j, "snr_db", c.snr_db);
    read(j, "fixed_snr_db", c.fixed_snr_db);
    read(j, "pilot_snr_db", c.pilot_snr_db);
    read(j, "noise_power_db", c.noise_power_db);
    read(j, "trials", c.trials);
    read(j, "seed", c.seed);
    read(j, "epsilon", c.epsilon);
    read(j, "max_iter", c.max_iter);
    read(j, "max_restarts", c.max_restarts);
    read(j, "threads", c.threads);
    if (j.contains("estimator")) c.estimator = parse_estimator(j.at("estimator").get<std::string>());
    if (j.contains("parameter_mode")) c.parameter_mode = parse_mode(j.at("parameter_mode").get<std::string>());
    if (j.contains("phase_convention")) c.phase = parse_phase(j.at("phase_convention").get<std::string>());
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  c.scenario.L = c.L;
  c.validate();
  return c;
}

std::string ExperimentConfig::hash() const {
  const std::string text = to_json().dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < 8 && i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

double ExperimentConfig::transmit_power(double snr) const {
  channel::ScenarioConfig s = scenario;
  s.lambda_ref = channel::kSpeedOfLight / f_ul_hz;
  return noise_power() * std::pow(10.0, snr / 10.0) / channel::cell_edge_power(s);
}

channel::ArrayConfig ExperimentConfig::array(Index n) const { return channel::ArrayConfig::from_carriers(n, f_ul_hz, f_dl_hz); }

channel::ArrayConfig ExperimentConfig::array(Index n, double kappa) const {
  return channel::ArrayConfig::from_carriers(n, f_ul_hz, f_ul_hz * kappa);
}

}  // namespace fdd::harness
