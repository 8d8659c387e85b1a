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

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fdd/channel.hpp"
#include "fdd/reconstruction.hpp"

namespace fdd::harness {

inline constexpr int kConfigSchemaVersion = 1;

enum class ParameterMode { kPerfect, kEstimated };

/// Resolved experiment configuration. Defaults follow the single-cell system
/// parameters (ISD 500 m, 10/12 GHz, K = 16, -113 dB noise, 32 m / 1.5 m heights).
struct ExperimentConfig {
  channel::ScenarioConfig scenario;
  double f_ul_hz = 10e9;
  double f_dl_hz = 12e9;
  Index N = 64;
  Index K = 16;
  Index L = 3;
  std::vector<double> kappas{1.0, 1.05, 1.1, 1.15, 1.2, 1.25, 1.3, 1.35, 1.4, 1.45, 1.5};
  std::vector<Index> antennas{16, 32, 64, 128, 256};
  std::vector<Index> paths{2, 4, 8, 16};
  std::vector<Index> delta_paths{1, 2, 4, 8, 16};
  std::vector<Index> convergence_antennas{16, 64, 256};
  std::vector<double> epsilons{0.1, 0.01};
  std::vector<double> snr_db{0.0, 10.0, 20.0};  // cell-edge SNR sweep
  double fixed_snr_db = 20.0;  // paths-sweep and convergence
  double pilot_snr_db = 20.0;
  double noise_power_db = -113.0;
  Index trials = 100;
  std::uint64_t seed = 1;
  reconstruction::EstimatorKind estimator = reconstruction::EstimatorKind::kLmmse;
  ParameterMode parameter_mode = ParameterMode::kPerfect;
  channel::PhaseConvention phase = channel::PhaseConvention::kPropagationResidual;
  double epsilon = 0.01;
  int max_iter = 100;
  int max_restarts = 5;
  unsigned threads = 1;  // execution only, not part of the hash

  void validate() const;
  nlohmann::json to_json() const;
  /// Keys absent from `j` keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// First 16 hex digits of the SHA-256 of the canonical JSON (threads excluded).
  std::string hash() const;

  double noise_power() const { return std::pow(10.0, noise_power_db / 10.0); }
  /// Transmit power giving `snr_db` per antenna at the cell edge.
  double transmit_power(double snr_db) const;
  channel::ArrayConfig array(Index n) const;
  channel::ArrayConfig array(Index n, double kappa) const;
};

const char* to_string(ParameterMode m);
const char* to_string(channel::PhaseConvention c);

/// Stream seed for (master, trial, user): splitmix64 applied along the tuple.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t user);

struct ResultRecord {
  std::string experiment;
  std::string sweep_variable;
  double sweep_value = 0.0;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  Index trials = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Sample mean and standard error (sample std / sqrt(n)) by Welford's update.
class Accumulator {
 public:
  void add(double x);
  Index count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double stddev() const;
  double stderr_() const;

 private:
  Index n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Append-only record collection bound to one configuration hash.
class RecordSink {
 public:
  explicit RecordSink(std::string config_hash) : hash_(std::move(config_hash)) {}
  void append(const ResultRecord& r);  // throws on a foreign hash
  const std::vector<ResultRecord>& records() const noexcept { return records_; }
  const std::string& hash() const noexcept { return hash_; }

 private:
  std::string hash_;
  std::vector<ResultRecord> records_;
};

std::string csv_header();
std::string to_csv(const std::vector<ResultRecord>& records);
std::vector<ResultRecord> parse_csv(const std::string& text);

/// Writes <dir>/<name>.csv and <dir>/<name>.json. With `append`, an existing CSV
/// is extended only when every record in it carries the same config hash.
void write_outputs(const std::string& dir, const std::string& name, const std::vector<ResultRecord>& records,
                   const ExperimentConfig& cfg, bool append = false);

/// Runs fn(trial) for trial in [0, n) on a bounded pool; results come back in trial order.
/// The first exception thrown by fn is rethrown after the pool drains.
template <class T>
std::vector<T> run_trials(Index n, unsigned threads, const std::function<T(Index)>& fn) {
  std::vector<T> out(static_cast<std::size_t>(n));
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (Index t = next++; t < n; t = next++) {
      try {
        out[static_cast<std::size_t>(t)] = fn(t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;  // drain the queue
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<Index>(n, 1))));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<ResultRecord> run_mse_sweep(const ExperimentConfig& cfg);
std::vector<ResultRecord> run_delta_sweep(const ExperimentConfig& cfg);
std::vector<ResultRecord> run_se_vs_antennas(const ExperimentConfig& cfg);
std::vector<ResultRecord> run_paths_sweep(const ExperimentConfig& cfg);
std::vector<ResultRecord> run_convergence(const ExperimentConfig& cfg);

/// One multi-user drop, shared by the SE experiments.
struct DropResult {
  double se_perfect_zf = NAN;
  double se_recon_zf = NAN;
  double se_gpip_hhat = NAN;
  double se_gpip_phi = NAN;
  double se_ul_as_dl_zf = NAN;
  int gpip_iterations = 0;
  bool gpip_certified = false;
};

struct DropSpec {
  Index N = 64;
  Index K = 16;
  Index L = 3;
  double kappa = 1.2;
  double snr_db = 20.0;
  bool run_zf = true;
  bool run_gpip_hhat = true;
  bool run_gpip_phi = true;
};

/// Channels and transmitter knowledge for one multi-user drop.
struct DropCsit {
  std::vector<CVector> h_dl;    // true downlink
  std::vector<CVector> h_ul;    // uplink as seen by the BS (noisy in estimated mode)
  std::vector<CVector> h_hat;   // reconstructed downlink
  std::vector<CMatrix> phi;     // reconstruction error covariances
  std::vector<double> sigma2;
  double P = 1.0;
  Index unresolved_paths = 0;
};

DropCsit build_csit(const ExperimentConfig& cfg, const DropSpec& spec, Index trial);

DropResult simulate_drop(const ExperimentConfig& cfg, const DropSpec& spec, Index trial);

}  // namespace fdd::harness
