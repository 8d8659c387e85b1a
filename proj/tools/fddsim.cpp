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

// Command line driver for the Monte Carlo experiments.
//
//   fddsim mse-sweep --config cfg.json --out results --trials 10000
//   fddsim se-vs-n --seed 7 --threads 4
//
// Flags override keys of the JSON config file. Errors are reported on stderr
// as a one-line JSON object and the exit code is nonzero.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdd/harness.hpp"

namespace {

using fdd::harness::ExperimentConfig;
using fdd::harness::ResultRecord;

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FDD downlink reconstruction and robust precoding simulator"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string out_dir = "results";
  std::optional<std::uint64_t> seed;
  std::optional<long long> trials;
  std::optional<unsigned> threads;
  std::optional<long long> n_antennas;
  std::optional<long long> n_users;
  std::optional<long long> n_paths;
  std::optional<std::string> estimator;
  std::optional<std::string> mode;
  bool append = false;
  bool version = false;

  app.add_flag("--version", version, "Print build and config-schema versions");
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory for CSV and JSON sidecar");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--trials", trials, "Monte Carlo trials per sweep point");
  app.add_option("--threads", threads, "Worker threads");
  app.add_option("-N,--antennas", n_antennas, "Antenna count where a single N is used");
  app.add_option("-K,--users", n_users, "User count");
  app.add_option("-L,--paths", n_paths, "Path count");
  app.add_option("--estimator", estimator, "mmse or lmmse")->check(CLI::IsMember({"mmse", "lmmse"}));
  app.add_option("--parameters", mode, "perfect or estimated")->check(CLI::IsMember({"perfect", "estimated"}));
  app.add_flag("--append", append, "Append to an existing CSV of the same config");

  struct Experiment {
    const char* name;
    const char* help;
    std::vector<ResultRecord> (*run)(const ExperimentConfig&);
  };
  const std::vector<Experiment> experiments{
      {"mse-sweep", "Closed-form and Monte Carlo reconstruction MSE over kappa", fdd::harness::run_mse_sweep},
      {"delta-sweep", "Outer-product approximation error over kappa and L", fdd::harness::run_delta_sweep},
      {"se-vs-n", "Ergodic sum-SE versus N for each CSIT/precoder pair", fdd::harness::run_se_vs_antennas},
      {"paths-sweep", "GPIP sum-SE versus N for several path counts", fdd::harness::run_paths_sweep},
      {"convergence", "GPIP iteration counts per epsilon", fdd::harness::run_convergence},
  };
  for (const auto& e : experiments) app.add_subcommand(e.name, e.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (version) {
    std::cout << "fddsim " << FDD_VERSION << " (config schema " << fdd::harness::kConfigSchemaVersion << ")\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 2;
  }

  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      j = nlohmann::json::parse(in);
    }
    if (seed) j["seed"] = *seed;
    if (trials) j["trials"] = *trials;
    if (threads) j["threads"] = *threads;
    if (n_antennas) j["N"] = *n_antennas;
    if (n_users) j["K"] = *n_users;
    if (n_paths) j["L"] = *n_paths;
    if (estimator) j["estimator"] = *estimator;
    if (mode) j["parameter_mode"] = *mode;
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);

    const std::string name = app.get_subcommands().front()->get_name();
    for (const auto& e : experiments) {
      if (name != e.name) continue;
      const auto records = e.run(cfg);
      fdd::harness::write_outputs(out_dir, name, records, cfg, append);
      std::cout << name << ": " << records.size() << " records, config " << cfg.hash() << " -> " << out_dir
                << '\n';
    }
  } catch (const nlohmann::json::exception& e) {
    return fail("config", e.what(), 3);
  } catch (const std::invalid_argument& e) {
    return fail("invalid_input", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 4);
  }
  return 0;
}
