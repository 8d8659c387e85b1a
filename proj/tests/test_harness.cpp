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

#include "catch_amalgamated.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "fdd/harness.hpp"
#include "fdd/reconstruction.hpp"
#include "oracles.hpp"

using namespace fdd;
using namespace fdd::harness;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.N = 16;
    c.K = 4;
    c.L = 2;
    c.trials = 40;
    c.kappas = {1.0, 1.2};
    c.delta_paths = {1, 2};
    c.antennas = {8, 16};
    c.paths = {2, 4};
    c.convergence_antennas = {8};
    c.snr_db = {10.0};
    return c;
}

const ResultRecord& find(const std::vector<ResultRecord>& rs, double value, const std::string& metric) {
    for (const auto& r : rs)
        if (r.sweep_value == value && r.metric == metric) return r;
    FAIL("no record " << metric << " at " << value);
    throw std::logic_error("unreachable");
}

bool same(const std::vector<ResultRecord>& a, const std::vector<ResultRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i];
        const auto& y = b[i];
        if (x.experiment != y.experiment || x.metric != y.metric || x.sweep_value != y.sweep_value ||
            x.mean != y.mean || x.stderr_ != y.stderr_ || x.trials != y.trials || x.seed != y.seed ||
            x.config_hash != y.config_hash)
            return false;
    }
    return true;
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("fdd_harness_" + name);
    std::filesystem::remove_all(p);
    return p;
}

struct Shell {
    int code;
    std::string out;
};

Shell run(const std::string& args) {
    const std::string cmd = std::string(FDDSIM_PATH) + " " + args + " 2>&1";
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 512> buf{};
    while (fgets(buf.data(), static_cast<int>(buf.size()), p)) out += buf.data();
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

}  // namespace

TEST_CASE("ExperimentConfig - defaults")
{
    const ExperimentConfig c;
    CHECK(c.scenario.isd == 500.0);
    CHECK(c.f_ul_hz == 10e9);
    CHECK(c.f_dl_hz == 12e9);
    CHECK(c.K == 16);
    CHECK(c.noise_power_db == -113.0);
    CHECK(c.scenario.bs_height == 32.0);
    CHECK(c.scenario.ue_height == 1.5);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("ExperimentConfig - JSON round trip and hash")
{
    ExperimentConfig c = small_config();
    c.seed = 99;
    c.estimator = reconstruction::EstimatorKind::kMmse;
    c.parameter_mode = ParameterMode::kEstimated;
    c.scenario.path_loss.shadow_sigma = 3.0;
    const auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.hash() == c.hash());
    CHECK(c.hash().size() == 16);

    ExperimentConfig t = c;
    t.threads = 8;
    CHECK(t.hash() == c.hash());
    t.seed = 100;
    CHECK(t.hash() != c.hash());
}

TEST_CASE("ExperimentConfig - partial objects keep defaults")
{
    const auto c = ExperimentConfig::from_json(nlohmann::json{{"trials", 7}, {"scenario", {{"isd_m", 300.0}}}});
    CHECK(c.trials == 7);
    CHECK(c.scenario.isd == 300.0);
    CHECK(c.N == ExperimentConfig{}.N);
}

TEST_CASE("ExperimentConfig - rejects bad input")
{
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"trails", 5}}), numerics::InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"scenario", {{"isd", 5}}}}), numerics::InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"trials", 0}}), numerics::InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"trials", "many"}}), numerics::InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"estimator", "zf"}}), numerics::InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"schema_version", 2}}), numerics::InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::array()), numerics::InvalidInput);
}

TEST_CASE("ExperimentConfig - transmit power sets the cell-edge SNR")
{
    ExperimentConfig c;
    const double p0 = c.transmit_power(0.0);
    CHECK(c.transmit_power(20.0) / p0 == Catch::Approx(100.0).epsilon(1e-12));
    channel::ScenarioConfig s = c.scenario;
    s.lambda_ref = channel::kSpeedOfLight / c.f_ul_hz;
    CHECK(p0 * channel::cell_edge_power(s) / c.noise_power() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stream_seed - deterministic and distinct")
{
    CHECK(stream_seed(1, 2, 3) == stream_seed(1, 2, 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t m = 0; m < 4; ++m)
        for (std::uint64_t t = 0; t < 50; ++t)
            for (std::uint64_t u = 0; u < 20; ++u) seen.insert(stream_seed(m, t, u));
    CHECK(seen.size() == 4 * 50 * 20);
    CHECK(stream_seed(1, 2, 3) != stream_seed(1, 3, 2));
}

TEST_CASE("Accumulator - agrees with a two-pass computation")
{
    std::mt19937_64 gen(3);
    std::lognormal_distribution<double> d(2.0, 1.0);
    std::vector<double> xs;
    Accumulator acc;
    for (int i = 0; i < 5000; ++i) {
        xs.push_back(1e6 + d(gen));
        acc.add(xs.back());
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    CHECK(acc.count() == 5000);
    CHECK(acc.mean() == Catch::Approx(mean).epsilon(1e-14));
    CHECK(acc.stddev() == Catch::Approx(sd).epsilon(1e-9));
    CHECK(acc.stderr_() == Catch::Approx(sd / std::sqrt(5000.0)).epsilon(1e-9));

    Accumulator one;
    one.add(4.0);
    CHECK(one.stderr_() == 0.0);
}

TEST_CASE("RecordSink - rejects foreign hashes")
{
    RecordSink sink("aaaa");
    sink.append({"x", "kappa", 1.0, "m", 0.0, 0.0, 1, 1, "aaaa"});
    CHECK_THROWS_AS(sink.append({"x", "kappa", 1.0, "m", 0.0, 0.0, 1, 1, "bbbb"}), numerics::InvalidInput);
    CHECK(sink.records().size() == 1);
}

TEST_CASE("CSV - round trip is exact")
{
    std::vector<ResultRecord> rs{{"mse-sweep", "kappa", 1.2, "mse_closed", 0.12485612345678901, 1e-17, 100, 7, "0123"},
                                 {"mse-sweep", "kappa", 1.05, "lmse[L=2]", -3.5e-300, 2.0 / 3.0, 1, 18446744073709551615ULL, "0123"}};
    const auto back = parse_csv(to_csv(rs));
    CHECK(same(back, rs));
    CHECK_THROWS_AS(parse_csv("wrong,header\n"), numerics::InvalidInput);
    CHECK_THROWS_AS(parse_csv(csv_header() + "\na,b,c\n"), numerics::InvalidInput);
    CHECK_THROWS_AS(parse_csv(csv_header() + "\na,b,x,m,1,1,1,1,h\n"), numerics::InvalidInput);
}

TEST_CASE("write_outputs - sidecar, append and hash mixing")
{
    const auto dir = scratch("out");
    ExperimentConfig c = small_config();
    const std::string h = c.hash();
    std::vector<ResultRecord> rs{{"mse-sweep", "kappa", 1.0, "m", 0.5, 0.1, 40, c.seed, h}};
    write_outputs(dir.string(), "mse-sweep", rs, c);
    std::ifstream side(dir / "mse-sweep.json");
    const auto j = nlohmann::json::parse(side);
    CHECK(j.at("config_hash") == h);
    CHECK(ExperimentConfig::from_json(j.at("config")).hash() == h);

    write_outputs(dir.string(), "mse-sweep", rs, c, true);
    std::ifstream in(dir / "mse-sweep.csv");
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(parse_csv(buf.str()).size() == 2);

    ExperimentConfig other = c;
    other.seed = c.seed + 1;
    std::vector<ResultRecord> foreign{{"mse-sweep", "kappa", 1.0, "m", 0.5, 0.1, 40, other.seed, other.hash()}};
    CHECK_THROWS_AS(write_outputs(dir.string(), "mse-sweep", foreign, other, true), numerics::InvalidInput);
    // A record that does not carry the config's own hash is rejected too.
    CHECK_THROWS_AS(write_outputs(dir.string(), "fresh", foreign, c), numerics::InvalidInput);
    std::filesystem::remove_all(dir);
}

TEST_CASE("run_trials - ordered results and error propagation")
{
    for (unsigned threads : {1u, 3u}) {
        const auto v = run_trials<Index>(100, threads, [](Index t) { return t * t; });
        for (Index t = 0; t < 100; ++t) CHECK(v[static_cast<std::size_t>(t)] == t * t);
        CHECK_THROWS_AS(run_trials<int>(50, threads,
                                        [](Index t) -> int {
                                            if (t == 17) throw std::runtime_error("boom");
                                            return 0;
                                        }),
                        std::runtime_error);
    }
    CHECK(run_trials<int>(0, 2, [](Index) { return 1; }).empty());
}

TEST_CASE("run_mse_sweep - closed forms, kappa = 1 and reproducibility")
{
    ExperimentConfig c = small_config();
    const auto rs = run_mse_sweep(c);
    for (const char* m : {"mse_closed", "lmse_closed", "delta_mse_closed", "mse_empirical", "lmse_empirical"})
        CHECK(std::abs(find(rs, 1.0, m).mean) < 1e-20);
    const auto eta = oracle::eta_quadrature(1.2);
    CHECK(find(rs, 1.2, "mse_closed").mean == Catch::Approx(1.0 - std::norm(eta)).epsilon(1e-9));
    CHECK(find(rs, 1.2, "lmse_closed").mean == Catch::Approx(1.0 - eta.real() * eta.real()).epsilon(1e-9));
    CHECK(find(rs, 1.2, "delta_mse_closed").mean == Catch::Approx(eta.imag() * eta.imag()).epsilon(1e-9));
    CHECK(find(rs, 1.2, "lmse_empirical").trials == c.trials);
    for (const auto& r : rs) {
        CHECK(r.config_hash == c.hash());
        CHECK(r.seed == c.seed);
    }

    c.threads = 2;
    CHECK(same(run_mse_sweep(c), rs));
    c.seed = 2;
    CHECK_FALSE(same(run_mse_sweep(c), rs));
}

TEST_CASE("run_mse_sweep - MMSE column grows with |kappa - 1|")
{
    ExperimentConfig c = small_config();
    c.trials = 1;
    c.kappas = {1.0, 1.1, 1.2, 1.3, 1.4, 1.5};
    const auto rs = run_mse_sweep(c);
    double prev = -1.0;
    for (double k : c.kappas) {
        const double v = find(rs, k, "mse_closed").mean;
        const double eta = std::abs(oracle::eta_quadrature(k));
        CHECK(v == Catch::Approx(1.0 - eta * eta).margin(1e-9));
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("run_mse_sweep - standard error shrinks as 1/sqrt(trials)")
{
    ExperimentConfig c = small_config();
    c.kappas = {1.2};
    c.trials = 100;
    const double s100 = find(run_mse_sweep(c), 1.2, "lmse_empirical").stderr_;
    c.trials = 400;
    const double s400 = find(run_mse_sweep(c), 1.2, "lmse_empirical").stderr_;
    const double ratio = s400 / s100;
    CHECK(ratio >= 0.4);
    CHECK(ratio <= 0.6);
}

TEST_CASE("run_delta_sweep - single path and kappa = 1")
{
    ExperimentConfig c = small_config();
    c.trials = 20;
    const auto rs = run_delta_sweep(c);
    CHECK(find(rs, 1.2, "delta_theory[L=1]").mean == 0.0);
    CHECK(find(rs, 1.0, "delta_theory[L=2]").mean == Catch::Approx(0.0).margin(1e-14));
    CHECK(find(rs, 1.0, "delta_empirical[L=2]").mean < 1e-20);
    CHECK(find(rs, 1.2, "delta_empirical[L=1]").mean < 1e-20);
    CHECK(find(rs, 1.2, "delta_theory[L=2]").mean > 0.0);
}

TEST_CASE("simulate_drop - kappa = 1 reconstruction is exact")
{
    ExperimentConfig c = small_config();
    DropSpec spec{16, 4, 2, 1.0, 10.0, true, false, false};
    for (Index t = 0; t < 5; ++t) {
        const auto r = simulate_drop(c, spec, t);
        CHECK(r.se_recon_zf == Catch::Approx(r.se_perfect_zf).epsilon(1e-9));
        CHECK(r.se_perfect_zf > 0.0);
    }
}

TEST_CASE("run_se_vs_antennas - records, skips and nonnegativity")
{
    ExperimentConfig c = small_config();
    c.trials = 3;
    c.K = 10;
    c.antennas = {8, 16};
    const auto rs = run_se_vs_antennas(c);
    bool zf_at_8 = false, gpip_at_8 = false;
    for (const auto& r : rs) {
        CHECK(r.mean >= 0.0);
        if (r.sweep_value == 8.0 && r.metric.rfind("se_zf", 0) == 0) zf_at_8 = true;
        if (r.sweep_value == 8.0 && r.metric.rfind("se_gpip_hhat_phi", 0) == 0) gpip_at_8 = true;
    }
    CHECK_FALSE(zf_at_8);
    CHECK(gpip_at_8);
    CHECK(find(rs, 16.0, "se_zf_perfect@snr=10dB").trials == 3);
}

TEST_CASE("run_paths_sweep - one row per (L, N)")
{
    ExperimentConfig c = small_config();
    c.trials = 2;
    const auto rs = run_paths_sweep(c);
    CHECK(rs.size() == c.paths.size() * c.antennas.size());
    for (const auto& r : rs) CHECK(r.mean >= 0.0);
}

TEST_CASE("run_convergence - nested stopping rule")
{
    ExperimentConfig c = small_config();
    c.trials = 10;
    c.K = 4;
    c.L = 2;
    const auto rs = run_convergence(c);
    const double coarse = find(rs, 8.0, "iterations_max[eps=0.1]").mean;
    const double fine = find(rs, 8.0, "iterations_max[eps=0.01]").mean;
    CHECK(fine >= coarse);
    CHECK(find(rs, 8.0, "iterations_median[eps=0.01]").mean >= find(rs, 8.0, "iterations_median[eps=0.1]").mean);
    double mass = 0.0;
    for (const auto& r : rs)
        if (r.metric.rfind("iterations_hist[eps=0.1]", 0) == 0) mass += r.mean;
    CHECK(mass == Catch::Approx(1.0));
}

TEST_CASE("fddsim - version, run and errors")
{
    auto v = run("--version");
    CHECK(v.code == 0);
    CHECK(v.out.find("config schema 1") != std::string::npos);

    const auto dir = scratch("cli");
    const auto cfg = dir.string() + ".json";
    {
        std::ofstream out(cfg);
        out << R"({"kappas": [1.0, 1.2], "N": 8, "L": 2})";
    }
    auto ok = run("mse-sweep --config " + cfg + " --trials 5 --seed 3 --out " + dir.string());
    CHECK(ok.code == 0);
    REQUIRE(std::filesystem::exists(dir / "mse-sweep.csv"));
    REQUIRE(std::filesystem::exists(dir / "mse-sweep.json"));
    std::ifstream in(dir / "mse-sweep.csv");
    std::stringstream buf;
    buf << in.rdbuf();
    const auto recs = parse_csv(buf.str());
    CHECK_FALSE(recs.empty());
    CHECK(recs.front().seed == 3);

    // Same hash appends; another seed may not mix into the file.
    CHECK(run("mse-sweep --config " + cfg + " --trials 5 --seed 3 --append --out " + dir.string()).code == 0);
    auto mixed = run("mse-sweep --config " + cfg + " --trials 5 --seed 4 --append --out " + dir.string());
    CHECK(mixed.code != 0);
    CHECK(mixed.out.find("\"error\"") != std::string::npos);

    {
        std::ofstream out(cfg);
        out << R"({"antennas_typo": 3})";
    }
    auto bad = run("mse-sweep --config " + cfg);
    CHECK(bad.code != 0);
    const auto line = bad.out.substr(0, bad.out.find('\n'));
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("error"));
    CHECK(j.at("message").get<std::string>().find("antennas_typo") != std::string::npos);

    CHECK(run("mse-sweep --trials 0").code != 0);
    std::filesystem::remove_all(dir);
    std::filesystem::remove(cfg);
}
