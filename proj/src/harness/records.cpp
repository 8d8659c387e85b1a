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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fdd/harness.hpp"

namespace fdd::harness {

using numerics::InvalidInput;

void Accumulator::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

double Accumulator::stddev() const { return n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0; }

double Accumulator::stderr_() const { return n_ > 0 ? stddev() / std::sqrt(static_cast<double>(n_)) : 0.0; }

void RecordSink::append(const ResultRecord& r) {
  if (r.config_hash != hash_)
    throw InvalidInput("record hash " + r.config_hash + " does not match sink hash " + hash_);
  records_.push_back(r);
}

std::string csv_header() { return "experiment,sweep_variable,sweep_value,metric,mean,stderr,trials,seed,config_hash"; }

std::string to_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  os << csv_header() << '\n';
  os << std::setprecision(17);
  for (const auto& r : records) {
    os << r.experiment << ',' << r.sweep_variable << ',' << r.sweep_value << ',' << r.metric << ',' << r.mean
       << ',' << r.stderr_ << ',' << r.trials << ',' << r.seed << ',' << r.config_hash << '\n';
  }
  return os.str();
}

std::vector<ResultRecord> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != csv_header()) throw InvalidInput("csv: missing or unexpected header");
  std::vector<ResultRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw InvalidInput("csv: expected 9 fields in '" + line + "'");
    ResultRecord r;
    try {
      r.experiment = f[0];
      r.sweep_variable = f[1];
      r.sweep_value = std::stod(f[2]);
      r.metric = f[3];
      r.mean = std::stod(f[4]);
      r.stderr_ = std::stod(f[5]);
      r.trials = std::stoll(f[6]);
      r.seed = std::stoull(f[7]);
      r.config_hash = f[8];
    } catch (const std::exception&) {
      throw InvalidInput("csv: malformed number in '" + line + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_outputs(const std::string& dir, const std::string& name, const std::vector<ResultRecord>& records,
                   const ExperimentConfig& cfg, bool append) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path csv = fs::path(dir) / (name + ".csv");
  const fs::path side = fs::path(dir) / (name + ".json");
  const std::string hash = cfg.hash();

  RecordSink sink(hash);
  if (append && fs::exists(csv)) {
    std::ifstream in(csv);
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& r : parse_csv(buf.str())) sink.append(r);  // rejects a foreign hash
  }
  for (const auto& r : records) sink.append(r);

  const fs::path tmp = csv.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << to_csv(sink.records());
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, csv);

  nlohmann::json j{{"experiment", name},
                   {"config_hash", hash},
                   {"config", cfg.to_json()},
                   {"records", sink.records().size()},
                   {"version", FDD_VERSION}};
  std::ofstream out(side, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + side.string());
}

}  // namespace fdd::harness
