// Copyright 2026 The CAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <string>

#include "cad/harness.hpp"

namespace cad::harness {

namespace {

template <typename T>
std::optional<std::vector<T>> axis(const nlohmann::json& sweep, const char* key) {
  if (!sweep.contains(key)) {
    return std::nullopt;
  }
  return sweep.at(key).get<std::vector<T>>();
}

Workload workload_from_json(const nlohmann::json& j) {
  Workload w;
  const auto kind = j.value("kind", std::string("synthetic"));
  if (kind == "synthetic") {
    w.kind = WorkloadKind::kSynthetic;
  } else if (kind == "files") {
    w.kind = WorkloadKind::kFiles;
  } else if (kind == "instances") {
    w.kind = WorkloadKind::kInstances;
  } else {
    throw ConfigError("unknown workload kind: " + kind);
  }
  w.n = j.value("n", w.n);
  w.count = j.value("count", w.count);
  if (j.contains("clean_k") && !j["clean_k"].is_null()) {
    w.clean_k = j["clean_k"].get<std::size_t>();
  }
  if (j.contains("amplitude")) {
    const auto range = j["amplitude"].get<std::vector<double>>();
    if (range.size() != 2) {
      throw ConfigError("workload.amplitude must be [lo, hi]");
    }
    w.amplitude_lo = range[0];
    w.amplitude_hi = range[1];
  }
  w.tail_sigma = j.value("tail_sigma", w.tail_sigma);
  w.glob = j.value("glob", w.glob);
  w.dir = j.value("dir", w.dir);
  return w;
}

StatsSpec stats_from_json(const nlohmann::json& j) {
  StatsSpec s;
  s.enabled = j.value("enabled", s.enabled);
  s.count = j.value("count", s.count);
  s.n_cosamp = j.value("n_cosamp", s.n_cosamp);
  if (j.contains("ridge") && !j["ridge"].is_null()) {
    s.ridge = j["ridge"].get<double>();
  }
  if (j.contains("path") && !j["path"].is_null()) {
    s.path = j["path"].get<std::string>();
  }
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (repetitions < 1) {
    throw ConfigError("repetitions must be at least 1");
  }
  if (attacks.empty() && workload.kind != WorkloadKind::kInstances) {
    throw ConfigError("at least one attack spec is required");
  }
  if (workers < 1) {
    throw ConfigError("workers must be at least 1");
  }
  if (workload.kind == WorkloadKind::kSynthetic) {
    if (workload.n < 1 || workload.count < 1) {
      throw ConfigError("synthetic workload needs n >= 1 and count >= 1");
    }
    if (!(workload.amplitude_lo <= workload.amplitude_hi) || workload.amplitude_lo < 0.0) {
      throw ConfigError("empty amplitude range");
    }
  }
  if (workload.kind == WorkloadKind::kFiles && workload.glob.empty()) {
    throw ConfigError("files workload needs a glob");
  }
  if (workload.kind == WorkloadKind::kInstances && workload.dir.empty()) {
    throw ConfigError("instances workload needs a dir");
  }
  try {
    if (workload.kind == WorkloadKind::kSynthetic) {
      cad.validate(static_cast<Index>(workload.n));
    } else {
      cad.validate(static_cast<Index>(cad.k));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("cad: ") + e.what());
  }
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("workload")) {
      cfg.workload = workload_from_json(j["workload"]);
    }
    cfg.cad = cad_config_from_json(j.value("cad", nlohmann::json::object()));
    for (const auto& a : j.value("attacks", nlohmann::json::array())) {
      cfg.attacks.push_back(attack_spec_from_json(a));
    }
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.out_dir = j.value("out", cfg.out_dir.string());
    const auto format = j.value("format", std::string("csv"));
    if (format == "csv") {
      cfg.format = ReportFormat::kCsv;
    } else if (format == "json") {
      cfg.format = ReportFormat::kJson;
    } else {
      throw ConfigError("unknown report format: " + format);
    }
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("stats")) {
      cfg.stats = stats_from_json(j["stats"]);
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      cfg.sweep.eta = axis<double>(s, "eta");
      cfg.sweep.eta_prime = axis<double>(s, "eta_prime");
      cfg.sweep.eta_dprime = axis<double>(s, "eta_dprime");
      cfg.sweep.gamma = axis<double>(s, "gamma");
      cfg.sweep.sigma = axis<double>(s, "sigma");
      cfg.sweep.lambda = axis<double>(s, "lambda");
      cfg.sweep.k = axis<std::size_t>(s, "k");
    }
    cfg.export_reconstructions = j.value("export_reconstructions", false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

std::optional<Action> designated_action(AttackFamily family) {
  switch (family) {
    case AttackFamily::kNone: return Action::kCosamp;
    case AttackFamily::kL0: return Action::kL1Sparse;
    case AttackFamily::kL1:
    case AttackFamily::kL2: return Action::kL1Energy;
    case AttackFamily::kLinf: return Action::kL1Dense;
    case AttackFamily::kGradientProxy: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace cad::harness
