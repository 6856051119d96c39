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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cad/attack.hpp"
#include "cad/cad.hpp"
#include "cad/feedback.hpp"

namespace cad::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WorkloadKind { kSynthetic, kFiles, kInstances };

struct Workload {
  WorkloadKind kind = WorkloadKind::kSynthetic;
  // synthetic
  std::size_t n = 784;
  std::size_t count = 100;
  std::optional<std::size_t> clean_k;  // defaults to the CAD sparsity
  double amplitude_lo = 4.0;
  double amplitude_hi = 8.0;
  double tail_sigma = 0.0;
  // files: "<dir>/<pattern>" with '*' wildcards in the file name only
  std::string glob;
  // instances: directory written by `gen`
  std::string dir;
};

struct StatsSpec {
  bool enabled = true;
  std::size_t count = 200;
  std::size_t n_cosamp = 10;
  std::optional<double> ridge;
  std::optional<std::string> path;  // prebuilt stats; "{c}" expands to the channel
};

struct SweepSpec {
  std::optional<std::vector<double>> eta, eta_prime, eta_dprime, gamma, sigma, lambda;
  std::optional<std::vector<std::size_t>> k;
};

enum class ReportFormat { kCsv, kJson };

struct ExperimentConfig {
  Workload workload;
  CadConfig cad = mnist_preset();
  std::vector<AttackSpec> attacks;
  std::size_t repetitions = 1;
  std::filesystem::path out_dir = "out";
  ReportFormat format = ReportFormat::kCsv;
  StatsSpec stats;
  SweepSpec sweep;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool export_reconstructions = false;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Action each attack family should be identified as. gradient_proxy has
/// none.
std::optional<Action> designated_action(AttackFamily family);

/// One attacked input, one entry per channel.
struct Instance {
  std::size_t index = 0;
  std::vector<AdversarialInstance> channels;
};

/// Deterministic instance list: attacks x repetitions x workload items.
/// Instance i depends only on (seed, i).
std::vector<Instance> build_instances(const ExperimentConfig& cfg);

/// Clean statistics per channel (empty when disabled).
std::vector<CleanStats> build_clean_stats(const ExperimentConfig& cfg, const SensingOperator& op);

struct ReportRow {
  std::size_t instance = 0;
  std::size_t channel = 0;
  std::string family;
  std::string final_method;
  std::string designated;  // "" when the family has no designated action
  int identified = -1;     // 1, 0, or -1 for not applicable
  double l2_error = 0.0;
  double residual_l2 = 0.0;
  double residual_linf = 0.0;
  std::size_t residual_l0 = 0;
  std::size_t iterations = 0;
  std::string stop_reason;
  std::optional<double> bound_ratio;
  double sigma_k_l1 = 0.0;
  std::string error;  // non-empty when the run failed

  bool operator==(const ReportRow&) const = default;
};

struct AggregateRow {
  std::string family;
  std::size_t rows = 0;
  std::size_t failures = 0;
  std::optional<double> identification_rate;
  double mean_l2_error = 0.0;
  double median_l2_error = 0.0;
  std::optional<double> mean_bound_ratio;
  double mean_iterations = 0.0;
  double residual_stop_rate = 0.0;

  bool operator==(const AggregateRow&) const = default;
};

struct TimingRow {
  std::size_t instance = 0;
  std::size_t channel = 0;
  std::size_t iterations = 0;
  double loop_seconds = 0.0;
  double total_seconds = 0.0;
};

struct RunReport {
  nlohmann::json params;
  std::vector<ReportRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<TimingRow> timing;
};

/// Aggregates per family, in order of first appearance.
std::vector<AggregateRow> compute_aggregates(const std::vector<ReportRow>& rows);

void write_rows_csv(std::ostream& out, const RunReport& report);
std::vector<ReportRow> read_rows_csv(std::istream& in);
void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRow>& aggregates);
std::vector<AggregateRow> read_aggregates_csv(std::istream& in);
nlohmann::json to_json(const RunReport& report);

/// Runs CAD on every instance (worker pool) and assembles the report
/// without touching the filesystem.
RunReport execute(const ExperimentConfig& cfg, const std::vector<Instance>& instances,
                  const std::vector<CleanStats>& stats, const SensingOperator& op);

struct GenResult {
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
};

struct StatsResult {
  std::vector<std::filesystem::path> files;
  std::vector<double> mean_residual_norm;
  std::vector<double> condition_estimate;
};

struct BenchRow {
  std::size_t cell = 0;
  double eta = 0, eta_prime = 0, eta_dprime = 0, gamma = 0, sigma = 0, lambda = 0;
  std::size_t k = 0;
  std::string family;
  std::string metric;
  double value = 0.0;
};

GenResult cmd_gen(const ExperimentConfig& cfg);
StatsResult cmd_stats(const ExperimentConfig& cfg);
RunReport cmd_run(const ExperimentConfig& cfg);
std::vector<BenchRow> cmd_bench(const ExperimentConfig& cfg);

}  // namespace cad::harness
