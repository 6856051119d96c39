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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cad/harness.hpp"
#include "cad/io.hpp"
#include "cad/random.hpp"
#include "cad/recovery.hpp"

namespace cad::harness {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kAttackStream = 1;
constexpr std::uint64_t kCadStream = 2;
constexpr std::uint64_t kCleanStream = 0xc1ea;
constexpr std::uint64_t kStatsStream = 0x57a7;

bool wildcard_match(std::string_view pattern, std::string_view name) {
  if (pattern.empty()) return name.empty();
  if (pattern.front() == '*') {
    for (std::size_t skip = 0; skip <= name.size(); ++skip) {
      if (wildcard_match(pattern.substr(1), name.substr(skip))) return true;
    }
    return false;
  }
  if (name.empty()) return false;
  if (pattern.front() != '?' && pattern.front() != name.front()) return false;
  return wildcard_match(pattern.substr(1), name.substr(1));
}

std::vector<fs::path> expand_glob(const std::string& glob) {
  const fs::path p(glob);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  const std::string pattern = p.filename().string();
  if (!fs::is_directory(dir)) {
    throw IoError("glob directory does not exist: " + dir.string());
  }
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && wildcard_match(pattern, entry.path().filename().string())) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) {
    throw IoError("glob matched no files: " + glob);
  }
  return out;
}

std::size_t clean_k(const ExperimentConfig& cfg) {
  return cfg.workload.clean_k.value_or(cfg.cad.k);
}

SpectralVector synthetic_clean(const ExperimentConfig& cfg, std::uint64_t stream, std::size_t item,
                               std::size_t channel) {
  const auto& w = cfg.workload;
  const std::uint64_t seed =
      derive_seed(derive_seed(cfg.seed, stream), item * cfg.cad.channels + channel);
  return make_compressible(w.n, clean_k(cfg), w.amplitude_lo, w.amplitude_hi, w.tail_sigma, seed);
}

std::vector<std::vector<SpectralVector>> file_cleans(const ExperimentConfig& cfg) {
  std::vector<std::vector<SpectralVector>> out;
  std::optional<SensingOperator> op;
  for (const auto& path : expand_glob(cfg.workload.glob)) {
    const LoadedSignal img = load_signal(path);
    if (img.channels != cfg.cad.channels) {
      throw ConfigError(path.string() + ": has " + std::to_string(img.channels) +
                        " channels, config expects " + std::to_string(cfg.cad.channels));
    }
    if (!op) {
      op = SensingOperator::dct(img.pixels());
    } else if (op->n() != img.pixels()) {
      throw ConfigError(path.string() + ": image size differs from the first file");
    }
    std::vector<SpectralVector> channels;
    for (std::size_t c = 0; c < img.channels; ++c) {
      channels.push_back(analyze(img.channel(c), *op));
    }
    out.push_back(std::move(channels));
  }
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<Instance> load_instances(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  std::vector<Instance> out;
  for (const auto& name : manifest.at("files")) {
    const auto j = read_json(dir / name.get<std::string>());
    Instance inst;
    inst.index = j.at("index").get<std::size_t>();
    for (const auto& c : j.at("channels")) {
      inst.channels.push_back(adversarial_instance_from_json(c));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

double family_budget(const AttackSpec& spec, std::size_t n) {
  switch (spec.family) {
    case AttackFamily::kNone: return 0.0;
    case AttackFamily::kL0: return static_cast<double>(spec.tau) * spec.eta_prime;
    case AttackFamily::kL1:
    case AttackFamily::kL2: return spec.eta;
    case AttackFamily::kLinf:
    case AttackFamily::kGradientProxy: return std::sqrt(static_cast<double>(n)) * spec.eta_dprime;
  }
  return 0.0;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

// Runs fn(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

struct InstanceResult {
  std::vector<ReportRow> rows;
  std::vector<TimingRow> timing;
  std::vector<Signal> reconstructions;
};

InstanceResult run_instance(const ExperimentConfig& cfg, const Instance& inst,
                            const std::vector<const CleanStats*>& stats, const SensingOperator& op) {
  InstanceResult res;
  CadConfig cad_cfg = cfg.cad;
  cad_cfg.channels = inst.channels.size();
  cad_cfg.seed = derive_seed(derive_seed(cfg.seed, inst.index), kCadStream);

  std::vector<Signal> observed;
  for (const auto& c : inst.channels) observed.push_back(c.observed);

  auto base_row = [&](std::size_t c) {
    const auto& ch = inst.channels[c];
    ReportRow r;
    r.instance = inst.index;
    r.channel = c;
    r.family = std::string(to_string(ch.spec.family));
    if (auto a = designated_action(ch.spec.family)) {
      r.designated = std::string(action_name(*a));
    }
    return r;
  };

  try {
    const ChannelOutcomes outcomes = cad_run_channels(join_channels(observed), cad_cfg, stats, op);
    for (std::size_t c = 0; c < inst.channels.size(); ++c) {
      const CadOutcome& o = outcomes.channels[c];
      const auto& ch = inst.channels[c];
      ReportRow r = base_row(c);
      r.final_method = o.final_method.name();
      if (auto a = designated_action(ch.spec.family)) {
        // The CoSaMP fallback counts as CoSaMP.
        r.identified = o.final_method.action == *a ? 1 : 0;
      }
      r.l2_error = (o.estimate.coeffs - ch.clean_spectral.coeffs).norm();
      if (!o.trace.records.empty()) {
        const auto& last = o.trace.records.back();
        r.residual_l2 = last.residual_l2;
        r.residual_linf = last.residual_linf;
        r.residual_l0 = last.residual_l0;
      }
      r.iterations = o.stopped_at;
      r.stop_reason = std::string(to_string(o.stop_reason));
      const BoundReport bound = check_bound(ch.clean_spectral, o.estimate, cad_cfg.k,
                                            family_budget(ch.spec, static_cast<std::size_t>(op.n())));
      r.bound_ratio = bound.ratio;
      r.sigma_k_l1 = bound.sigma_k_l1;
      res.rows.push_back(std::move(r));
      res.timing.push_back({inst.index, c, o.stopped_at, o.timing.loop_seconds, o.timing.total_seconds});
      res.reconstructions.push_back(o.reconstruction);
    }
  } catch (const std::exception& e) {
    spdlog::warn("instance {} failed: {}", inst.index, e.what());
    res.rows.clear();
    res.timing.clear();
    res.reconstructions.clear();
    for (std::size_t c = 0; c < inst.channels.size(); ++c) {
      ReportRow r = base_row(c);
      r.final_method = "error";
      r.stop_reason = "error";
      r.error = e.what();
      res.rows.push_back(std::move(r));
    }
  }
  return res;
}

SensingOperator operator_for(const std::vector<Instance>& instances) {
  if (instances.empty() || instances.front().channels.empty()) {
    throw ConfigError("workload produced no instances");
  }
  return SensingOperator::dct(instances.front().channels.front().clean_spectral.size());
}

}  // namespace

std::vector<Instance> build_instances(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.workload.kind == WorkloadKind::kInstances) {
    return load_instances(cfg.workload.dir);
  }
  std::vector<std::vector<SpectralVector>> cleans;
  if (cfg.workload.kind == WorkloadKind::kFiles) {
    cleans = file_cleans(cfg);
  }
  const std::size_t items =
      cfg.workload.kind == WorkloadKind::kSynthetic ? cfg.workload.count : cleans.size();
  const std::size_t channels = cfg.cad.channels;
  const Index n = cfg.workload.kind == WorkloadKind::kSynthetic ? static_cast<Index>(cfg.workload.n)
                                                                : cleans.front().front().size();
  const SensingOperator op = SensingOperator::dct(n);

  std::vector<Instance> out;
  out.reserve(cfg.attacks.size() * cfg.repetitions * items);
  for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      for (std::size_t item = 0; item < items; ++item) {
        Instance inst;
        inst.index = (a * cfg.repetitions + rep) * items + item;
        const std::uint64_t iseed = derive_seed(cfg.seed, inst.index);
        for (std::size_t c = 0; c < channels; ++c) {
          const SpectralVector clean = cfg.workload.kind == WorkloadKind::kSynthetic
                                           ? synthetic_clean(cfg, kCleanStream, item, c)
                                           : cleans[item][c];
          AttackSpec spec = cfg.attacks[a];
          spec.seed = derive_seed(derive_seed(iseed, kAttackStream) ^ cfg.attacks[a].seed, c);
          inst.channels.push_back(perturb(clean, spec, op));
        }
        out.push_back(std::move(inst));
      }
    }
  }
  return out;
}

std::vector<CleanStats> build_clean_stats(const ExperimentConfig& cfg, const SensingOperator& op) {
  std::vector<CleanStats> out;
  if (!cfg.stats.enabled) {
    return out;
  }
  const std::size_t channels = cfg.cad.channels;
  if (cfg.stats.path) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::string p = *cfg.stats.path;
      if (auto at = p.find("{c}"); at != std::string::npos) {
        p.replace(at, 3, std::to_string(c));
      }
      out.push_back(load_clean_stats(p));
    }
    return out;
  }

  std::vector<std::vector<Signal>> samples(channels);
  switch (cfg.workload.kind) {
    case WorkloadKind::kSynthetic:
      for (std::size_t s = 0; s < cfg.stats.count; ++s) {
        for (std::size_t c = 0; c < channels; ++c) {
          samples[c].push_back(synthesize(synthetic_clean(cfg, kStatsStream, s, c), op));
        }
      }
      break;
    case WorkloadKind::kFiles:
      for (const auto& item : file_cleans(cfg)) {
        for (std::size_t c = 0; c < channels; ++c) {
          samples[c].push_back(synthesize(item[c], op));
        }
      }
      break;
    case WorkloadKind::kInstances:
      for (const auto& inst : load_instances(cfg.workload.dir)) {
        for (std::size_t c = 0; c < channels && c < inst.channels.size(); ++c) {
          samples[c].push_back(synthesize(inst.channels[c].clean_spectral, op));
        }
      }
      break;
  }
  for (std::size_t c = 0; c < channels; ++c) {
    try {
      out.push_back(estimate_clean_stats(samples[c], op, cfg.cad.k, cfg.stats.n_cosamp, cfg.stats.ridge));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("stats: ") + e.what());
    }
  }
  return out;
}

RunReport execute(const ExperimentConfig& cfg, const std::vector<Instance>& instances,
                  const std::vector<CleanStats>& stats, const SensingOperator& op) {
  std::vector<const CleanStats*> stats_ptrs;
  for (const auto& s : stats) stats_ptrs.push_back(&s);

  std::vector<InstanceResult> results(instances.size());
  parallel_for(instances.size(), cfg.workers, [&](std::size_t i) {
    results[i] = run_instance(cfg, instances[i], stats_ptrs, op);
    spdlog::debug("instance {} done", instances[i].index);
  });

  RunReport report;
  report.params = to_json(cfg.cad);
  for (auto& r : results) {
    for (auto& row : r.rows) report.rows.push_back(std::move(row));
    for (auto& t : r.timing) report.timing.push_back(t);
  }
  report.aggregates = compute_aggregates(report.rows);

  if (cfg.export_reconstructions) {
    ensure_dir(cfg.out_dir / "reconstructions");
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].reconstructions.empty()) continue;
      const auto base = cfg.out_dir / "reconstructions" / fmt::format("instance_{:06}", instances[i].index);
      write_raw_f64(base.string() + ".f64", join_channels(results[i].reconstructions),
                    results[i].reconstructions.size());
      const Index n = op.n();
      const auto side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(n))));
      if (side * side == n && results[i].reconstructions.size() == 1) {
        write_pgm(base.string() + ".pgm", results[i].reconstructions.front(), side, side);
      }
    }
  }
  return report;
}

GenResult cmd_gen(const ExperimentConfig& cfg) {
  const auto instances = build_instances(cfg);
  const fs::path dir = cfg.out_dir;
  ensure_dir(dir);
  GenResult res;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& inst : instances) {
    const std::string name = fmt::format("instance_{:06}.json", inst.index);
    nlohmann::json channels = nlohmann::json::array();
    for (const auto& c : inst.channels) channels.push_back(to_json(c));
    const nlohmann::json j = {{"index", inst.index},
                              {"family", std::string(to_string(inst.channels.front().spec.family))},
                              {"channels", std::move(channels)}};
    auto out = open_out(dir / name);
    out << j.dump() << '\n';
    close_checked(out, dir / name);
    files.push_back(name);
    res.files.push_back(dir / name);
  }
  nlohmann::json attacks = nlohmann::json::array();
  for (const auto& a : cfg.attacks) attacks.push_back(to_json(a));
  const nlohmann::json manifest = {
      {"seed", cfg.seed},
      {"n", instances.empty() ? 0 : instances.front().channels.front().clean_spectral.size()},
      {"channels", cfg.cad.channels},
      {"count", instances.size()},
      {"attacks", std::move(attacks)},
      {"files", std::move(files)},
  };
  res.manifest = dir / "manifest.json";
  auto out = open_out(res.manifest);
  out << manifest.dump(2) << '\n';
  close_checked(out, res.manifest);
  return res;
}

StatsResult cmd_stats(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentConfig build = cfg;
  build.stats.path.reset();
  build.stats.enabled = true;
  Index n = static_cast<Index>(cfg.workload.n);
  if (cfg.workload.kind == WorkloadKind::kFiles) {
    n = file_cleans(cfg).front().front().size();
  } else if (cfg.workload.kind == WorkloadKind::kInstances) {
    n = load_instances(cfg.workload.dir).front().channels.front().clean_spectral.size();
  }
  const SensingOperator op = SensingOperator::dct(n);
  const auto stats = build_clean_stats(build, op);

  ensure_dir(cfg.out_dir);
  StatsResult res;
  for (std::size_t c = 0; c < stats.size(); ++c) {
    const fs::path path = cfg.out_dir / (stats.size() == 1 ? std::string("stats.bin")
                                                           : fmt::format("stats_c{}.bin", c));
    save_clean_stats(path, stats[c]);
    Matrix reg = stats[c].covariance();
    reg.diagonal().array() += stats[c].ridge();
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(reg, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    res.files.push_back(path);
    res.mean_residual_norm.push_back(stats[c].mean().norm());
    res.condition_estimate.push_back(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
    std::cout << fmt::format("channel {}: sources={} |mean residual|={:.6g} ridge={:.6g} cond={:.6g} -> {}\n",
                             c, stats[c].source_count(), res.mean_residual_norm.back(),
                             stats[c].ridge(), res.condition_estimate.back(), path.string());
  }
  return res;
}

RunReport cmd_run(const ExperimentConfig& cfg) {
  const auto instances = build_instances(cfg);
  const SensingOperator op = operator_for(instances);
  const auto stats = build_clean_stats(cfg, op);
  RunReport report = execute(cfg, instances, stats, op);

  ensure_dir(cfg.out_dir);
  const fs::path rows = cfg.out_dir / "report.csv";
  auto out = open_out(rows);
  write_rows_csv(out, report);
  close_checked(out, rows);
  const fs::path agg = cfg.out_dir / "aggregates.csv";
  auto aout = open_out(agg);
  write_aggregates_csv(aout, report.aggregates);
  close_checked(aout, agg);
  const fs::path json = cfg.out_dir / "report.json";
  auto jout = open_out(json);
  jout << to_json(report).dump(2) << '\n';
  close_checked(jout, json);
  // Wall-clock numbers live apart from the reproducible report.
  const fs::path timing = cfg.out_dir / "timing.csv";
  auto tout = open_out(timing);
  tout << "instance,channel,iterations,loop_seconds,total_seconds,seconds_per_iteration\n";
  for (const auto& t : report.timing) {
    const double per = t.iterations > 0 ? t.loop_seconds / static_cast<double>(t.iterations) : 0.0;
    tout << t.instance << ',' << t.channel << ',' << t.iterations << ',' << t.loop_seconds << ','
         << t.total_seconds << ',' << per << '\n';
  }
  close_checked(tout, timing);
  return report;
}

std::vector<BenchRow> cmd_bench(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& s = cfg.sweep;
  const auto& f = cfg.cad.feedback;
  auto values = [](const std::optional<std::vector<double>>& axis, double current, const char* name) {
    if (!axis) return std::vector<double>{current};
    if (axis->empty()) throw ConfigError(std::string("sweep axis '") + name + "' is empty");
    return *axis;
  };
  const auto etas = values(s.eta, f.eta, "eta");
  const auto eta_primes = values(s.eta_prime, f.eta_prime, "eta_prime");
  const auto eta_dprimes = values(s.eta_dprime, f.eta_dprime, "eta_dprime");
  const auto gammas = values(s.gamma, cfg.cad.bandit.gamma, "gamma");
  const auto sigmas = values(s.sigma, cfg.cad.bandit.sigma, "sigma");
  const auto lambdas = values(s.lambda, cfg.cad.bandit.lambda, "lambda");
  std::vector<std::size_t> ks = s.k ? *s.k : std::vector<std::size_t>{cfg.cad.k};
  if (ks.empty()) throw ConfigError("sweep axis 'k' is empty");

  std::vector<BenchRow> rows;
  std::size_t cell = 0;
  for (double eta : etas)
    for (double eta_prime : eta_primes)
      for (double eta_dprime : eta_dprimes)
        for (double gamma : gammas)
          for (double sigma : sigmas)
            for (double lambda : lambdas)
              for (std::size_t k : ks) {
                ExperimentConfig c = cfg;
                c.cad.feedback.eta = eta;
                c.cad.feedback.eta_prime = eta_prime;
                c.cad.feedback.eta_dprime = eta_dprime;
                c.cad.bandit = {gamma, sigma, lambda};
                c.cad.k = k;
                if (s.eta) for (auto& a : c.attacks) a.eta = eta;
                if (s.eta_prime) for (auto& a : c.attacks) a.eta_prime = eta_prime;
                if (s.eta_dprime) for (auto& a : c.attacks) a.eta_dprime = eta_dprime;
                const auto instances = build_instances(c);
                const SensingOperator op = operator_for(instances);
                const auto stats = build_clean_stats(c, op);
                const RunReport report = execute(c, instances, stats, op);
                for (const auto& agg : report.aggregates) {
                  auto emit = [&](const char* metric, double value) {
                    rows.push_back({cell, eta, eta_prime, eta_dprime, gamma, sigma, lambda, k,
                                    agg.family, metric, value});
                  };
                  if (agg.identification_rate) emit("identification_rate", *agg.identification_rate);
                  emit("mean_l2_error", agg.mean_l2_error);
                  emit("median_l2_error", agg.median_l2_error);
                  if (agg.mean_bound_ratio) emit("mean_bound_ratio", *agg.mean_bound_ratio);
                  emit("mean_iterations", agg.mean_iterations);
                  emit("residual_stop_rate", agg.residual_stop_rate);
                }
                ++cell;
              }

  ensure_dir(cfg.out_dir);
  const fs::path path = cfg.out_dir / "bench.csv";
  auto out = open_out(path);
  out << "cell,eta,eta_prime,eta_dprime,gamma,sigma,lambda,k,family,metric,value\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.cell, r.eta, r.eta_prime, r.eta_dprime,
                       r.gamma, r.sigma, r.lambda, r.k, r.family, r.metric, r.value);
  }
  close_checked(out, path);
  return rows;
}

}  // namespace cad::harness
