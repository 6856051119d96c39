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

// Command-line front end: gen, stats, run, bench.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cad/harness.hpp"
#include "cad/io.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kIo = 2, kNumerical = 3 };

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<std::string> format;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config, "experiment config (JSON)")->required();
  sub->add_option("--seed", flags.seed, "master seed override");
  sub->add_option("--out", flags.out, "output directory override");
  sub->add_option("--workers", flags.workers, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--format", flags.format, "stdout summary format")->check(CLI::IsMember({"csv", "json"}));
}

cad::harness::ExperimentConfig resolve(const CommonFlags& flags) {
  auto cfg = cad::harness::load_experiment_config(flags.config);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.workers) cfg.workers = *flags.workers;
  if (flags.format) {
    cfg.format = *flags.format == "json" ? cad::harness::ReportFormat::kJson : cad::harness::ReportFormat::kCsv;
  }
  cfg.validate();
  return cfg;
}

void init_logging() {
  auto logger = spdlog::stderr_color_mt("cad");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("CAD_LOG")) {
    spdlog::cfg::helpers::load_levels(level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Compressive-sensing adaptive defence"};
  app.require_subcommand(1);

  CommonFlags gen_flags, stats_flags, run_flags, bench_flags;
  auto* gen = app.add_subcommand("gen", "write attacked instances and a manifest");
  add_common(gen, gen_flags);
  auto* stats = app.add_subcommand("stats", "estimate clean residual statistics");
  add_common(stats, stats_flags);
  auto* run = app.add_subcommand("run", "run CAD and write the report");
  add_common(run, run_flags);
  auto* bench = app.add_subcommand("bench", "sweep parameters and write bench.csv");
  add_common(bench, bench_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) {
      const auto res = cad::harness::cmd_gen(resolve(gen_flags));
      std::cout << res.files.size() << " instances -> " << res.manifest.string() << '\n';
    } else if (stats->parsed()) {
      cad::harness::cmd_stats(resolve(stats_flags));
    } else if (run->parsed()) {
      const auto cfg = resolve(run_flags);
      const auto report = cad::harness::cmd_run(cfg);
      if (cfg.format == cad::harness::ReportFormat::kJson) {
        std::cout << cad::harness::to_json(report).at("aggregates").dump(2) << '\n';
      } else {
        cad::harness::write_aggregates_csv(std::cout, report.aggregates);
      }
      std::cout << "report -> " << cfg.out_dir.string() << '\n';
    } else if (bench->parsed()) {
      const auto cfg = resolve(bench_flags);
      const auto rows = cad::harness::cmd_bench(cfg);
      std::cout << rows.size() << " rows -> " << (cfg.out_dir / "bench.csv").string() << '\n';
    }
  } catch (const cad::harness::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const std::invalid_argument& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const cad::IoError& e) {
    spdlog::error("io: {}", e.what());
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("io: {}", e.what());
    return kIo;
  } catch (const std::exception& e) {
    spdlog::error("numerical: {}", e.what());
    return kNumerical;
  }
  return kOk;
}
