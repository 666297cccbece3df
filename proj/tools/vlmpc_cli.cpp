// Copyright 2026 The vlmpc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vlmpc/checks.hpp"
#include "vlmpc/config.hpp"
#include "vlmpc/harness.hpp"

namespace {

int run_experiment(vlmpc::ExperimentKind kind, const std::string& config_path,
                   std::optional<std::uint64_t> seed, const std::string& out) {
  vlmpc::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = vlmpc::load_config(config_path);
    cfg.experiment = kind;
    if (!out.empty()) cfg.output_dir = out;
    cfg.validate();
  } catch (const vlmpc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const std::vector<std::uint64_t> seeds = seed ? std::vector<std::uint64_t>{*seed} : cfg.seeds;
  const auto start = std::chrono::steady_clock::now();
  try {
    vlmpc::RunReport report;
    for (std::uint64_t s : seeds) {
      switch (kind) {
        case vlmpc::ExperimentKind::train:
          vlmpc::merge_reports(report, vlmpc::run_train_experiment(cfg, s, cfg.output_dir));
          break;
        case vlmpc::ExperimentKind::mismatch_sweep:
          vlmpc::merge_reports(report, vlmpc::run_mismatch_sweep(cfg, s, cfg.output_dir));
          break;
        case vlmpc::ExperimentKind::benchmark:
          vlmpc::merge_reports(report, vlmpc::run_benchmark(cfg, s, cfg.output_dir));
          break;
      }
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    vlmpc::write_manifest(report, cfg, seeds, elapsed);
    for (const auto& t : report.trainings) {
      std::cout << "trained " << t.curve_path.filename().string() << ": " << t.updates
                << " updates, " << t.env_steps << " env steps"
                << (t.diverged ? " (diverged: " + t.divergence_message + ")" : "") << "\n";
    }
    for (const auto& e : report.episodes) {
      std::cout << e.file << ": cumulative reward " << e.cumulative_reward << ", progress "
                << e.final_progress << (e.aborted || e.fault_aborted ? " (aborted)" : "") << "\n";
    }
    std::cout << "manifest: " << (report.dir / "run.json").string() << "\n";
    for (const auto& t : report.trainings) {
      if (t.diverged) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value-learning MPC experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
    if (need_config) opt->required();
    sub->add_option("--seed", seed_value, "run a single seed instead of the configured list");
    sub->add_option("--out", out, "output root directory");
  };
  CLI::App* train = app.add_subcommand("train", "train a critic with the value-terminal MPC");
  CLI::App* sweep = app.add_subcommand("sweep", "model mismatch sweep on the curve track");
  CLI::App* bench = app.add_subcommand("bench", "benchmark all controllers on all tracks");
  CLI::App* check = app.add_subcommand("check", "run the oracle and property suites");
  add_common(train, true);
  add_common(sweep, true);
  add_common(bench, true);
  check->add_option("--seed", seed_value, "seed of the random test cases");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  auto seed_of = [&](CLI::App* sub) -> std::optional<std::uint64_t> {
    if (sub->count("--seed") > 0) return seed_value;
    return std::nullopt;
  };

  if (check->parsed()) {
    bool ok = true;
    for (const auto& r : vlmpc::run_all_checks(seed_value)) {
      std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
      ok = ok && r.pass;
    }
    return ok ? 0 : 1;
  }
  if (train->parsed()) return run_experiment(vlmpc::ExperimentKind::train, config_path, seed_of(train), out);
  if (sweep->parsed()) {
    return run_experiment(vlmpc::ExperimentKind::mismatch_sweep, config_path, seed_of(sweep), out);
  }
  return run_experiment(vlmpc::ExperimentKind::benchmark, config_path, seed_of(bench), out);
}
