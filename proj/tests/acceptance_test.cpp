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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vlmpc/checks.hpp"
#include "vlmpc/config.hpp"
#include "vlmpc/harness.hpp"

namespace fs = std::filesystem;
using namespace vlmpc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
}

ExperimentConfig shipped(const std::string& name) {
  return load_config(fs::path(VLMPC_CONFIG_DIR) / name);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Share of the progress made while both along- and cross-track errors are
// inside the band.
double in_band_progress(const std::vector<EpisodeRow>& rows, double band) {
  double prev = 0.0;
  double inside = 0.0;
  double total = 0.0;
  for (const auto& r : rows) {
    const double ds = std::max(0.0, r.progress - prev);
    prev = r.progress;
    total += ds;
    if (std::abs(r.error.x_err) <= band && std::abs(r.error.y_err) <= band) inside += ds;
  }
  return total > 0.0 ? inside / total : 0.0;
}

EpisodeResult episode(const ExperimentConfig& cfg, const ValueNetwork& critic, CostMode mode,
                      TrackKind track, double tau, const InitialOffset& offset) {
  EnvConfig ec = make_env_config(cfg.env, track, tau);
  ec.reward.mode = RewardMode::dense;
  Environment env(ec);
  MpcConfig mc = cfg.mpc;
  mc.mode = mode;
  MpcActor actor(mc, env.config().reference);
  return run_episode(env, actor, &critic, offset);
}

void check_suites(std::uint64_t seed) {
  {
    const CheckResult r = check_differentiation(seed);
    report(1, r.pass && r.seconds < 30.0, r.detail + " (limit 30 s)");
  }
  {
    const CheckResult r = check_qp_oracle(seed);
    report(2, r.pass && r.seconds < 60.0, r.detail + " (limit 60 s)");
  }
  {
    const CheckResult r = check_geometry(seed);
    report(3, r.pass, r.detail);
  }
}

struct Trained {
  TrainingResult result;
  double seconds = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run"};
  std::string out = "acceptance_out";
  app.add_option("--out", out, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  const fs::path root(out);
  fs::remove_all(root);
  fs::create_directories(root);

  const ExperimentConfig dense_cfg = shipped("train_dense.json");
  const ExperimentConfig sparse_cfg = shipped("train_sparse.json");
  const ExperimentConfig sweep_base = shipped("sweep.json");
  const std::vector<std::uint64_t> seeds = dense_cfg.seeds;

  check_suites(1);

  // Critics for every seed: dense at the training plant, then sparse.
  std::map<std::uint64_t, Trained> dense;
  std::map<std::uint64_t, Trained> sparse;
  for (std::uint64_t s : seeds) {
    const auto t0 = Clock::now();
    TrainingResult r = run_training(dense_cfg, s, root / "train", "tdmpc-dense");
    dense[s] = {std::move(r), seconds_since(t0)};
    std::cout << "  dense seed " << s << ": " << dense[s].result.updates << " updates, "
              << fmt(dense[s].seconds, 3) << " s" << std::endl;
  }
  for (std::uint64_t s : seeds) {
    const auto t0 = Clock::now();
    TrainingResult r = run_training(sparse_cfg, s, root / "train", "tdmpc-sparse");
    sparse[s] = {std::move(r), seconds_since(t0)};
    std::cout << "  sparse seed " << s << ": " << sparse[s].result.updates << " updates, "
              << fmt(sparse[s].seconds, 3) << " s" << std::endl;
  }

  // 4: mismatch ordering on the curve.
  {
    bool ordering = true;
    bool low_lag = true;
    double seconds = 0.0;
    std::ostringstream detail;
    for (std::uint64_t s : seeds) {
      const auto t0 = Clock::now();
      ExperimentConfig c = sweep_base;
      c.checkpoint = dense[s].result.checkpoint_path.string();
      const RunReport rep = run_mismatch_sweep(c, s, root / ("sweep_seed" + std::to_string(s)));
      seconds += seconds_since(t0) + dense[s].seconds;
      std::map<std::pair<std::string, double>, double> reward;
      for (const auto& e : rep.episodes) reward[{e.controller, e.tau_s}] = e.cumulative_reward;
      const double naive = reward.at({"naive", 0.8});
      const double td = reward.at({"tdmpc", 0.8});
      const double dm = reward.at({"dmpc", 0.8});
      ordering = ordering && td > naive && dm > naive;
      detail << "seed " << s << " tau0.8 naive " << fmt(naive) << " tdmpc " << fmt(td) << " dmpc "
             << fmt(dm);
      for (const char* ctl : {"naive", "expert"}) {
        const double lo = reward.at({ctl, 0.2});
        const double mid = reward.at({ctl, 0.6});
        // Rewards are non-positive: at most 20% worse than at the training lag.
        low_lag = low_lag && lo >= mid - 0.2 * std::abs(mid);
        detail << "; " << ctl << " tau0.2/0.6 " << fmt(lo) << "/" << fmt(mid);
      }
      detail << " | ";
    }
    detail << "ordering " << (ordering ? "ok" : "violated") << ", low lag "
           << (low_lag ? "ok" : "violated") << ", " << fmt(seconds, 4) << " s (limit 1800 s)";
    report(4, ordering && low_lag && seconds < 1800.0, detail.str());
  }

  // 5: both trainings plateau, sparse strictly later.
  {
    bool pass = true;
    std::ostringstream detail;
    for (std::uint64_t s : seeds) {
      const auto& d = dense[s].result.plateau_updates;
      const auto& sp = sparse[s].result.plateau_updates;
      detail << "seed " << s << " dense " << (d ? std::to_string(*d) : "none") << " sparse "
             << (sp ? std::to_string(*sp) : "none") << "; ";
      pass = pass && d && *d <= 20000 && sp && *sp > *d;
    }
    detail << "(update count at the plateau, none = the 50-episode EMA slope never settles "
              "within 2%)";
    report(5, pass, detail.str());
  }

  // 6: sparse DMPC tracking on the curve.
  {
    bool pass = true;
    std::ostringstream detail;
    for (std::uint64_t s : seeds) {
      const EpisodeResult r = episode(sparse_cfg, sparse[s].result.checkpoint.critic,
                                      CostMode::dmpc, TrackKind::curve, sparse_cfg.env.plant.tau_s, {});
      const double frac = in_band_progress(r.rows, 0.1);
      pass = pass && frac >= 0.8;
      detail << "seed " << s << " in-band " << fmt(frac, 3) << "; ";
    }
    detail << "(need >= 0.8 of progress within 0.1 m)";
    report(6, pass, detail.str());
  }

  // 7: flat sparse value away from the path, and the robot stands still.
  {
    bool pass = true;
    std::ostringstream detail;
    const double v_ref = sparse_cfg.env.track.speed_mps;
    for (std::uint64_t s : seeds) {
      const ValueNetwork& critic = sparse[s].result.checkpoint.critic;
      auto mean_slope = [&](double y) {
        double sum = 0.0;
        int n = 0;
        for (double f : {0.8, 0.9, 1.0, 1.1, 1.2}) {
          sum += std::abs(value_input_jacobian(critic, {0.0, y, 0.0, f * v_ref, 0.0})(1));
          ++n;
        }
        return sum / n;
      };
      const double ratio = mean_slope(0.5) / mean_slope(0.05);
      InitialOffset o;
      o.y_err_m = sweep_base.straight_offset_m;
      const double tau = sparse_cfg.env.plant.tau_s;
      const double p_sparse =
          episode(sparse_cfg, critic, CostMode::dmpc, TrackKind::straight, tau, o).summary.final_progress;
      const double p_dense = episode(dense_cfg, dense[s].result.checkpoint.critic, CostMode::dmpc,
                                     TrackKind::straight, tau, o).summary.final_progress;
      const double prog = p_dense > 0.0 ? p_sparse / p_dense : INFINITY;
      pass = pass && ratio < 0.1 && prog < 0.1;
      detail << "seed " << s << " slope ratio " << fmt(ratio, 3) << " progress " << fmt(p_sparse, 3)
             << "/" << fmt(p_dense, 3) << (p_dense > 0.0 ? "" : " (dense DMPC makes no progress)")
             << "; ";
    }
    detail << "(need slope ratio < 0.1 and progress ratio < 0.1)";
    report(7, pass, detail.str());
  }

  // 8: control step latency.
  {
    ExperimentConfig c = dense_cfg;
    const ValueNetwork& critic = dense[seeds.front()].result.checkpoint.critic;
    std::ostringstream detail;
    bool pass = true;
    for (CostMode mode : {CostMode::tdmpc, CostMode::dmpc}) {
      EnvConfig ec = make_env_config(c.env, TrackKind::curve, c.env.plant.tau_s);
      Environment env(ec);
      MpcConfig mc = c.mpc;
      mc.mode = mode;
      MpcActor actor(mc, env.config().reference);
      env.reset(InitialOffset{});
      std::vector<double> ms;
      while (!env.done()) {
        const auto t0 = Clock::now();
        const ControlOutput ctl = actor.control_step(env.state(), env.time(), &critic);
        ms.push_back(1e3 * seconds_since(t0));
        if (ctl.abort) break;
        env.step(ctl.cmd);
      }
      std::nth_element(ms.begin(), ms.begin() + static_cast<long>(ms.size() / 2), ms.end());
      const double median = ms[ms.size() / 2];
      pass = pass && median < 10.0;
      detail << to_string(mode) << " median " << fmt(median, 3) << " ms over " << ms.size()
             << " steps; ";
    }
    detail << "(N=" << c.mpc.horizon << ", sqp_iters=" << c.mpc.sqp_iters << ", limit 10 ms)";
    report(8, pass, detail.str());
  }

  // 9: repeated seeded runs give identical bytes.
  {
    ExperimentConfig c = dense_cfg;
    c.schedule.max_updates = 1000;
    std::vector<std::string> differing;
    std::size_t compared = 0;
    std::vector<fs::path> dirs;
    for (const char* run : {"a", "b"}) {
      const fs::path dir = root / "determinism" / run;
      const RunReport tr = run_train_experiment(c, 1, dir);
      ExperimentConfig sw = sweep_base;
      sw.checkpoint = tr.trainings.front().checkpoint_path.string();
      run_mismatch_sweep(sw, 1, dir);
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
      if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
      const fs::path rel = fs::relative(entry.path(), dirs[0]);
      ++compared;
      if (read_file(entry.path()) != read_file(dirs[1] / rel)) differing.push_back(rel.string());
    }
    std::string detail = std::to_string(compared) + " CSV files compared, " +
                         std::to_string(differing.size()) + " differ";
    for (const auto& d : differing) detail += " " + d;
    report(9, compared > 0 && differing.empty(), detail);
  }

  int failed = 0;
  for (const auto& v : verdicts) failed += v.pass ? 0 : 1;
  std::cout << "acceptance: " << verdicts.size() - failed << "/" << verdicts.size() << " passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
