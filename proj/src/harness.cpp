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

#include "vlmpc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vlmpc/csv.hpp"
#include "vlmpc/replay.hpp"
#include "vlmpc/trainer.hpp"

namespace vlmpc {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kVersion = "0.1.0";

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 gen(seq);
  return gen();
}

EnvConfig make_env_config(const EnvSettings& env, TrackKind track, double tau_s,
                          double duration_s) {
  EnvConfig cfg;
  cfg.plant = env.plant;
  cfg.plant.tau_s = tau_s;
  TrackParams tp = env.track;
  tp.dt_s = env.plant.dt_s;
  tp.duration_s = track == TrackKind::oval ? duration_s : 0.0;
  cfg.reference = make_track(track, tp);
  cfg.l_m = env.l_m;
  cfg.reward = env.reward;
  cfg.abort_error_m = env.abort_error_m;
  cfg.control_substeps = env.control_substeps;
  if (duration_s > 0.0) {
    cfg.max_steps = static_cast<int>(std::lround(duration_s / cfg.control_period_s()));
  }
  return cfg;
}

EpisodeResult run_episode(Environment& env, MpcActor& actor, const ValueNetwork* critic,
                          const InitialOffset& offset, const StepObserver& observe) {
  EpisodeResult result;
  actor.reset();
  FrenetError obs = env.reset(offset);
  EpisodeSummary& s = result.summary;
  s.controller = to_string(actor.config().mode);
  while (!env.done()) {
    const ControlOutput ctl = actor.control_step(env.state(), env.time(), critic);
    if (ctl.abort) {
      s.fault_aborted = true;
      break;
    }
    const StepResult r = env.step(ctl.cmd);
    if (observe) observe(obs, ctl.cmd, r);
    result.rows.push_back({env.time(), env.state(), r.obs, r.reward, r.progress, ctl.cmd});
    s.cumulative_reward += r.reward;
    s.final_progress = r.progress;
    s.max_abs_y_err = std::max(s.max_abs_y_err, std::abs(r.obs.y_err));
    s.aborted = r.aborted;
    obs = r.obs;
  }
  s.steps = static_cast<int>(result.rows.size());
  s.faults = actor.fault_count();
  return result;
}

void write_training_curve_csv(const fs::path& path, const std::vector<TrainingCurveRow>& rows) {
  CsvWriter csv(path, {"iter", "loss", "avg_episode_reward", "buffer_size", "wall_clock_s",
                       "episode", "env_steps", "train_avg_reward", "cumulative_reward", "faults",
                       "aborted"});
  for (const auto& r : rows) {
    csv.field(r.iter).field(r.loss).field(r.avg_episode_reward);
    csv.field(static_cast<long long>(r.buffer_size)).field(r.wall_clock_s);
    csv.field(r.episode).field(r.env_steps).field(r.train_avg_reward).field(r.cumulative_reward);
    csv.field(r.faults).field(r.aborted ? 1 : 0);
    csv.end_row();
  }
}

PlateauResult detect_plateau(const std::vector<double>& values, std::size_t span, double rel_tol) {
  PlateauResult res;
  if (values.empty() || span == 0) return res;
  const double alpha = 2.0 / (static_cast<double>(span) + 1.0);
  res.ema.resize(values.size());
  double e = values.front();
  for (std::size_t i = 0; i < values.size(); ++i) {
    e = i == 0 ? values[0] : alpha * values[i] + (1.0 - alpha) * e;
    res.ema[i] = e;
  }
  if (values.size() < span + 1) return res;
  double sum = 0.0;
  for (std::size_t i = values.size() - span; i < values.size(); ++i) sum += res.ema[i];
  res.plateau = sum / static_cast<double>(span);
  const double band = rel_tol * std::abs(res.plateau);
  std::size_t first = values.size();
  while (first > span && std::abs(res.ema[first - 1] - res.ema[first - 1 - span]) <= band) --first;
  if (first + span <= values.size()) {
    res.converged = true;
    res.index = first;
  }
  return res;
}

namespace {

void atomic_write(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string replace_seed(std::string pattern, std::uint64_t seed) {
  const std::string key = "{seed}";
  for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key)) {
    pattern.replace(pos, key.size(), std::to_string(seed));
  }
  return pattern;
}

std::string tau_label(double tau_s) { return format_double(tau_s); }

json summary_json(const EpisodeSummary& s) {
  return {{"controller", s.controller},   {"track", s.track},
          {"tau_s", s.tau_s},             {"seed", s.seed},
          {"cumulative_reward", s.cumulative_reward},
          {"final_progress", s.final_progress},
          {"max_abs_y_err", s.max_abs_y_err},
          {"steps", s.steps},             {"aborted", s.aborted},
          {"fault_aborted", s.fault_aborted},
          {"faults", s.faults},           {"file", s.file}};
}

void write_summary_csv(const fs::path& path, const std::vector<EpisodeSummary>& episodes) {
  CsvWriter csv(path, {"controller", "track", "tau_s", "seed", "cumulative_reward",
                       "final_progress", "max_abs_y_err", "steps", "aborted", "fault_aborted",
                       "faults"});
  for (const auto& s : episodes) {
    csv.field(s.controller).field(s.track).field(s.tau_s).field(static_cast<long long>(s.seed));
    csv.field(s.cumulative_reward).field(s.final_progress).field(s.max_abs_y_err).field(s.steps);
    csv.field(s.aborted ? 1 : 0).field(s.fault_aborted ? 1 : 0).field(s.faults);
    csv.end_row();
  }
}

/// Trains (or loads) the critic for one reward mode.
ValueNetwork obtain_critic(const ExperimentConfig& cfg, RewardMode mode,
                           const std::string& checkpoint_pattern, std::uint64_t seed,
                           RunReport& report) {
  if (!checkpoint_pattern.empty()) {
    return load_checkpoint(replace_seed(checkpoint_pattern, seed)).critic;
  }
  ExperimentConfig tc = cfg;
  tc.env.reward.mode = mode;
  const std::string stem = "tdmpc-" + to_string(mode);
  TrainingResult tr = run_training(tc, seed, report.dir, stem);
  report.files.push_back(tr.curve_path.filename().string());
  report.files.push_back(tr.checkpoint_path.filename().string());
  ValueNetwork critic = tr.checkpoint.critic;
  report.trainings.push_back(std::move(tr));
  return critic;
}

EpisodeSummary evaluate(const ExperimentConfig& cfg, const std::string& label, CostMode mode,
                        TrackKind track, double tau_s, std::uint64_t seed,
                        const ValueNetwork* critic, const InitialOffset& offset, RunReport& report) {
  EnvConfig ec = make_env_config(cfg.env, track, tau_s);
  ec.reward.mode = RewardMode::dense;
  Environment env(ec);
  MpcConfig mc = cfg.mpc;
  mc.mode = mode;
  MpcActor actor(mc, env.config().reference);
  EpisodeResult res =
      run_episode(env, actor, uses_critic(mode) ? critic : nullptr, offset);
  const std::string name = run_file_name(label, track, tau_s, seed);
  write_episode_csv(report.dir / name, res.rows);
  report.files.push_back(name);
  EpisodeSummary s = res.summary;
  s.controller = label;
  s.track = to_string(track);
  s.tau_s = tau_s;
  s.seed = seed;
  s.file = name;
  report.episodes.push_back(s);
  return s;
}

}  // namespace

namespace {

double mean_step_reward(const EpisodeSummary& s) {
  return s.steps > 0 ? s.cumulative_reward / s.steps : 0.0;
}

}  // namespace

std::string run_file_name(const std::string& controller, TrackKind track, double tau_s,
                          std::uint64_t seed) {
  return controller + "_" + to_string(track) + "_tau" + tau_label(tau_s) + "_seed" +
         std::to_string(seed) + ".csv";
}

TrainingResult run_training(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir,
                            const std::string& stem, TrainingLimits limits) {
  fs::create_directories(dir);
  TrainingResult result;
  const double tau = cfg.env.plant.tau_s;
  const TrackKind track = cfg.schedule.track;
  result.curve_path = dir / run_file_name(stem, track, tau, seed);
  result.checkpoint_path =
      dir / ("critic-" + to_string(cfg.env.reward.mode) + "_seed" + std::to_string(seed) + ".json");

  const double duration = cfg.schedule.episode_duration_s;
  EnvConfig ec = make_env_config(cfg.env, track, tau, cfg.schedule.random_start ? 2.0 * duration : duration);
  ec.max_steps = static_cast<int>(std::lround(duration / ec.control_period_s()));
  const double latest_start =
      cfg.schedule.random_start ? std::max(0.0, ec.reference.duration() - duration) : 0.0;
  Environment env(ec);
  MpcConfig mc = cfg.mpc;
  mc.mode = CostMode::tdmpc;
  MpcActor actor(mc, env.config().reference);
  Environment eval_env(make_env_config(cfg.env, track, tau, duration));
  MpcActor eval_actor(mc, eval_env.config().reference);

  std::mt19937_64 init_rng(derive_seed(seed, "env_init"));
  std::mt19937_64 weight_rng(derive_seed(seed, "weight_init"));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, "buffer_sampling");
  const Vec5 scale = default_input_scale(cfg.env.plant.limits.v_max, cfg.env.plant.limits.omega_max);
  CriticTrainer trainer(ValueNetwork::initialized(cfg.schedule.hidden, scale, weight_rng), tc);
  ReplayBuffer buffer(cfg.schedule.buffer_capacity);

  auto metadata = [&](bool final_ckpt) {
    return std::map<std::string, std::string>{
        {"reward", to_string(cfg.env.reward.mode)},
        {"tau_s", format_double(tau)},
        {"track", to_string(track)},
        {"seed", std::to_string(seed)},
        {"updates", std::to_string(trainer.updates())},
        {"env_steps", std::to_string(result.env_steps)},
        {"final", final_ckpt ? "true" : "false"},
        {"diverged", result.diverged ? "true" : "false"},
        {"version", kVersion}};
  };
  auto checkpoint = [&](bool final_ckpt) {
    result.checkpoint = {trainer.critic(), trainer.target(), metadata(final_ckpt)};
    save_checkpoint(result.checkpoint_path, result.checkpoint);
    ++result.checkpoints_written;
  };

  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto z = static_cast<long long>(tc.update_interval);
  const auto batch = static_cast<std::size_t>(tc.batch_size);
  bool stop = false;
  int episode = 0;
  while (!stop) {
    InitialOffset offset;
    offset.y_err_m = cfg.schedule.init_lateral_m * unit(init_rng);
    offset.psi_err_rad = cfg.schedule.init_heading_rad * unit(init_rng);
    offset.x_err_m = cfg.schedule.init_longitudinal_m * unit(init_rng);
    offset.v = 0.5 * cfg.schedule.init_speed_mps * (1.0 + unit(init_rng));
    offset.start_time_s = 0.5 * latest_start * (1.0 + unit(init_rng));
    const auto id = buffer.open_episode();
    const auto twin = buffer.open_episode();
    double loss_sum = 0.0;
    int loss_count = 0;

    auto observe = [&](const FrenetError& obs, const VelocityCommand& cmd, const StepResult& r) {
      const Transition t{obs, cmd, r.reward, r.obs, r.done};
      buffer.push(id, t);
      buffer.push(twin, mirror(t));
      ++result.env_steps;
      if (result.env_steps % z == 0 && buffer.size() >= batch &&
          trainer.updates() < cfg.schedule.max_updates) {
        loss_sum += trainer.train_step(buffer);
        ++loss_count;
      }
    };

    EpisodeResult ep;
    bool partial = false;
    try {
      // The critic reference is re-read on every step, so the policy always
      // uses the latest update.
      ep = run_episode(env, actor, &trainer.critic(), offset, observe);
    } catch (const TrainingDiverged& e) {
      result.diverged = true;
      result.divergence_message = e.what();
      partial = true;
    }
    buffer.close_episode(id);
    buffer.close_episode(twin);
    if (partial) break;

    ++episode;
    TrainingCurveRow row;
    row.episode = episode;
    row.iter = trainer.updates();
    row.env_steps = result.env_steps;
    row.wall_clock_s = static_cast<double>(result.env_steps) * ec.control_period_s();
    row.cumulative_reward = ep.summary.cumulative_reward;
    row.train_avg_reward = mean_step_reward(ep.summary);
    row.avg_episode_reward = row.train_avg_reward;
    if (cfg.schedule.evaluation_episode) {
      row.avg_episode_reward =
          mean_step_reward(run_episode(eval_env, eval_actor, &trainer.critic(), {}).summary);
    }
    row.loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    row.buffer_size = buffer.size();
    row.faults = ep.summary.faults;
    row.aborted = ep.summary.aborted || ep.summary.fault_aborted;
    result.curve.push_back(row);

    stop = trainer.updates() >= cfg.schedule.max_updates ||
           (limits.max_env_steps > 0 && result.env_steps >= limits.max_env_steps);
    if (!stop && episode % cfg.schedule.checkpoint_interval_episodes == 0) checkpoint(false);
  }
  // A divergence leaves the last good parameters in the trainer: the failed
  // update was rejected before it was applied.
  checkpoint(true);
  write_training_curve_csv(result.curve_path, result.curve);

  result.updates = trainer.updates();
  result.buffer_size = buffer.size();
  std::vector<double> avg;
  for (const auto& r : result.curve) avg.push_back(r.avg_episode_reward);
  const PlateauResult p = detect_plateau(avg);
  if (p.converged) result.plateau_updates = result.curve[p.index].iter;
  return result;
}

RunReport run_train_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                               const fs::path& out_root) {
  RunReport report;
  report.dir = out_root / "train";
  fs::create_directories(report.dir);
  const std::string stem = "tdmpc-" + to_string(cfg.env.reward.mode);
  TrainingResult tr = run_training(cfg, seed, report.dir, stem);
  report.files.push_back(tr.curve_path.filename().string());
  report.files.push_back(tr.checkpoint_path.filename().string());
  report.trainings.push_back(std::move(tr));
  return report;
}

RunReport run_mismatch_sweep(const ExperimentConfig& cfg, std::uint64_t seed,
                             const fs::path& out_root) {
  RunReport report;
  report.dir = out_root / "mismatch_sweep";
  fs::create_directories(report.dir);
  const bool need_critic = std::any_of(cfg.controllers.begin(), cfg.controllers.end(), uses_critic);
  ValueNetwork critic;
  if (need_critic) critic = obtain_critic(cfg, RewardMode::dense, cfg.checkpoint, seed, report);
  for (double tau : cfg.tau_list) {
    for (CostMode mode : cfg.controllers) {
      evaluate(cfg, to_string(mode), mode, TrackKind::curve, tau, seed, &critic, {}, report);
    }
  }
  write_summary_csv(report.dir / ("summary_seed" + std::to_string(seed) + ".csv"), report.episodes);
  report.files.push_back("summary_seed" + std::to_string(seed) + ".csv");
  return report;
}

RunReport run_benchmark(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out_root) {
  RunReport report;
  report.dir = out_root / "benchmark";
  fs::create_directories(report.dir);
  const ValueNetwork dense = obtain_critic(cfg, RewardMode::dense, cfg.checkpoint, seed, report);
  const ValueNetwork sparse =
      obtain_critic(cfg, RewardMode::sparse, cfg.sparse_checkpoint, seed, report);
  const double tau = cfg.env.plant.tau_s;
  for (TrackKind track : cfg.tracks) {
    InitialOffset offset;
    if (track == TrackKind::straight) offset.y_err_m = cfg.straight_offset_m;
    for (CostMode mode : cfg.controllers) {
      evaluate(cfg, to_string(mode), mode, track, tau, seed, &dense, offset, report);
    }
    evaluate(cfg, "dmpc-sparse", CostMode::dmpc, track, tau, seed, &sparse, offset, report);
  }
  write_summary_csv(report.dir / ("summary_seed" + std::to_string(seed) + ".csv"), report.episodes);
  report.files.push_back("summary_seed" + std::to_string(seed) + ".csv");
  return report;
}

void merge_reports(RunReport& into, RunReport more) {
  if (into.dir.empty()) into.dir = more.dir;
  for (auto& e : more.episodes) into.episodes.push_back(std::move(e));
  for (auto& t : more.trainings) into.trainings.push_back(std::move(t));
  for (auto& f : more.files) into.files.push_back(std::move(f));
}

void write_manifest(const RunReport& report, const ExperimentConfig& cfg,
                    const std::vector<std::uint64_t>& seeds, double elapsed_s) {
  json episodes = json::array();
  for (const auto& s : report.episodes) episodes.push_back(summary_json(s));
  json trainings = json::array();
  for (const auto& t : report.trainings) {
    trainings.push_back({{"curve", t.curve_path.filename().string()},
                         {"checkpoint", t.checkpoint_path.filename().string()},
                         {"updates", t.updates},
                         {"env_steps", t.env_steps},
                         {"episodes", t.curve.size()},
                         {"buffer_size", t.buffer_size},
                         {"diverged", t.diverged},
                         {"divergence_message", t.divergence_message},
                         {"plateau_updates", t.plateau_updates ? json(*t.plateau_updates) : json()}});
  }
  const json manifest = {{"config", to_json(cfg)},
                         {"seeds", seeds},
                         {"version", kVersion},
                         {"episodes", episodes},
                         {"trainings", trainings},
                         {"files", report.files},
                         {"elapsed_s", elapsed_s}};
  atomic_write(report.dir / "run.json", manifest.dump(2) + "\n");
}

}  // namespace vlmpc
