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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vlmpc/config.hpp"
#include "vlmpc/critic.hpp"
#include "vlmpc/env.hpp"
#include "vlmpc/mpc.hpp"

namespace vlmpc {

/// Environment for one track at a given plant time constant. A positive
/// duration overrides the track's natural length (laps are repeated on the
/// oval).
EnvConfig make_env_config(const EnvSettings& env, TrackKind track, double tau_s,
                          double duration_s = 0.0);

struct EpisodeSummary {
  std::string controller;
  std::string track;
  double tau_s = 0.0;
  std::uint64_t seed = 0;
  double cumulative_reward = 0.0;
  double final_progress = 0.0;
  double max_abs_y_err = 0.0;
  int steps = 0;
  bool aborted = false;        // left the abort radius
  bool fault_aborted = false;  // controller gave up
  int faults = 0;
  std::string file;            // episode CSV, relative to the run directory
};

struct EpisodeResult {
  std::vector<EpisodeRow> rows;
  EpisodeSummary summary;
};

/// Called after every control step with the pre-step observation, the
/// command applied and the step outcome.
using StepObserver =
    std::function<void(const FrenetError& obs, const VelocityCommand& cmd, const StepResult& r)>;

/// Closed-loop episode from the offset until done, abort, or a controller
/// fault-abort. The actor is reset first. Cumulative reward uses the
/// environment's reward.
EpisodeResult run_episode(Environment& env, MpcActor& actor, const ValueNetwork* critic,
                          const InitialOffset& offset, const StepObserver& observe = {});

/// One row per training episode.
struct TrainingCurveRow {
  long long iter = 0;         // critic updates so far
  double loss = 0.0;          // mean over the updates of this episode (0 if none)
  double avg_episode_reward = 0.0;  // evaluation episode, see TrainingSchedule
  std::size_t buffer_size = 0;
  double wall_clock_s = 0.0;  // simulated robot time so far
  int episode = 0;
  long long env_steps = 0;
  double train_avg_reward = 0.0;  // mean step reward of the training episode
  double cumulative_reward = 0.0; // of the training episode
  int faults = 0;
  bool aborted = false;
};

/// Columns: iter,loss,avg_episode_reward,buffer_size,wall_clock_s,episode,
/// env_steps,train_avg_reward,cumulative_reward,faults,aborted
void write_training_curve_csv(const std::filesystem::path& path,
                              const std::vector<TrainingCurveRow>& rows);

struct PlateauResult {
  bool converged = false;
  std::size_t index = 0;    // first entry from which the slope stays in the band
  double plateau = 0.0;     // EMA over the final window
  std::vector<double> ema;
};

/// Exponential moving average with the given span (alpha = 2 / (span + 1)).
/// The plateau is the mean EMA over the final `span` entries. The slope at j
/// is ema[j] - ema[j - span]. The series has converged at index i when the
/// slope stays within rel_tol * |plateau| from i to the end, and at least
/// `span` entries follow i.
PlateauResult detect_plateau(const std::vector<double>& values, std::size_t span = 50,
                             double rel_tol = 0.02);

struct TrainingResult {
  std::vector<TrainingCurveRow> curve;
  CriticCheckpoint checkpoint;
  std::filesystem::path checkpoint_path;
  std::filesystem::path curve_path;
  long long updates = 0;
  long long env_steps = 0;
  std::size_t buffer_size = 0;
  int checkpoints_written = 0;
  bool diverged = false;
  std::string divergence_message;
  /// Update count at the plateau, if the curve converged.
  std::optional<long long> plateau_updates;
};

/// Stopping rule used in addition to cfg.schedule.max_updates.
struct TrainingLimits {
  long long max_env_steps = 0;  // 0 = unlimited
};

/// Roll-out under the value-terminal MPC with the current critic,
/// interleaved with one critic update every update_interval environment
/// steps once the buffer holds a batch. Transitions and their mirror images
/// are stored. Training starts at rest with a uniformly random lateral and
/// heading offset per episode, on cfg.schedule.track with the cfg.env plant.
/// Files go to `dir` with the given stem.
TrainingResult run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                            const std::filesystem::path& dir, const std::string& stem,
                            TrainingLimits limits = {});

/// "<controller>_<track>_tau<tau>_seed<k>.csv"
std::string run_file_name(const std::string& controller, TrackKind track, double tau_s,
                          std::uint64_t seed);

struct RunReport {
  std::filesystem::path dir;
  std::vector<EpisodeSummary> episodes;
  std::vector<TrainingResult> trainings;
  std::vector<std::string> files;  // relative to dir
};

/// Evaluates every controller at every tau_list entry on the curve track,
/// starting on the reference at rest. The critic comes from cfg.checkpoint or
/// is trained at the configured plant first (dense reward).
RunReport run_mismatch_sweep(const ExperimentConfig& cfg, std::uint64_t seed,
                             const std::filesystem::path& out_root);

/// Every controller on every track with the dense critic, plus DMPC with the
/// sparse critic (labelled "dmpc-sparse"). The straight track starts at the
/// configured lateral offset; others start on the reference. Critics are
/// loaded from the config or trained first.
RunReport run_benchmark(const ExperimentConfig& cfg, std::uint64_t seed,
                        const std::filesystem::path& out_root);

/// Training experiment with the configured reward.
RunReport run_train_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::filesystem::path& out_root);

/// Appends `more` (same directory) to `into`.
void merge_reports(RunReport& into, RunReport more);

/// Writes run.json atomically: config snapshot, seeds, version, episode
/// summaries, produced files and elapsed time.
void write_manifest(const RunReport& report, const ExperimentConfig& cfg,
                    const std::vector<std::uint64_t>& seeds, double elapsed_s);

/// Derived RNG seed for one concern, independent of the others.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

extern const char* const kVersion;

}  // namespace vlmpc
