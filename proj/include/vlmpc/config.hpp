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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlmpc/dynamics.hpp"
#include "vlmpc/mpc.hpp"
#include "vlmpc/reference.hpp"
#include "vlmpc/replay.hpp"
#include "vlmpc/rewards.hpp"

namespace vlmpc {

/// Malformed or invalid configuration. The message names the source, the
/// offending field path and, where it can be located, the line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { train, mismatch_sweep, benchmark };
ExperimentKind parse_experiment_kind(std::string_view name);
std::string to_string(ExperimentKind kind);

/// Plant and task settings. plant.tau_s is the training (and benchmark)
/// plant; the mismatch sweep overrides it with each entry of tau_list.
struct EnvSettings {
  PlantConfig plant;
  TrackParams track;
  double l_m = 0.2;
  double abort_error_m = 2.0;
  int control_substeps = 2;
  RewardConfig reward;
};

/// Roll-out/training schedule of the learning loop.
struct TrainingSchedule {
  long long max_updates = 20000;
  TrackKind track = TrackKind::oval;
  double episode_duration_s = 60.0;
  double init_lateral_m = 0.2;   // half-width of the uniform initial lateral offset
  double init_heading_rad = 0.1; // half-width of the uniform initial heading offset
  double init_longitudinal_m = 0.2;  // half-width of the uniform initial longitudinal offset
  double init_speed_mps = 0.6;   // initial speed drawn uniformly from [0, init_speed_mps]
  /// Start each episode at a uniformly random time along the reference
  /// (the oval reference is then built for twice the episode duration).
  bool random_start = true;
  /// After each training episode the current critic also drives one
  /// evaluation episode from rest on the reference at time 0 (nothing is
  /// stored or learned). Its mean step reward is the curve's
  /// avg_episode_reward; otherwise the training episode's value is used.
  bool evaluation_episode = true;
  std::size_t buffer_capacity = 200000;
  std::vector<int> hidden{32, 32};
  int checkpoint_interval_episodes = 10;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::train;
  EnvSettings env;
  TrainConfig train;
  TrainingSchedule schedule;
  MpcConfig mpc;
  std::vector<double> tau_list{0.2, 0.6, 0.8};
  std::vector<TrackKind> tracks{TrackKind::straight, TrackKind::curve, TrackKind::tight_turn};
  std::vector<CostMode> controllers{CostMode::naive, CostMode::expert, CostMode::tdmpc,
                                    CostMode::dmpc};
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "out";
  /// Checkpoints for evaluation; "{seed}" is replaced by the seed. Empty means
  /// the critic is trained first as part of the run.
  std::string checkpoint;
  std::string sparse_checkpoint;
  double straight_offset_m = 0.5;

  /// Throws ConfigError with the field path of the first violated invariant.
  void validate() const;
};

/// Parses JSON text. `source` names the input in diagnostics.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
/// Throws ConfigError when the file cannot be read or parsed.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Full snapshot with every field, in the same layout parse_config accepts.
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace vlmpc
