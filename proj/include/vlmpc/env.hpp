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

#include <filesystem>
#include <vector>

#include "vlmpc/dynamics.hpp"
#include "vlmpc/frenet.hpp"
#include "vlmpc/reference.hpp"
#include "vlmpc/rewards.hpp"

namespace vlmpc {

struct EnvConfig {
  PlantConfig plant;
  Reference reference;
  double l_m = 0.2;  // control-point offset
  RewardConfig reward;
  int max_steps = 0;  // control steps; 0 derives it from the reference duration
  double abort_error_m = 2.0;
  int control_substeps = 2;  // plant steps per control step

  double control_period_s() const { return plant.dt_s * control_substeps; }
  int resolved_max_steps() const;
  void validate() const;
};

/// Initial condition relative to the reference at start_time_s.
struct InitialOffset {
  double x_err_m = 0.0;
  double y_err_m = 0.0;
  double psi_err_rad = 0.0;
  double v = 0.0;
  double omega = 0.0;
  double start_time_s = 0.0;  // episode clock at reset
};

struct StepResult {
  FrenetError obs;
  double reward = 0.0;
  bool done = false;
  bool aborted = false;
  double progress = 0.0;  // arc length of the projected control point
};

/// One row of the episode log; one per control step.
struct EpisodeRow {
  double t = 0.0;
  WorldState state;
  FrenetError error;
  double reward = 0.0;
  double progress = 0.0;
  VelocityCommand cmd;
};

/// The tracking MDP: plant + reference + reward, stepped at the control rate.
/// Single-threaded; independent instances share nothing.
class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  FrenetError reset(const InitialOffset& offset = {});
  FrenetError reset(const WorldState& state, double start_time_s = 0.0);

  /// Applies the command for one control period. Throws std::logic_error if
  /// the episode is already done.
  StepResult step(const VelocityCommand& cmd);

  const WorldState& state() const { return state_; }
  double time() const { return time_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  FrenetError observation() const;
  const EnvConfig& config() const { return cfg_; }

 private:
  EnvConfig cfg_;
  int max_steps_;
  WorldState state_;
  double time_ = 0.0;
  double start_time_ = 0.0;
  int steps_ = 0;
  bool done_ = false;
};

/// Episode log with the column layout
/// t,x,y,psi,v,omega,x_err,y_err,psi_err,reward,progress,v_cmd,omega_cmd
void write_episode_csv(const std::filesystem::path& path, const std::vector<EpisodeRow>& rows);

}  // namespace vlmpc
