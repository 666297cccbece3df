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

#include "vlmpc/env.hpp"

#include <cmath>
#include <stdexcept>

#include "vlmpc/csv.hpp"

namespace vlmpc {

int EnvConfig::resolved_max_steps() const {
  if (max_steps > 0) return max_steps;
  return static_cast<int>(std::lround(reference.duration() / control_period_s()));
}

void EnvConfig::validate() const {
  plant.validate();
  reward.validate();
  if (reference.empty()) throw std::invalid_argument("environment needs a reference");
  if (!(l_m >= 0.0)) throw std::invalid_argument("control-point offset l must be >= 0");
  if (!(abort_error_m > 0.0)) throw std::invalid_argument("abort_error_m must be > 0");
  if (control_substeps < 1) throw std::invalid_argument("control_substeps must be >= 1");
  if (resolved_max_steps() < 1) throw std::invalid_argument("max_steps must be > 0");
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  max_steps_ = cfg_.resolved_max_steps();
  reset();
}

FrenetError Environment::reset(const InitialOffset& o) {
  const FrenetError e{o.x_err_m, o.y_err_m, o.psi_err_rad, o.v, o.omega};
  return reset(from_frenet(e, cfg_.reference.at(o.start_time_s), cfg_.l_m), o.start_time_s);
}

FrenetError Environment::reset(const WorldState& state, double start_time_s) {
  if (!(start_time_s >= 0.0)) throw std::invalid_argument("start time must be >= 0");
  state_ = state;
  state_.psi = wrap_angle(state_.psi);
  start_time_ = start_time_s;
  time_ = start_time_s;
  steps_ = 0;
  done_ = false;
  return observation();
}

FrenetError Environment::observation() const {
  return to_frenet(state_, cfg_.reference.at(time_), cfg_.l_m);
}

StepResult Environment::step(const VelocityCommand& cmd) {
  if (done_) throw std::logic_error("Environment::step called on a finished episode");
  for (int i = 0; i < cfg_.control_substeps; ++i) state_ = plant_step(state_, cmd, cfg_.plant);
  ++steps_;
  time_ = start_time_ + steps_ * cfg_.control_period_s();

  StepResult r;
  r.obs = observation();
  r.reward = reward(r.obs, cfg_.reward);
  const double cx = state_.x + cfg_.l_m * std::cos(state_.psi);
  const double cy = state_.y + cfg_.l_m * std::sin(state_.psi);
  r.progress = cfg_.reference.project(cx, cy);
  r.aborted = std::abs(r.obs.x_err) > cfg_.abort_error_m ||
              std::abs(r.obs.y_err) > cfg_.abort_error_m || !state_.is_finite();
  r.done = r.aborted || steps_ >= max_steps_;
  done_ = r.done;
  return r;
}

void write_episode_csv(const std::filesystem::path& path, const std::vector<EpisodeRow>& rows) {
  CsvWriter csv(path, {"t", "x", "y", "psi", "v", "omega", "x_err", "y_err", "psi_err", "reward",
                       "progress", "v_cmd", "omega_cmd"});
  for (const EpisodeRow& r : rows) {
    csv.field(r.t).field(r.state.x).field(r.state.y).field(r.state.psi).field(r.state.v);
    csv.field(r.state.omega).field(r.error.x_err).field(r.error.y_err).field(r.error.psi_err);
    csv.field(r.reward).field(r.progress).field(r.cmd.v).field(r.cmd.omega);
    csv.end_row();
  }
}

}  // namespace vlmpc
