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

#include <Eigen/Dense>

namespace vlmpc {

using Vec2 = Eigen::Vector2d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat52 = Eigen::Matrix<double, 5, 2>;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

/// Robot pose and body velocities; the planning state of the nominal model.
struct WorldState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double psi = 0.0;    // rad, kept in (-pi, pi]
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s

  Vec5 to_vector() const { return {x, y, psi, v, omega}; }
  static WorldState from_vector(const Vec5& s) { return {s(0), s(1), s(2), s(3), s(4)}; }
  bool is_finite() const;
};

/// Body-frame accelerations; the decision variables of the planner.
struct Action {
  double a = 0.0;      // m/s^2
  double alpha = 0.0;  // rad/s^2
};

/// Velocity set-points sent to the plant.
struct VelocityCommand {
  double v = 0.0;
  double omega = 0.0;
};

struct ActuatorLimits {
  double v_max = 1.0;        // m/s
  double omega_max = 1.5;    // rad/s
  double a_max = 2.0;        // m/s^2
  double alpha_max = 3.0;    // rad/s^2
};

struct PlantConfig {
  double tau_s = 0.6;  // turning time constant
  ActuatorLimits limits;
  double dt_s = 0.05;  // simulation step

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Continuous-time unicycle model [v cos psi, v sin psi, omega, a, alpha].
Vec5 unicycle_derivative(const WorldState& s, const Action& u);

/// One RK4 step of the unicycle model. The heading is re-wrapped and the
/// velocities are clamped to the limits after the step.
WorldState integrate_nominal(const WorldState& s, const Action& u, double dt,
                             const ActuatorLimits& limits = {});

/// Exact Jacobians of integrate_nominal with respect to state and action.
/// Clamped velocity components have zero sensitivity.
struct DiscreteJacobians {
  Mat5 A;
  Mat52 B;
};
DiscreteJacobians integrate_nominal_jacobians(const WorldState& s, const Action& u, double dt,
                                              const ActuatorLimits& limits = {});

/// Instantaneous angular acceleration of the first-order turning lag.
inline double turning_lag_rate(double omega, double omega_cmd, double tau) {
  return (omega_cmd - omega) / tau;
}

/// Advances the "true" plant by cfg.dt_s. Linear velocity jumps to the
/// command (rate-limited by a_max * dt); angular velocity follows the
/// first-order lag, integrated exactly; the pose is integrated with RK4 using
/// the resulting velocity profiles.
WorldState plant_step(const WorldState& s, const VelocityCommand& cmd, const PlantConfig& cfg);

/// Mirror about the world x-axis; maps trajectories of the unicycle onto
/// trajectories when the angular input is negated.
WorldState mirror(const WorldState& s);
inline Action mirror(const Action& u) { return {u.a, -u.alpha}; }
inline VelocityCommand mirror(const VelocityCommand& c) { return {c.v, -c.omega}; }

}  // namespace vlmpc
