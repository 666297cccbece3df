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

#include "vlmpc/dynamics.hpp"

namespace vlmpc {

/// Reference pose at one instant.
struct RefPose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

/// Time derivative of the reference pose.
struct RefRate {
  double x_dot = 0.0;
  double y_dot = 0.0;
  double psi_dot = 0.0;
};

/// Tracking error of the control point, expressed in the reference frame,
/// plus the body velocities. This is the observation seen by the critic.
struct FrenetError {
  double x_err = 0.0;    // longitudinal, m
  double y_err = 0.0;    // lateral, m
  double psi_err = 0.0;  // rad, in (-pi, pi]
  double v = 0.0;
  double omega = 0.0;

  Vec5 to_vector() const { return {x_err, y_err, psi_err, v, omega}; }
  static FrenetError from_vector(const Vec5& e) { return {e(0), e(1), e(2), e(3), e(4)}; }
  bool operator==(const FrenetError&) const = default;
};

FrenetError to_frenet(const WorldState& s, const RefPose& ref, double l);

/// Inverse of to_frenet for a known reference pose.
WorldState from_frenet(const FrenetError& e, const RefPose& ref, double l);

/// d(to_frenet)/d(world state), 5x5, at fixed reference.
Mat5 frenet_state_jacobian(const WorldState& s, const RefPose& ref, double l);

/// Total time derivative of the Frenet error along the nominal dynamics with
/// a moving reference, together with its partials w.r.t. state and action.
struct FrenetRate {
  Vec5 rate;
  Mat5 d_state;
  Mat52 d_action;
};
FrenetRate frenet_rate(const WorldState& s, const Action& u, const RefPose& ref,
                       const RefRate& ref_rate, double l);

/// Lateral mirror across the reference path:
/// (x_err, y_err, psi_err, v, omega) -> (x_err, -y_err, -psi_err, v, -omega).
FrenetError mirror(const FrenetError& e);

}  // namespace vlmpc
