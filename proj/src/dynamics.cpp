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

#include "vlmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vlmpc {

namespace {

Vec5 derivative(const Vec5& s, const Action& u) {
  return {s(3) * std::cos(s(2)), s(3) * std::sin(s(2)), s(4), u.a, u.alpha};
}

Mat5 state_jacobian(const Vec5& s) {
  Mat5 fx = Mat5::Zero();
  const double c = std::cos(s(2));
  const double sn = std::sin(s(2));
  fx(0, 2) = -s(3) * sn;
  fx(0, 3) = c;
  fx(1, 2) = s(3) * c;
  fx(1, 3) = sn;
  fx(2, 4) = 1.0;
  return fx;
}

Mat52 action_jacobian() {
  Mat52 fu = Mat52::Zero();
  fu(3, 0) = 1.0;
  fu(4, 1) = 1.0;
  return fu;
}

}  // namespace

double wrap_angle(double angle) {
  constexpr double kPi = std::numbers::pi;
  double wrapped = std::remainder(angle, 2.0 * kPi);
  // remainder yields [-pi, pi]; move the lower endpoint to the upper one.
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

bool WorldState::is_finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(psi) && std::isfinite(v) &&
         std::isfinite(omega);
}

void PlantConfig::validate() const {
  if (!(tau_s > 0.0)) throw std::invalid_argument("plant tau_s must be > 0");
  if (!(dt_s > 0.0)) throw std::invalid_argument("plant dt_s must be > 0");
  if (!(limits.v_max > 0.0 && limits.omega_max > 0.0 && limits.a_max > 0.0 &&
        limits.alpha_max > 0.0)) {
    throw std::invalid_argument("plant actuator limits must be > 0");
  }
}

Vec5 unicycle_derivative(const WorldState& s, const Action& u) {
  return derivative(s.to_vector(), u);
}

WorldState integrate_nominal(const WorldState& s, const Action& u, double dt,
                             const ActuatorLimits& limits) {
  const Vec5 x = s.to_vector();
  const Vec5 k1 = derivative(x, u);
  const Vec5 k2 = derivative(x + 0.5 * dt * k1, u);
  const Vec5 k3 = derivative(x + 0.5 * dt * k2, u);
  const Vec5 k4 = derivative(x + dt * k3, u);
  const Vec5 next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  WorldState out = WorldState::from_vector(next);
  out.psi = wrap_angle(out.psi);
  out.v = std::clamp(out.v, -limits.v_max, limits.v_max);
  out.omega = std::clamp(out.omega, -limits.omega_max, limits.omega_max);
  return out;
}

DiscreteJacobians integrate_nominal_jacobians(const WorldState& s, const Action& u, double dt,
                                              const ActuatorLimits& limits) {
  const Vec5 x1 = s.to_vector();
  const Mat52 fu = action_jacobian();
  const Mat5 I = Mat5::Identity();

  const Vec5 k1 = derivative(x1, u);
  const Mat5 k1x = state_jacobian(x1);
  const Mat52 k1u = fu;

  const Vec5 x2 = x1 + 0.5 * dt * k1;
  const Mat5 x2x = I + 0.5 * dt * k1x;
  const Mat52 x2u = 0.5 * dt * k1u;
  const Vec5 k2 = derivative(x2, u);
  const Mat5 f2 = state_jacobian(x2);
  const Mat5 k2x = f2 * x2x;
  const Mat52 k2u = f2 * x2u + fu;

  const Vec5 x3 = x1 + 0.5 * dt * k2;
  const Mat5 x3x = I + 0.5 * dt * k2x;
  const Mat52 x3u = 0.5 * dt * k2u;
  const Vec5 k3 = derivative(x3, u);
  const Mat5 f3 = state_jacobian(x3);
  const Mat5 k3x = f3 * x3x;
  const Mat52 k3u = f3 * x3u + fu;

  const Vec5 x4 = x1 + dt * k3;
  const Mat5 x4x = I + dt * k3x;
  const Mat52 x4u = dt * k3u;
  const Vec5 k4 = derivative(x4, u);
  const Mat5 f4 = state_jacobian(x4);
  const Mat5 k4x = f4 * x4x;
  const Mat52 k4u = f4 * x4u + fu;

  DiscreteJacobians jac;
  jac.A = I + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  jac.B = dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);

  const Vec5 next = x1 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (std::abs(next(3)) > limits.v_max) {
    jac.A.row(3).setZero();
    jac.B.row(3).setZero();
  }
  if (std::abs(next(4)) > limits.omega_max) {
    jac.A.row(4).setZero();
    jac.B.row(4).setZero();
  }
  return jac;
}

WorldState plant_step(const WorldState& s, const VelocityCommand& cmd, const PlantConfig& cfg) {
  const ActuatorLimits& lim = cfg.limits;
  const double dt = cfg.dt_s;
  const double tau = cfg.tau_s;
  const double v_cmd = std::clamp(cmd.v, -lim.v_max, lim.v_max);
  const double omega_cmd = std::clamp(cmd.omega, -lim.omega_max, lim.omega_max);

  const double dv_max = lim.a_max * dt;
  const double v = s.v + std::clamp(v_cmd - s.v, -dv_max, dv_max);

  // omega(t) = omega_cmd + (omega0 - omega_cmd) exp(-t / tau)
  const double gap = s.omega - omega_cmd;
  auto heading_at = [&](double t) {
    return s.psi + omega_cmd * t + gap * tau * (-std::expm1(-t / tau));
  };

  // The pose right-hand side depends on time only, so RK4 reduces to
  // Simpson's rule on the heading profile.
  const double h0 = heading_at(0.0);
  const double hm = heading_at(0.5 * dt);
  const double h1 = heading_at(dt);
  WorldState out;
  out.x = s.x + dt / 6.0 * v * (std::cos(h0) + 4.0 * std::cos(hm) + std::cos(h1));
  out.y = s.y + dt / 6.0 * v * (std::sin(h0) + 4.0 * std::sin(hm) + std::sin(h1));
  out.psi = wrap_angle(h1);
  out.v = v;
  out.omega = omega_cmd + gap * std::exp(-dt / tau);
  return out;
}

WorldState mirror(const WorldState& s) {
  return {s.x, -s.y, wrap_angle(-s.psi), s.v, -s.omega};
}

}  // namespace vlmpc
