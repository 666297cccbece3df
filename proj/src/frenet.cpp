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

#include "vlmpc/frenet.hpp"

#include <cmath>

namespace vlmpc {

FrenetError to_frenet(const WorldState& s, const RefPose& ref, double l) {
  const double ex = s.x + l * std::cos(s.psi) - ref.x;
  const double ey = s.y + l * std::sin(s.psi) - ref.y;
  const double c = std::cos(ref.psi);
  const double sn = std::sin(ref.psi);
  return {ex * c + ey * sn, -ex * sn + ey * c, wrap_angle(s.psi - ref.psi), s.v, s.omega};
}

WorldState from_frenet(const FrenetError& e, const RefPose& ref, double l) {
  const double c = std::cos(ref.psi);
  const double sn = std::sin(ref.psi);
  const double psi = wrap_angle(ref.psi + e.psi_err);
  const double ex = e.x_err * c - e.y_err * sn;
  const double ey = e.x_err * sn + e.y_err * c;
  return {ref.x + ex - l * std::cos(psi), ref.y + ey - l * std::sin(psi), psi, e.v, e.omega};
}

Mat5 frenet_state_jacobian(const WorldState& s, const RefPose& ref, double l) {
  const double cr = std::cos(ref.psi);
  const double sr = std::sin(ref.psi);
  const double dpsi = s.psi - ref.psi;
  Mat5 J = Mat5::Zero();
  J(0, 0) = cr;
  J(0, 1) = sr;
  J(0, 2) = -l * std::sin(dpsi);
  J(1, 0) = -sr;
  J(1, 1) = cr;
  J(1, 2) = l * std::cos(dpsi);
  J(2, 2) = 1.0;
  J(3, 3) = 1.0;
  J(4, 4) = 1.0;
  return J;
}

FrenetRate frenet_rate(const WorldState& s, const Action& u, const RefPose& ref,
                       const RefRate& ref_rate, double l) {
  const double cr = std::cos(ref.psi);
  const double sr = std::sin(ref.psi);
  const double cp = std::cos(s.psi);
  const double sp = std::sin(s.psi);
  const double wr = ref_rate.psi_dot;
  const FrenetError e = to_frenet(s, ref, l);

  // Map-frame error rates of the control point.
  const double dx_dot = s.v * cp - l * sp * s.omega - ref_rate.x_dot;
  const double dy_dot = s.v * sp + l * cp * s.omega - ref_rate.y_dot;
  const double dx_dot_psi = -s.v * sp - l * cp * s.omega;
  const double dy_dot_psi = s.v * cp - l * sp * s.omega;

  const Mat5 E = frenet_state_jacobian(s, ref, l);

  FrenetRate out;
  out.rate << dx_dot * cr + dy_dot * sr + wr * e.y_err,
      -dx_dot * sr + dy_dot * cr - wr * e.x_err, s.omega - wr, u.a, u.alpha;

  Mat5& D = out.d_state;
  D.setZero();
  D(0, 0) = wr * E(1, 0);
  D(0, 1) = wr * E(1, 1);
  D(0, 2) = dx_dot_psi * cr + dy_dot_psi * sr + wr * E(1, 2);
  D(0, 3) = cp * cr + sp * sr;
  D(0, 4) = -l * sp * cr + l * cp * sr;
  D(1, 0) = -wr * E(0, 0);
  D(1, 1) = -wr * E(0, 1);
  D(1, 2) = -dx_dot_psi * sr + dy_dot_psi * cr - wr * E(0, 2);
  D(1, 3) = -cp * sr + sp * cr;
  D(1, 4) = l * sp * sr + l * cp * cr;
  D(2, 4) = 1.0;

  out.d_action.setZero();
  out.d_action(3, 0) = 1.0;
  out.d_action(4, 1) = 1.0;
  return out;
}

FrenetError mirror(const FrenetError& e) {
  return {e.x_err, -e.y_err, wrap_angle(-e.psi_err), e.v, -e.omega};
}

}  // namespace vlmpc
