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

#include <string>
#include <string_view>
#include <vector>

#include "vlmpc/frenet.hpp"

namespace vlmpc {

struct RefSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

/// Time-parameterized reference trajectory, treated as a piecewise-linear
/// polyline in space.
class Reference {
 public:
  Reference() = default;
  /// Throws std::invalid_argument on empty input or non-increasing time.
  explicit Reference(std::vector<RefSample> samples);

  RefPose at(double t) const;
  /// Velocity of the interpolated reference; zero past the final sample.
  RefRate rate_at(double t) const;
  /// Arc length of the closest polyline point; ties go to larger progress.
  double project(double px, double py) const;

  const std::vector<RefSample>& samples() const { return samples_; }
  const std::vector<double>& arc_length() const { return arc_; }
  double duration() const { return samples_.empty() ? 0.0 : samples_.back().t - samples_.front().t; }
  double length() const { return arc_.empty() ? 0.0 : arc_.back(); }
  bool empty() const { return samples_.empty(); }

 private:
  std::size_t segment_index(double t) const;

  std::vector<RefSample> samples_;
  std::vector<double> arc_;
};

inline RefPose reference_at(const Reference& ref, double t) { return ref.at(t); }
inline double project_to_reference(const Reference& ref, double px, double py) {
  return ref.project(px, py);
}

enum class TrackKind { straight, curve, tight_turn, oval };

TrackKind parse_track_kind(std::string_view name);
std::string to_string(TrackKind kind);

struct TrackParams {
  double speed_mps = 0.5;
  double dt_s = 0.05;
  /// Oval only: repeat laps until this duration is covered (0 = one lap).
  double duration_s = 0.0;
  double straight_length_m = 5.0;
  double lead_length_m = 2.0;
  double curve_radius_m = 1.5;
  double curve_angle_rad = 1.5707963267948966;
  double tight_radius_m = 0.5;
  double tight_angle_rad = 2.6179938779914944;
  double oval_straight_m = 5.0;
  double oval_radius_m = 1.0;
};

/// Constant-speed reference sampled at params.dt_s. All tracks start at the
/// origin heading along +x; turns are to the left.
Reference make_track(TrackKind kind, const TrackParams& params = {});

}  // namespace vlmpc
