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

#include "vlmpc/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace vlmpc {

Reference::Reference(std::vector<RefSample> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw std::invalid_argument("reference must contain at least one sample");
  arc_.assign(samples_.size(), 0.0);
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].t > samples_[i - 1].t)) {
      throw std::invalid_argument("reference timestamps must be strictly increasing");
    }
    arc_[i] = arc_[i - 1] + std::hypot(samples_[i].x - samples_[i - 1].x,
                                       samples_[i].y - samples_[i - 1].y);
  }
  for (auto& s : samples_) s.psi = wrap_angle(s.psi);
}

std::size_t Reference::segment_index(double t) const {
  // Index i such that samples_[i].t <= t < samples_[i + 1].t.
  auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                             [](double value, const RefSample& s) { return value < s.t; });
  if (it == samples_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(samples_.begin(), it)) - 1;
}

RefPose Reference::at(double t) const {
  if (samples_.empty()) throw std::logic_error("empty reference");
  if (t <= samples_.front().t) {
    const auto& s = samples_.front();
    return {s.x, s.y, s.psi};
  }
  if (t >= samples_.back().t) {
    const auto& s = samples_.back();
    return {s.x, s.y, s.psi};
  }
  const std::size_t i = segment_index(t);
  const RefSample& a = samples_[i];
  const RefSample& b = samples_[i + 1];
  const double frac = (t - a.t) / (b.t - a.t);
  return {a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y),
          wrap_angle(a.psi + frac * wrap_angle(b.psi - a.psi))};
}

RefRate Reference::rate_at(double t) const {
  if (samples_.size() < 2 || t >= samples_.back().t || t < samples_.front().t) return {};
  const std::size_t i = segment_index(t);
  const RefSample& a = samples_[i];
  const RefSample& b = samples_[i + 1];
  const double dt = b.t - a.t;
  return {(b.x - a.x) / dt, (b.y - a.y) / dt, wrap_angle(b.psi - a.psi) / dt};
}

double Reference::project(double px, double py) const {
  if (samples_.empty()) throw std::logic_error("empty reference");
  if (samples_.size() == 1) return 0.0;
  constexpr double kTieTol = 1e-12;
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
    const double ax = samples_[i].x;
    const double ay = samples_[i].y;
    const double dx = samples_[i + 1].x - ax;
    const double dy = samples_[i + 1].y - ay;
    const double len2 = dx * dx + dy * dy;
    double u = 0.0;
    if (len2 > 0.0) u = std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0);
    const double cx = ax + u * dx - px;
    const double cy = ay + u * dy - py;
    const double d2 = cx * cx + cy * cy;
    const double s = arc_[i] + u * (arc_[i + 1] - arc_[i]);
    if (d2 < best_d2 - kTieTol || (std::abs(d2 - best_d2) <= kTieTol && s > best_s)) {
      best_d2 = std::min(d2, best_d2);
      best_s = s;
    }
  }
  return best_s;
}

TrackKind parse_track_kind(std::string_view name) {
  if (name == "straight") return TrackKind::straight;
  if (name == "curve") return TrackKind::curve;
  if (name == "tight_turn") return TrackKind::tight_turn;
  if (name == "oval") return TrackKind::oval;
  throw std::invalid_argument("unknown track kind '" + std::string(name) + "'");
}

std::string to_string(TrackKind kind) {
  switch (kind) {
    case TrackKind::straight: return "straight";
    case TrackKind::curve: return "curve";
    case TrackKind::tight_turn: return "tight_turn";
    case TrackKind::oval: return "oval";
  }
  return "unknown";
}

namespace {

struct Piece {
  double length;
  double curvature;  // 0 for straights, 1/R for left arcs
};

struct Pose2 {
  double x, y, psi;
};

class PiecewisePath {
 public:
  explicit PiecewisePath(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
    Pose2 p{0.0, 0.0, 0.0};
    for (const Piece& pc : pieces_) {
      starts_.push_back(p);
      p = advance(p, pc, pc.length);
      total_ += pc.length;
    }
  }

  double length() const { return total_; }

  /// Pose at arc length s. Closed paths wrap around for multiple laps.
  Pose2 at(double s, bool closed) const {
    double rem = s;
    if (closed && s > total_) rem = s - total_ * std::floor(s / total_);
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      if (rem <= pieces_[i].length || i + 1 == pieces_.size()) {
        return advance(starts_[i], pieces_[i], std::min(rem, pieces_[i].length));
      }
      rem -= pieces_[i].length;
    }
    return starts_.front();
  }

 private:
  static Pose2 advance(const Pose2& p, const Piece& pc, double s) {
    if (pc.curvature == 0.0) {
      return {p.x + s * std::cos(p.psi), p.y + s * std::sin(p.psi), p.psi};
    }
    const double r = 1.0 / pc.curvature;
    const double cx = p.x - r * std::sin(p.psi);
    const double cy = p.y + r * std::cos(p.psi);
    const double h = p.psi + s * pc.curvature;
    return {cx + r * std::sin(h), cy - r * std::cos(h), h};
  }

  std::vector<Piece> pieces_;
  std::vector<Pose2> starts_;
  double total_ = 0.0;
};

}  // namespace

Reference make_track(TrackKind kind, const TrackParams& p) {
  if (!(p.speed_mps > 0.0) || !(p.dt_s > 0.0)) {
    throw std::invalid_argument("track speed and dt must be > 0");
  }
  std::vector<Piece> pieces;
  bool closed = false;
  switch (kind) {
    case TrackKind::straight:
      pieces = {{p.straight_length_m, 0.0}};
      break;
    case TrackKind::curve:
      pieces = {{p.lead_length_m, 0.0},
                {p.curve_radius_m * p.curve_angle_rad, 1.0 / p.curve_radius_m},
                {p.lead_length_m, 0.0}};
      break;
    case TrackKind::tight_turn:
      pieces = {{p.lead_length_m, 0.0},
                {p.tight_radius_m * p.tight_angle_rad, 1.0 / p.tight_radius_m},
                {p.lead_length_m, 0.0}};
      break;
    case TrackKind::oval: {
      const double half = std::numbers::pi * p.oval_radius_m;
      pieces = {{p.oval_straight_m, 0.0},
                {half, 1.0 / p.oval_radius_m},
                {p.oval_straight_m, 0.0},
                {half, 1.0 / p.oval_radius_m}};
      closed = true;
      break;
    }
  }
  const PiecewisePath path(std::move(pieces));
  double total = path.length();
  if (closed && p.duration_s > 0.0) total = p.speed_mps * p.duration_s;
  const double duration = total / p.speed_mps;

  std::vector<RefSample> samples;
  const auto count = static_cast<std::size_t>(std::floor(duration / p.dt_s + 1e-9));
  samples.reserve(count + 2);
  for (std::size_t k = 0; k <= count; ++k) {
    const double t = static_cast<double>(k) * p.dt_s;
    const Pose2 q = path.at(std::min(p.speed_mps * t, total), closed);
    samples.push_back({t, q.x, q.y, q.psi});
  }
  if (duration - samples.back().t > 1e-9) {
    const Pose2 q = path.at(total, closed);
    samples.push_back({duration, q.x, q.y, q.psi});
  }
  return Reference(std::move(samples));
}

}  // namespace vlmpc
