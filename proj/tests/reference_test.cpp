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

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "vlmpc/frenet.hpp"
#include "vlmpc/reference.hpp"

namespace vlmpc {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(Frenet, OnReferenceIsZero) {
  const RefPose ref{1.0, -2.0, 0.7};
  const FrenetError e = to_frenet({1.0, -2.0, 0.7, 0.3, 0.1}, ref, 0.0);
  EXPECT_NEAR(e.x_err, 0.0, 1e-15);
  EXPECT_NEAR(e.y_err, 0.0, 1e-15);
  EXPECT_NEAR(e.psi_err, 0.0, 1e-15);
  EXPECT_EQ(e.v, 0.3);
  EXPECT_EQ(e.omega, 0.1);
}

TEST(Frenet, RotatedReferenceMapsToNegativeLateral) {
  const FrenetError e = to_frenet({1.0, 0.0, kPi / 2.0, 0, 0}, {0.0, 0.0, kPi / 2.0}, 0.0);
  EXPECT_NEAR(e.x_err, 0.0, 1e-15);
  EXPECT_NEAR(e.y_err, -1.0, 1e-15);
}

TEST(Frenet, ControlPointLeadsTheAxle) {
  const FrenetError e = to_frenet({0, 0, 0, 0, 0}, {0, 0, 0}, 0.2);
  EXPECT_DOUBLE_EQ(e.x_err, 0.2);
  EXPECT_EQ(e.y_err, 0.0);
}

TEST(Frenet, AlgebraicRoundTrip) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pos(-10, 10);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int i = 0; i < 100000; ++i) {
    const WorldState s{pos(rng), pos(rng), wrap_angle(ang(rng)), pos(rng), pos(rng)};
    const RefPose ref{pos(rng), pos(rng), ang(rng)};
    const double l = 0.2;
    const FrenetError e = to_frenet(s, ref, l);
    // Inverse oracle written out independently: rotate by +psi_ref and
    // remove the control-point lever.
    const double ex = e.x_err * std::cos(ref.psi) - e.y_err * std::sin(ref.psi);
    const double ey = e.x_err * std::sin(ref.psi) + e.y_err * std::cos(ref.psi);
    const double psi = ref.psi + e.psi_err;
    ASSERT_NEAR(ref.x + ex - l * std::cos(psi), s.x, 1e-12);
    ASSERT_NEAR(ref.y + ey - l * std::sin(psi), s.y, 1e-12);
    const WorldState back = from_frenet(e, ref, l);
    ASSERT_NEAR(back.x, s.x, 1e-12);
    ASSERT_NEAR(back.y, s.y, 1e-12);
    ASSERT_NEAR(wrap_angle(back.psi - s.psi), 0.0, 1e-12);
    ASSERT_GT(e.psi_err, -kPi);
    ASSERT_LE(e.psi_err, kPi);
  }
}

TEST(Frenet, StateJacobianMatchesDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const WorldState s{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const RefPose ref{u(rng), u(rng), u(rng)};
    const Mat5 J = frenet_state_jacobian(s, ref, 0.2);
    for (int j = 0; j < 5; ++j) {
      Vec5 e = Vec5::Zero();
      e(j) = h;
      Vec5 d = to_frenet(WorldState::from_vector(s.to_vector() + e), ref, 0.2).to_vector() -
               to_frenet(WorldState::from_vector(s.to_vector() - e), ref, 0.2).to_vector();
      d(2) = wrap_angle(d(2));
      ASSERT_LT((d / (2 * h) - J.col(j)).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Frenet, RateMatchesTimeDifference) {
  // Error along a nominal step against a reference moving at constant rate.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const WorldState s{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const Action a{u(rng), u(rng)};
    const RefPose ref{u(rng), u(rng), u(rng)};
    const RefRate rr{u(rng), u(rng), u(rng)};
    auto err_at = [&](double t) {
      const Vec5 x = s.to_vector() + t * unicycle_derivative(s, a);
      const RefPose r{ref.x + t * rr.x_dot, ref.y + t * rr.y_dot, ref.psi + t * rr.psi_dot};
      return to_frenet(WorldState::from_vector(x), r, 0.2).to_vector();
    };
    Vec5 d = err_at(h) - err_at(-h);
    d(2) = wrap_angle(d(2));
    const FrenetRate fr = frenet_rate(s, a, ref, rr, 0.2);
    ASSERT_LT((d / (2 * h) - fr.rate).cwiseAbs().maxCoeff(), 1e-7);
    // Partial derivatives of the rate.
    for (int j = 0; j < 5; ++j) {
      Vec5 e = Vec5::Zero();
      e(j) = h;
      const Vec5 col = (frenet_rate(WorldState::from_vector(s.to_vector() + e), a, ref, rr, 0.2).rate -
                        frenet_rate(WorldState::from_vector(s.to_vector() - e), a, ref, rr, 0.2).rate) /
                       (2 * h);
      ASSERT_LT((col - fr.d_state.col(j)).cwiseAbs().maxCoeff(), 1e-7);
    }
    EXPECT_EQ(fr.d_action(3, 0), 1.0);
    EXPECT_EQ(fr.d_action(4, 1), 1.0);
  }
}

TEST(Frenet, MirrorIsInvolution) {
  const FrenetError e{0.1, -0.2, 0.3, 0.4, -0.5};
  const FrenetError m = mirror(e);
  EXPECT_EQ(m.x_err, 0.1);
  EXPECT_EQ(m.y_err, 0.2);
  EXPECT_EQ(m.psi_err, -0.3);
  EXPECT_EQ(m.v, 0.4);
  EXPECT_EQ(m.omega, 0.5);
  EXPECT_EQ(mirror(m), e);
}

Reference two_segment() {
  return Reference({{0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 0.0, 0.0}, {2.0, 1.0, 1.0, kPi / 2}});
}

TEST(Reference, RejectsBadSamples) {
  EXPECT_THROW(Reference(std::vector<RefSample>{}), std::invalid_argument);
  EXPECT_THROW(Reference({{0, 0, 0, 0}, {0, 1, 0, 0}}), std::invalid_argument);
}

TEST(Reference, InterpolationAndClamp) {
  const Reference r = two_segment();
  const RefPose a = r.at(0.0);
  EXPECT_EQ(a.x, 0.0);
  EXPECT_EQ(a.y, 0.0);
  const RefPose mid = r.at(0.5);
  EXPECT_DOUBLE_EQ(mid.x, 0.5);
  EXPECT_DOUBLE_EQ(mid.y, 0.0);
  const RefPose end = r.at(99.0);
  EXPECT_EQ(end.x, 1.0);
  EXPECT_EQ(end.y, 1.0);
  EXPECT_DOUBLE_EQ(end.psi, kPi / 2);
  EXPECT_DOUBLE_EQ(r.at(1.5).psi, kPi / 4);
  EXPECT_DOUBLE_EQ(r.length(), 2.0);
  EXPECT_DOUBLE_EQ(r.duration(), 2.0);
}

TEST(Reference, HeadingShortestArc) {
  const Reference r({{0, 0, 0, kPi - 0.1}, {1, 1, 0, -kPi + 0.1}});
  const RefPose m = r.at(0.5);
  EXPECT_NEAR(std::abs(m.psi), kPi, 1e-12);
}

TEST(Reference, RateOfSegment) {
  const Reference r = two_segment();
  const RefRate q = r.rate_at(1.5);
  EXPECT_DOUBLE_EQ(q.x_dot, 0.0);
  EXPECT_DOUBLE_EQ(q.y_dot, 1.0);
  EXPECT_DOUBLE_EQ(q.psi_dot, kPi / 2);
  const RefRate past = r.rate_at(5.0);
  EXPECT_EQ(past.x_dot, 0.0);
}

TEST(Reference, ProjectionBasics) {
  const Reference r = two_segment();
  EXPECT_EQ(r.project(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(r.project(0.3, -0.5), 0.3);
  EXPECT_DOUBLE_EQ(r.project(5.0, 5.0), 2.0);
  // (1.5, 0.5) is 0.5 from both segments: the later one wins.
  EXPECT_DOUBLE_EQ(r.project(1.5, 0.5), 1.5);
}

double brute_force_projection(const Reference& r, double px, double py) {
  const auto& s = r.samples();
  double best = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  double arc = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double dx = s[i + 1].x - s[i].x;
    const double dy = s[i + 1].y - s[i].y;
    const double len = std::hypot(dx, dy);
    // The squared distance is convex in u: bisect on the sign of its slope.
    double lo = 0.0;
    double hi = 1.0;
    auto d2 = [&](double u) {
      return std::pow(s[i].x + u * dx - px, 2) + std::pow(s[i].y + u * dy - py, 2);
    };
    auto slope = [&](double u) { return (s[i].x + u * dx - px) * dx + (s[i].y + u * dy - py) * dy; };
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (slope(mid) > 0.0) hi = mid; else lo = mid;
    }
    const double u = 0.5 * (lo + hi);
    if (d2(u) < best - 1e-12 || (std::abs(d2(u) - best) <= 1e-12 && arc + u * len > best_arc)) {
      best = std::min(best, d2(u));
      best_arc = arc + u * len;
    }
    arc += len;
  }
  return best_arc;
}

TEST(Reference, ProjectionAgainstSearchOracle) {
  TrackParams p;
  p.dt_s = 0.2;
  const Reference r = make_track(TrackKind::tight_turn, p);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double px = u(rng);
    const double py = u(rng);
    ASSERT_NEAR(r.project(px, py), brute_force_projection(r, px, py), 1e-9);
  }
}

TEST(Tracks, StraightDurationAndHeading) {
  const Reference r = make_track(TrackKind::straight);
  EXPECT_NEAR(r.duration(), 10.0, 1e-12);
  EXPECT_NEAR(r.length(), 5.0, 1e-9);
  for (const auto& s : r.samples()) ASSERT_EQ(s.psi, 0.0);
}

TEST(Tracks, OvalArcLengthMatchesSpeedTimesDuration) {
  TrackParams p;
  const Reference r = make_track(TrackKind::oval, p);
  // Independent arc length accumulation of the samples.
  double arc = 0.0;
  const auto& s = r.samples();
  for (std::size_t i = 1; i < s.size(); ++i) arc += std::hypot(s[i].x - s[i - 1].x, s[i].y - s[i - 1].y);
  EXPECT_NEAR(arc, p.speed_mps * r.duration(), 0.01 * p.speed_mps * r.duration());
  EXPECT_NEAR(r.duration() * p.speed_mps, 2 * 5.0 + 2 * kPi * 1.0, 1e-9);
  // Closed: the lap ends where it starts.
  EXPECT_NEAR(s.back().x, 0.0, 1e-9);
  EXPECT_NEAR(s.back().y, 0.0, 1e-9);
}

TEST(Tracks, OvalRepeatsLapsForDuration) {
  TrackParams p;
  p.duration_s = 120.0;
  const Reference r = make_track(TrackKind::oval, p);
  EXPECT_NEAR(r.duration(), 120.0, 1e-9);
  const double lap = (10.0 + 2 * kPi) / p.speed_mps;
  const RefPose a = r.at(3.0);
  const RefPose b = r.at(3.0 + lap);
  EXPECT_NEAR(a.x, b.x, 1e-6);
  EXPECT_NEAR(a.y, b.y, 1e-6);
}

TEST(Tracks, TurnAngleFromTangents) {
  for (TrackKind kind : {TrackKind::curve, TrackKind::tight_turn}) {
    TrackParams p;
    const Reference r = make_track(kind, p);
    const auto& s = r.samples();
    // Integrate the heading change of the polyline tangents.
    double turn = 0.0;
    double prev = std::atan2(s[1].y - s[0].y, s[1].x - s[0].x);
    for (std::size_t i = 2; i < s.size(); ++i) {
      const double h = std::atan2(s[i].y - s[i - 1].y, s[i].x - s[i - 1].x);
      turn += wrap_angle(h - prev);
      prev = h;
    }
    const double expect = kind == TrackKind::curve ? p.curve_angle_rad : p.tight_angle_rad;
    EXPECT_NEAR(turn, expect, 1e-3) << to_string(kind);
    EXPECT_NEAR(wrap_angle(s.back().psi - s.front().psi), expect, 1e-9);
  }
}

TEST(Tracks, HeadingMatchesTangentOnStraights) {
  const Reference r = make_track(TrackKind::curve);
  const auto& s = r.samples();
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double tangent = std::atan2(s[i + 1].y - s[i].y, s[i + 1].x - s[i].x);
    if (std::abs(wrap_angle(s[i + 1].psi - s[i].psi)) < 1e-12) {
      ASSERT_NEAR(wrap_angle(tangent - s[i].psi), 0.0, 1e-6);
    }
  }
}

TEST(Tracks, KindNames) {
  for (TrackKind k : {TrackKind::straight, TrackKind::curve, TrackKind::tight_turn, TrackKind::oval}) {
    EXPECT_EQ(parse_track_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_track_kind("figure8"), std::invalid_argument);
}

}  // namespace
}  // namespace vlmpc
