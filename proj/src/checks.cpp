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

#include "vlmpc/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "vlmpc/critic.hpp"
#include "vlmpc/dynamics.hpp"
#include "vlmpc/frenet.hpp"
#include "vlmpc/qp.hpp"
#include "vlmpc/reference.hpp"

namespace vlmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Forward-mode evaluation of V and dV/ds, written independently of the
// reverse-mode code in the critic.
struct ForwardEval {
  double value;
  Vec5 jacobian;
};

ForwardEval forward_mode(const ValueNetwork& net, const Vec5& s) {
  VectorXd a = net.input_scale().cwiseProduct(s);
  MatrixXd tangent = net.input_scale().asDiagonal();  // columns: d a / d s_i
  for (int l = 0; l < net.num_layers(); ++l) {
    VectorXd z = net.weight(l) * a + net.bias(l);
    MatrixXd t = net.weight(l) * tangent;
    if (l + 1 < net.num_layers()) {
      a = z.array().tanh();
      const VectorXd slope = 1.0 - a.array().square();
      tangent = slope.asDiagonal() * t;
    } else {
      a = z;
      tangent = t;
    }
  }
  return {a(0), tangent.row(0).transpose()};
}

double oracle_loss(const ValueNetwork& net, const std::vector<RegressionSample>& batch, double beta,
                   double lambda) {
  double sum = 0.0;
  for (const auto& b : batch) {
    const ForwardEval f = forward_mode(net, b.state);
    sum += (b.target - f.value) * (b.target - f.value) + beta * f.jacobian.squaredNorm();
  }
  return sum / static_cast<double>(batch.size()) + lambda * net.params().squaredNorm();
}

ValueNetwork random_network(std::mt19937_64& rng) {
  ValueNetwork net = ValueNetwork::initialized({32, 32}, default_input_scale(1.0, 1.5), rng);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (Eigen::Index i = 0; i < net.num_params(); ++i) net.params()(i) += noise(rng);
  return net;
}

Vec5 random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {0.5 * u(rng), 0.5 * u(rng), std::numbers::pi * u(rng), u(rng), 1.5 * u(rng)};
}

bool agrees(double analytic, double numeric, double rel_tol) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return std::abs(analytic - numeric) <= rel_tol * std::max(scale, 1e-8);
}

}  // namespace

CheckResult check_differentiation(std::uint64_t seed, int coordinates) {
  Timer timer;
  CheckResult res{"differentiation", false, "", 0.0};
  std::mt19937_64 rng(seed);
  const double rel_tol = 1e-4;
  const int jacobian_coords = coordinates / 5;
  const int grad_coords = coordinates - jacobian_coords;
  int checked = 0;
  int ok = 0;

  // Input Jacobian, five coordinates per (network, state).
  while (checked < jacobian_coords) {
    const ValueNetwork net = random_network(rng);
    for (int rep = 0; rep < 20 && checked < jacobian_coords; ++rep) {
      const Vec5 s = random_state(rng);
      const auto vj = net.value_and_jacobian(s);
      for (int i = 0; i < 5 && checked < jacobian_coords; ++i) {
        const double h = 1e-5;
        Vec5 sp = s, sm = s;
        sp(i) += h;
        sm(i) -= h;
        const double fd = (forward_mode(net, sp).value - forward_mode(net, sm).value) / (2.0 * h);
        ++checked;
        ok += agrees(vj.jacobian(i), fd, rel_tol);
      }
    }
  }

  // Loss gradient with all three terms.
  const double beta = 1e-2;
  const double lambda = 1e-3;
  std::normal_distribution<double> target_noise(0.0, 1.0);
  int grad_checked = 0;
  while (grad_checked < grad_coords) {
    ValueNetwork net = random_network(rng);
    std::vector<RegressionSample> batch;
    for (int i = 0; i < 16; ++i) batch.push_back({random_state(rng), target_noise(rng)});
    const LossTerms terms = loss_and_grad(net, batch, beta, lambda);
    std::uniform_int_distribution<Eigen::Index> pick(0, net.num_params() - 1);
    for (int rep = 0; rep < 200 && grad_checked < grad_coords; ++rep) {
      const Eigen::Index k = pick(rng);
      const double saved = net.params()(k);
      const double h = 1e-6;
      net.params()(k) = saved + h;
      const double lp = oracle_loss(net, batch, beta, lambda);
      net.params()(k) = saved - h;
      const double lm = oracle_loss(net, batch, beta, lambda);
      net.params()(k) = saved;
      ++grad_checked;
      ok += agrees(terms.grad(k), (lp - lm) / (2.0 * h), rel_tol);
    }
  }
  checked += grad_checked;

  const double fraction = static_cast<double>(ok) / checked;
  res.seconds = timer.seconds();
  res.pass = fraction >= 0.99 && res.seconds < 30.0;
  std::ostringstream os;
  os << ok << "/" << checked << " coordinates within rel 1e-4 (" << 100.0 * fraction << "%), "
     << res.seconds << " s";
  res.detail = os.str();
  return res;
}

namespace {

struct OracleSolution {
  VectorXd x;
  double objective = std::numeric_limits<double>::infinity();
};

// Exhaustive search over which coordinates are free; every bound coordinate
// is tried at each of its finite bounds. The minimum objective over all
// feasible stationary candidates is the unique optimum of a strictly convex
// problem.
OracleSolution enumerate_box_qp(const QpProblem& p) {
  const int d = static_cast<int>(p.dim());
  OracleSolution best;
  VectorXd x(d);
  std::vector<int> free_idx, bound_idx;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    free_idx.clear();
    bound_idx.clear();
    bool skip = false;
    for (int i = 0; i < d; ++i) {
      if (mask & (1u << i)) {
        if (p.lb(i) == p.ub(i)) skip = true;
        free_idx.push_back(i);
      } else {
        if (!std::isfinite(p.lb(i)) && !std::isfinite(p.ub(i))) skip = true;
        bound_idx.push_back(i);
      }
    }
    if (skip) continue;
    const int nf = static_cast<int>(free_idx.size());
    const int nb = static_cast<int>(bound_idx.size());
    MatrixXd hff(nf, nf), hfb(nf, nb);
    VectorXd gf(nf);
    for (int a = 0; a < nf; ++a) {
      gf(a) = p.g(free_idx[a]);
      for (int b = 0; b < nf; ++b) hff(a, b) = p.H(free_idx[a], free_idx[b]);
      for (int b = 0; b < nb; ++b) hfb(a, b) = p.H(free_idx[a], bound_idx[b]);
    }
    MatrixXd m;
    VectorXd c;
    if (nf > 0) {
      Eigen::LDLT<MatrixXd> ldlt(hff);
      m = ldlt.solve(hfb);
      c = ldlt.solve(-gf);
    }
    VectorXd xb(nb);
    for (unsigned side = 0; side < (1u << nb); ++side) {
      bool valid = true;
      for (int b = 0; b < nb && valid; ++b) {
        const int i = bound_idx[b];
        const double v = (side & (1u << b)) ? p.ub(i) : p.lb(i);
        // Fixed coordinates only need one of the two identical choices.
        if (!std::isfinite(v) || (p.lb(i) == p.ub(i) && (side & (1u << b)))) valid = false;
        xb(b) = v;
      }
      if (!valid) continue;
      for (int b = 0; b < nb; ++b) x(bound_idx[b]) = xb(b);
      if (nf > 0) {
        const VectorXd xf = c - m * xb;
        for (int a = 0; a < nf && valid; ++a) {
          const int i = free_idx[a];
          if (xf(a) < p.lb(i) - 1e-12 || xf(a) > p.ub(i) + 1e-12) valid = false;
          x(i) = xf(a);
        }
      }
      if (!valid) continue;
      const double f = p.objective(x);
      if (f < best.objective) {
        best.objective = f;
        best.x = x;
      }
    }
  }
  return best;
}

QpProblem random_qp(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n(rng);
  QpProblem p;
  p.H = a.transpose() * a / d + 0.1 * MatrixXd::Identity(d, d);
  p.g.resize(d);
  p.lb.resize(d);
  p.ub.resize(d);
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    p.g(i) = 3.0 * n(rng);
    p.lb(i) = -2.0 * u(rng);
    p.ub(i) = 2.0 * u(rng);
    const double r = u(rng);
    if (r < 0.1) {
      p.lb(i) = -inf;
    } else if (r < 0.2) {
      p.ub(i) = inf;
    } else if (r < 0.23) {
      p.ub(i) = p.lb(i);
    }
  }
  return p;
}

}  // namespace

CheckResult check_qp_oracle(std::uint64_t seed, int problems) {
  Timer timer;
  CheckResult res{"qp_oracle", false, "", 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 12);
  std::uniform_real_distribution<double> warm_dist(-3.0, 3.0);
  BoxQpSolver solver;
  int matched = 0;
  int kkt_ok = 0;
  int optimal = 0;
  double worst_err = 0.0;
  double worst_kkt = 0.0;
  for (int k = 0; k < problems; ++k) {
    const int d = dim(rng);
    const QpProblem p = random_qp(rng, d);
    std::optional<VectorXd> warm;
    if (k % 2 == 1) {
      warm = VectorXd(d);
      for (int i = 0; i < d; ++i) (*warm)(i) = warm_dist(rng);
    }
    const QpSolution sol = solver.solve(p, warm);
    const OracleSolution ref = enumerate_box_qp(p);
    const double err = (sol.x - ref.x).cwiseAbs().maxCoeff();
    worst_err = std::max(worst_err, err);
    matched += err <= 1e-8;
    if (sol.status == QpStatus::optimal) {
      ++optimal;
      const double r = kkt_residual(p, sol.x);
      worst_kkt = std::max(worst_kkt, r);
      kkt_ok += r < 1e-8;
    }
  }
  res.seconds = timer.seconds();
  res.pass = matched == problems && kkt_ok == optimal && res.seconds < 60.0;
  std::ostringstream os;
  os << matched << "/" << problems << " match oracle (worst " << worst_err << "), " << kkt_ok << "/"
     << optimal << " optimal with KKT < 1e-8 (worst " << worst_kkt << "), " << res.seconds << " s";
  res.detail = os.str();
  return res;
}

namespace {

// Closest point on segment [a, b] by bisection on the sign of the
// derivative of the squared distance.
double closest_fraction(double ax, double ay, double bx, double by, double px, double py) {
  auto slope = [&](double t) {
    const double qx = ax + t * (bx - ax) - px;
    const double qy = ay + t * (by - ay) - py;
    return qx * (bx - ax) + qy * (by - ay);
  };
  if (slope(0.0) >= 0.0) return 0.0;
  if (slope(1.0) <= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct BruteProjection {
  double progress;
  double distance;
};

BruteProjection brute_project(const Reference& ref, double px, double py) {
  const auto& s = ref.samples();
  const auto& arc = ref.arc_length();
  BruteProjection best{0.0, std::numeric_limits<double>::infinity()};
  if (s.size() == 1) return {0.0, std::hypot(s[0].x - px, s[0].y - py)};
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double t = closest_fraction(s[i].x, s[i].y, s[i + 1].x, s[i + 1].y, px, py);
    const double qx = s[i].x + t * (s[i + 1].x - s[i].x);
    const double qy = s[i].y + t * (s[i + 1].y - s[i].y);
    const double dist = std::hypot(qx - px, qy - py);
    const double prog = arc[i] + t * (arc[i + 1] - arc[i]);
    if (dist < best.distance - 1e-12 || (std::abs(dist - best.distance) <= 1e-12 && prog > best.progress)) {
      best = {prog, dist};
    }
  }
  return best;
}

// Distance from p to the polyline point at arc length `progress`.
double distance_at(const Reference& ref, double progress, double px, double py) {
  const auto& s = ref.samples();
  const auto& arc = ref.arc_length();
  auto it = std::upper_bound(arc.begin(), arc.end(), progress);
  std::size_t i = it == arc.begin() ? 0 : static_cast<std::size_t>(it - arc.begin()) - 1;
  if (i + 1 >= s.size()) i = s.size() >= 2 ? s.size() - 2 : 0;
  if (s.size() == 1) return std::hypot(s[0].x - px, s[0].y - py);
  const double len = arc[i + 1] - arc[i];
  const double t = len > 0.0 ? std::clamp((progress - arc[i]) / len, 0.0, 1.0) : 0.0;
  return std::hypot(s[i].x + t * (s[i + 1].x - s[i].x) - px, s[i].y + t * (s[i + 1].y - s[i].y) - py);
}

Reference random_polyline(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> count(2, 40);
  std::vector<RefSample> samples;
  double x = 0.0, y = 0.0, psi = 0.0;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    samples.push_back({0.1 * i, x, y, psi});
    psi += 1.2 * u(rng);
    const double step = i % 7 == 3 ? 0.0 : 0.3 * (1.0 + u(rng));
    x += step * std::cos(psi);
    y += step * std::sin(psi);
  }
  return Reference(std::move(samples));
}

}  // namespace

CheckResult check_geometry(std::uint64_t seed, long long states) {
  Timer timer;
  CheckResult res{"geometry", false, "", 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double pi = std::numbers::pi;

  // Frenet round trip.
  double worst_round = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const WorldState s{20.0 * u(rng), 20.0 * u(rng), pi * u(rng), u(rng), 1.5 * u(rng)};
    const RefPose ref{20.0 * u(rng), 20.0 * u(rng), pi * u(rng)};
    const double l = 0.5 * (1.0 + u(rng));
    const WorldState back = from_frenet(to_frenet(s, ref, l), ref, l);
    worst_round = std::max({worst_round, std::abs(back.x - s.x), std::abs(back.y - s.y),
                            std::abs(wrap_angle(back.psi - s.psi)), std::abs(back.v - s.v),
                            std::abs(back.omega - s.omega)});
    const FrenetError e{u(rng), u(rng), pi * u(rng), u(rng), u(rng)};
    const FrenetError e2 = to_frenet(from_frenet(e, ref, l), ref, l);
    worst_round = std::max({worst_round, std::abs(e2.x_err - e.x_err), std::abs(e2.y_err - e.y_err),
                            std::abs(wrap_angle(e2.psi_err - e.psi_err))});
  }

  // Projection against brute force.
  double worst_proj = 0.0;
  int proj_fail = 0;
  int proj_checked = 0;
  std::vector<Reference> refs;
  for (TrackKind kind : {TrackKind::straight, TrackKind::curve, TrackKind::tight_turn, TrackKind::oval}) {
    refs.push_back(make_track(kind));
  }
  for (int i = 0; i < 40; ++i) refs.push_back(random_polyline(rng));
  for (const Reference& ref : refs) {
    const auto& smp = ref.samples();
    std::uniform_int_distribution<std::size_t> pick(0, smp.size() - 1);
    for (int k = 0; k < 50; ++k) {
      const RefSample& anchor = smp[pick(rng)];
      const double px = anchor.x + 1.5 * u(rng);
      const double py = anchor.y + 1.5 * u(rng);
      const double got = ref.project(px, py);
      const BruteProjection want = brute_project(ref, px, py);
      const double err = std::abs(got - want.progress);
      ++proj_checked;
      if (err < 1e-9) {
        worst_proj = std::max(worst_proj, err);
      } else if (std::abs(distance_at(ref, got, px, py) - want.distance) > 1e-12) {
        // Different progress is only acceptable for an exact distance tie.
        ++proj_fail;
        worst_proj = std::max(worst_proj, err);
      }
    }
  }

  // Heading wrap invariant.
  long long wrap_fail = 0;
  const PlantConfig plant;
  for (long long k = 0; k < states; ++k) {
    const double theta = 1000.0 * u(rng);
    const double w = wrap_angle(theta);
    const double turns = (theta - w) / (2.0 * pi);
    bool ok = w > -pi && w <= pi && std::abs(turns - std::round(turns)) < 1e-9;
    const WorldState s{5.0 * u(rng), 5.0 * u(rng), wrap_angle(pi * u(rng)), u(rng),
                       1.5 * u(rng)};
    const Action a{2.0 * u(rng), 3.0 * u(rng)};
    const WorldState n1 = integrate_nominal(s, a, 0.1);
    const WorldState n2 = plant_step(s, {u(rng), 1.5 * u(rng)}, plant);
    const FrenetError e = to_frenet(n1, {u(rng), u(rng), pi * u(rng)}, 0.2);
    ok = ok && n1.psi > -pi && n1.psi <= pi && n2.psi > -pi && n2.psi <= pi && e.psi_err > -pi &&
         e.psi_err <= pi;
    wrap_fail += !ok;
  }
  // The boundary itself maps to +pi.
  if (wrap_angle(-pi) != pi || wrap_angle(pi) != pi) ++wrap_fail;

  res.seconds = timer.seconds();
  res.pass = worst_round < 1e-12 && proj_fail == 0 && wrap_fail == 0;
  std::ostringstream os;
  os << "round trip worst " << worst_round << "; projection " << proj_checked - proj_fail << "/"
     << proj_checked << " (worst " << worst_proj << "); wrap failures " << wrap_fail << "/" << states
     << "; " << res.seconds << " s";
  res.detail = os.str();
  return res;
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed) {
  return {check_differentiation(seed), check_qp_oracle(seed + 1), check_geometry(seed + 2)};
}

}  // namespace vlmpc
