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
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "vlmpc/qp.hpp"

namespace vlmpc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

QpProblem random_problem(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = n(rng);
  QpProblem p;
  p.H = A * A.transpose() + 0.1 * MatrixXd::Identity(d, d);
  p.g = VectorXd(d);
  p.lb = VectorXd(d);
  p.ub = VectorXd(d);
  for (int i = 0; i < d; ++i) {
    p.g(i) = 3.0 * n(rng);
    p.lb(i) = -u(rng);
    p.ub(i) = u(rng);
  }
  return p;
}

// Exhaustive oracle: each coordinate free, at its lower or at its upper
// bound; keep the best feasible pattern whose multipliers have the right sign.
VectorXd enumeration_oracle(const QpProblem& p) {
  const int d = static_cast<int>(p.dim());
  int patterns = 1;
  for (int i = 0; i < d; ++i) patterns *= 3;
  double best = kInf;
  VectorXd best_x = VectorXd::Zero(d);
  std::vector<int> code(d);
  for (int c = 0; c < patterns; ++c) {
    int rest = c;
    for (int i = 0; i < d; ++i) {
      code[i] = rest % 3;
      rest /= 3;
    }
    VectorXd x = VectorXd::Zero(d);
    std::vector<int> free;
    for (int i = 0; i < d; ++i) {
      if (code[i] == 1) x(i) = p.lb(i);
      else if (code[i] == 2) x(i) = p.ub(i);
      else free.push_back(i);
    }
    if (!free.empty()) {
      const int f = static_cast<int>(free.size());
      MatrixXd Hf(f, f);
      VectorXd rhs(f);
      for (int a = 0; a < f; ++a) {
        rhs(a) = -p.g(free[a]);
        for (int i = 0; i < d; ++i)
          if (code[i] != 0) rhs(a) -= p.H(free[a], i) * x(i);
        for (int b = 0; b < f; ++b) Hf(a, b) = p.H(free[a], free[b]);
      }
      const VectorXd xf = Hf.ldlt().solve(rhs);
      for (int a = 0; a < f; ++a) x(free[a]) = xf(a);
    }
    bool ok = true;
    for (int i = 0; i < d && ok; ++i) ok = x(i) >= p.lb(i) - 1e-12 && x(i) <= p.ub(i) + 1e-12;
    if (!ok) continue;
    const VectorXd grad = p.H * x + p.g;
    for (int i = 0; i < d && ok; ++i) {
      if (code[i] == 1) ok = grad(i) >= -1e-9;
      if (code[i] == 2) ok = grad(i) <= 1e-9;
    }
    if (!ok) continue;
    const double obj = p.objective(x);
    if (obj < best) {
      best = obj;
      best_x = x;
    }
  }
  return best_x;
}

TEST(BoxQp, UnconstrainedNewtonStep) {
  QpProblem p{MatrixXd::Identity(2, 2), VectorXd(2), VectorXd::Constant(2, -kInf),
              VectorXd::Constant(2, kInf)};
  p.g << -1, -2;
  const QpSolution s = solve_box_qp(p);
  EXPECT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.x(0), 1.0, 1e-14);
  EXPECT_NEAR(s.x(1), 2.0, 1e-14);
  EXPECT_TRUE(s.active_set.empty());
}

TEST(BoxQp, ClippedMinimum) {
  QpProblem p{MatrixXd::Constant(1, 1, 1.0), VectorXd::Constant(1, -2.0),
              VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)};
  const QpSolution s = solve_box_qp(p);
  EXPECT_EQ(s.status, QpStatus::optimal);
  EXPECT_EQ(s.x(0), 1.0);
  ASSERT_EQ(s.active_set.size(), 1u);
  EXPECT_EQ(s.active_set[0], 0);
}

TEST(BoxQp, InfeasibleBounds) {
  QpProblem p{MatrixXd::Identity(2, 2), VectorXd::Zero(2), VectorXd(2), VectorXd(2)};
  p.lb << 0, 1;
  p.ub << 1, 0;
  EXPECT_EQ(solve_box_qp(p).status, QpStatus::infeasible_bounds);
}

TEST(BoxQp, FixedVariable) {
  QpProblem p{MatrixXd::Identity(2, 2), VectorXd::Constant(2, -5.0), VectorXd(2), VectorXd(2)};
  p.lb << 0.5, -1;
  p.ub << 0.5, 1;
  const QpSolution s = solve_box_qp(p);
  EXPECT_EQ(s.x(0), 0.5);
  EXPECT_EQ(s.x(1), 1.0);
}

TEST(BoxQp, MatchesEnumerationOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 8;
    const QpProblem p = random_problem(rng, d);
    const QpSolution s = solve_box_qp(p);
    ASSERT_EQ(s.status, QpStatus::optimal);
    ASSERT_LT(kkt_residual(p, s.x), 1e-8);
    ASSERT_LT((s.x - enumeration_oracle(p)).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
    for (int i = 0; i < d; ++i) {
      ASSERT_GE(s.x(i), p.lb(i) - 1e-12);
      ASSERT_LE(s.x(i), p.ub(i) + 1e-12);
    }
  }
}

TEST(BoxQp, WarmStartFromSolutionIsImmediate) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const QpProblem p = random_problem(rng, 10);
    const QpSolution cold = solve_box_qp(p);
    const QpSolution warm = solve_box_qp(p, cold.x);
    EXPECT_LE(warm.iterations, cold.iterations);
    EXPECT_LT((warm.x - cold.x).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(BoxQp, Deterministic) {
  std::mt19937_64 rng(3);
  const QpProblem p = random_problem(rng, 12);
  const VectorXd warm = VectorXd::Constant(12, 0.3);
  const QpSolution a = solve_box_qp(p, warm);
  const QpSolution b = solve_box_qp(p, warm);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.active_set, b.active_set);
}

TEST(BoxQp, IterationCapIsFlaggedAndFeasible) {
  std::mt19937_64 rng(4);
  QpProblem p = random_problem(rng, 12);
  p.g *= 20.0;  // many bounds become active
  const QpSolution s = solve_box_qp(p, std::nullopt, 1);
  EXPECT_EQ(s.status, QpStatus::max_iter);
  EXPECT_EQ(s.iterations, 1);
  for (int i = 0; i < 12; ++i) {
    EXPECT_GE(s.x(i), p.lb(i) - 1e-12);
    EXPECT_LE(s.x(i), p.ub(i) + 1e-12);
  }
}

TEST(BoxQp, DimensionMismatchRejected) {
  QpProblem p{MatrixXd::Identity(2, 2), VectorXd::Zero(3), VectorXd::Zero(2), VectorXd::Zero(2)};
  EXPECT_THROW(solve_box_qp(p), std::invalid_argument);
}

TEST(KktResidual, DetectsWrongSign) {
  QpProblem p{MatrixXd::Identity(1, 1), VectorXd::Constant(1, 1.0), VectorXd::Constant(1, -1.0),
              VectorXd::Constant(1, 1.0)};
  // At the upper bound with a positive gradient: not optimal.
  EXPECT_NEAR(kkt_residual(p, VectorXd::Constant(1, 1.0)), 2.0, 1e-15);
  EXPECT_NEAR(kkt_residual(p, VectorXd::Constant(1, -1.0)), 0.0, 1e-15);
}

TEST(QpDump, RoundTrip) {
  std::mt19937_64 rng(5);
  QpProblem p = random_problem(rng, 4);
  p.ub(2) = kInf;
  std::stringstream ss;
  write_qp_problem(ss, p);
  const QpProblem q = read_qp_problem(ss);
  EXPECT_EQ(q.H, p.H);
  EXPECT_EQ(q.g, p.g);
  EXPECT_EQ(q.lb, p.lb);
  EXPECT_EQ(q.ub, p.ub);
}

}  // namespace
}  // namespace vlmpc
