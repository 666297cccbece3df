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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vlmpc {

/// min 1/2 x'Hx + g'x  s.t.  lb <= x <= ub, with H symmetric positive definite.
/// Infinite bounds are allowed.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  Eigen::Index dim() const { return g.size(); }
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

enum class QpStatus { optimal, max_iter, infeasible_bounds };
std::string to_string(QpStatus status);

struct QpSolution {
  Eigen::VectorXd x;
  QpStatus status = QpStatus::optimal;
  std::vector<int> active_set;  // indices held at a bound
  int iterations = 0;
};

/// Primal active-set solver for dense box-constrained convex QPs.
///
/// Each iteration solves the equality-constrained subproblem on the free
/// variables by Cholesky factorization, then either takes the longest
/// feasible step (adding a blocking bound) or releases the bound with the
/// most negative multiplier. A warm start is projected onto the box and the
/// coordinates it leaves on a bound seed the working set.
class BoxQpSolver {
 public:
  struct Options {
    double stationarity_tol = 1e-10;
    int max_iter = 0;  // 0 means 10 * dim
  };

  BoxQpSolver() = default;
  explicit BoxQpSolver(Options options) : options_(options) {}

  QpSolution solve(const QpProblem& p, const std::optional<Eigen::VectorXd>& warm_start = {},
                   int max_iter = 0);

 private:
  Options options_;
  Eigen::MatrixXd h_free_;
  Eigen::VectorXd rhs_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline QpSolution solve_box_qp(const QpProblem& p,
                               const std::optional<Eigen::VectorXd>& warm_start = {},
                               int max_iter = 0) {
  BoxQpSolver solver;
  return solver.solve(p, warm_start, max_iter);
}

/// Largest KKT violation: |grad_i| on free coordinates, wrong-signed
/// multipliers on bound coordinates, and bound violations.
double kkt_residual(const QpProblem& p, const Eigen::VectorXd& x, double bound_tol = 1e-12);

/// Plain-text dump: d, then H row-major, g, lb, ub (one row per line).
void write_qp_problem(std::ostream& out, const QpProblem& p);
QpProblem read_qp_problem(std::istream& in);

}  // namespace vlmpc
