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

#include "vlmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "vlmpc/csv.hpp"

namespace vlmpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible_bounds: return "infeasible_bounds";
  }
  return "unknown";
}

namespace {

enum class Bound : unsigned char { free, lower, upper, fixed };

void check_dimensions(const QpProblem& p) {
  const Index d = p.g.size();
  if (p.H.rows() != d || p.H.cols() != d || p.lb.size() != d || p.ub.size() != d) {
    throw std::invalid_argument("QpProblem dimension mismatch");
  }
}

}  // namespace

QpSolution BoxQpSolver::solve(const QpProblem& p, const std::optional<VectorXd>& warm_start,
                              int max_iter) {
  check_dimensions(p);
  const Index d = p.dim();
  QpSolution sol;

  for (Index i = 0; i < d; ++i) {
    if (p.lb(i) > p.ub(i)) {
      sol.status = QpStatus::infeasible_bounds;
      sol.x = VectorXd::Zero(d);
      return sol;
    }
  }
  if (warm_start && warm_start->size() != d) {
    throw std::invalid_argument("warm start dimension mismatch");
  }

  int cap = max_iter > 0 ? max_iter : options_.max_iter;
  if (cap <= 0) cap = static_cast<int>(10 * d);

  VectorXd x = warm_start ? *warm_start : VectorXd::Zero(d);
  x = x.cwiseMax(p.lb).cwiseMin(p.ub);
  std::vector<Bound> state(static_cast<std::size_t>(d), Bound::free);
  for (Index i = 0; i < d; ++i) {
    auto& s = state[static_cast<std::size_t>(i)];
    if (p.lb(i) == p.ub(i)) {
      s = Bound::fixed;
    } else if (warm_start && x(i) == p.lb(i)) {
      s = Bound::lower;
    } else if (warm_start && x(i) == p.ub(i)) {
      s = Bound::upper;
    }
  }

  const double h_scale = p.H.cwiseAbs().maxCoeff();
  std::vector<Index> free_idx;
  std::vector<Index> bound_idx;
  sol.status = QpStatus::max_iter;

  while (sol.iterations < cap && d > 0) {
    ++sol.iterations;
    free_idx.clear();
    bound_idx.clear();
    for (Index i = 0; i < d; ++i) {
      (state[static_cast<std::size_t>(i)] == Bound::free ? free_idx : bound_idx).push_back(i);
    }

    bool blocked = false;
    const auto nf = static_cast<Index>(free_idx.size());
    if (nf > 0) {
      h_free_.resize(nf, nf);
      rhs_.resize(nf);
      for (Index a = 0; a < nf; ++a) {
        const Index i = free_idx[static_cast<std::size_t>(a)];
        double r = -p.g(i);
        for (Index j : bound_idx) r -= p.H(i, j) * x(j);
        rhs_(a) = r;
        for (Index b = 0; b < nf; ++b) h_free_(a, b) = p.H(i, free_idx[static_cast<std::size_t>(b)]);
      }
      llt_.compute(h_free_);
      if (llt_.info() != Eigen::Success) {
        throw std::domain_error("QP Hessian is not positive definite on the free subspace");
      }
      const VectorXd target = llt_.solve(rhs_);

      double alpha = 1.0;
      Index block = -1;
      Bound block_side = Bound::free;
      for (Index a = 0; a < nf; ++a) {
        const Index i = free_idx[static_cast<std::size_t>(a)];
        const double step = target(a) - x(i);
        double t = std::numeric_limits<double>::infinity();
        Bound side = Bound::free;
        if (step < 0.0 && std::isfinite(p.lb(i))) {
          t = (p.lb(i) - x(i)) / step;
          side = Bound::lower;
        } else if (step > 0.0 && std::isfinite(p.ub(i))) {
          t = (p.ub(i) - x(i)) / step;
          side = Bound::upper;
        }
        t = std::max(t, 0.0);
        if (t < alpha) {
          alpha = t;
          block = i;
          block_side = side;
        }
      }

      if (block >= 0) {
        for (Index a = 0; a < nf; ++a) {
          const Index i = free_idx[static_cast<std::size_t>(a)];
          x(i) = std::clamp(x(i) + alpha * (target(a) - x(i)), p.lb(i), p.ub(i));
        }
        x(block) = block_side == Bound::lower ? p.lb(block) : p.ub(block);
        state[static_cast<std::size_t>(block)] = block_side;
        blocked = true;
      } else {
        for (Index a = 0; a < nf; ++a) x(free_idx[static_cast<std::size_t>(a)]) = target(a);
      }
    }
    if (blocked) continue;

    // Subproblem solved exactly: release the worst wrong-signed multiplier.
    const VectorXd grad = p.H * x + p.g;
    const double tol =
        options_.stationarity_tol * (1.0 + p.g.cwiseAbs().maxCoeff() + h_scale * x.cwiseAbs().maxCoeff());
    Index worst = -1;
    double worst_violation = tol;
    for (Index i : bound_idx) {
      const Bound s = state[static_cast<std::size_t>(i)];
      const double violation = s == Bound::lower ? -grad(i) : (s == Bound::upper ? grad(i) : 0.0);
      if (violation > worst_violation) {
        worst_violation = violation;
        worst = i;
      }
    }
    if (worst < 0) {
      sol.status = QpStatus::optimal;
      break;
    }
    state[static_cast<std::size_t>(worst)] = Bound::free;
  }
  if (d == 0) sol.status = QpStatus::optimal;

  sol.x = std::move(x);
  for (Index i = 0; i < d; ++i) {
    if (state[static_cast<std::size_t>(i)] != Bound::free) sol.active_set.push_back(static_cast<int>(i));
  }
  return sol;
}

double kkt_residual(const QpProblem& p, const VectorXd& x, double bound_tol) {
  check_dimensions(p);
  const VectorXd grad = p.H * x + p.g;
  double worst = 0.0;
  for (Index i = 0; i < p.dim(); ++i) {
    worst = std::max({worst, p.lb(i) - x(i), x(i) - p.ub(i)});
    const bool at_lower = x(i) <= p.lb(i) + bound_tol;
    const bool at_upper = x(i) >= p.ub(i) - bound_tol;
    if (at_lower && at_upper) continue;
    if (at_lower) {
      worst = std::max(worst, -grad(i));
    } else if (at_upper) {
      worst = std::max(worst, grad(i));
    } else {
      worst = std::max(worst, std::abs(grad(i)));
    }
  }
  return worst;
}

void write_qp_problem(std::ostream& out, const QpProblem& p) {
  check_dimensions(p);
  const Index d = p.dim();
  out << d << '\n';
  auto row = [&](auto&& at) {
    for (Index j = 0; j < d; ++j) out << (j ? " " : "") << format_double(at(j));
    out << '\n';
  };
  for (Index i = 0; i < d; ++i) row([&](Index j) { return p.H(i, j); });
  row([&](Index j) { return p.g(j); });
  row([&](Index j) { return p.lb(j); });
  row([&](Index j) { return p.ub(j); });
}

QpProblem read_qp_problem(std::istream& in) {
  Index d = 0;
  if (!(in >> d) || d < 0) throw std::runtime_error("QP dump: bad dimension");
  auto read_value = [&]() {
    std::string token;
    if (!(in >> token)) throw std::runtime_error("QP dump: truncated");
    if (token == "inf") return std::numeric_limits<double>::infinity();
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(token);
  };
  QpProblem p{MatrixXd(d, d), VectorXd(d), VectorXd(d), VectorXd(d)};
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) p.H(i, j) = read_value();
  }
  for (Index j = 0; j < d; ++j) p.g(j) = read_value();
  for (Index j = 0; j < d; ++j) p.lb(j) = read_value();
  for (Index j = 0; j < d; ++j) p.ub(j) = read_value();
  return p;
}

}  // namespace vlmpc
