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

#include "vlmpc/mpc.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "vlmpc/csv.hpp"

namespace vlmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Row7 = Eigen::Matrix<double, 1, 7>;

CostMode parse_cost_mode(std::string_view name) {
  if (name == "naive") return CostMode::naive;
  if (name == "expert") return CostMode::expert;
  if (name == "tdmpc") return CostMode::tdmpc;
  if (name == "dmpc") return CostMode::dmpc;
  throw std::invalid_argument("unknown controller mode '" + std::string(name) + "'");
}

std::string to_string(CostMode mode) {
  switch (mode) {
    case CostMode::naive: return "naive";
    case CostMode::expert: return "expert";
    case CostMode::tdmpc: return "tdmpc";
    case CostMode::dmpc: return "dmpc";
  }
  return "unknown";
}

void MpcConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("MPC horizon must be >= 2");
  if (!(delta_t_s > 0.0)) throw std::invalid_argument("MPC delta_t_s must be > 0");
  if (!(mu > 0.0)) throw std::invalid_argument("MPC damping mu must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("MPC gamma must be in (0, 1]");
  if (sqp_iters < 1) throw std::invalid_argument("sqp_iters must be >= 1");
  if (!(velocity_penalty >= 0.0) || !(action_weight_scale >= 0.0)) {
    throw std::invalid_argument("MPC penalty weights must be >= 0");
  }
  const ExpertWeights& w = expert;
  if (w.x_err < 0 || w.y_err < 0 || w.psi_err < 0 || w.v_dev < 0 || w.omega_dev < 0 || w.a < 0 ||
      w.alpha < 0) {
    throw std::invalid_argument("expert weights must be >= 0");
  }
}

double StageReference::v_ref() const { return std::hypot(rate.x_dot, rate.y_dot); }

namespace {

// Sum of squared scalar residuals with a Gauss-Newton model.
struct LeastSquares {
  StageQuadratic q;
  void add(double r, const Row7& jac) {
    q.value += r * r;
    q.grad += 2.0 * r * jac.transpose();
    q.hess += 2.0 * jac.transpose() * jac;
  }
};

Row7 state_row(const Mat5& E, int row) {
  Row7 r = Row7::Zero();
  r.head<5>() = E.row(row);
  return r;
}

Row7 unit_row(int i) {
  Row7 r = Row7::Zero();
  r(i) = 1.0;
  return r;
}

void add_tracking(LeastSquares& ls, const FrenetError& e, const Mat5& E) {
  ls.add(e.x_err, state_row(E, 0));
  ls.add(e.y_err, state_row(E, 1));
}

void add_expert_state(LeastSquares& ls, const ExpertWeights& w, const FrenetError& e,
                      const Mat5& E, const StageReference& ref) {
  const std::array<double, 5> weights{w.x_err, w.y_err, w.psi_err, w.v_dev, w.omega_dev};
  const std::array<double, 5> residuals{e.x_err, e.y_err, e.psi_err, e.v - ref.v_ref(),
                                        e.omega - ref.rate.psi_dot};
  for (int i = 0; i < 5; ++i) {
    const double s = std::sqrt(weights[static_cast<std::size_t>(i)]);
    ls.add(s * residuals[static_cast<std::size_t>(i)], s * state_row(E, i));
  }
}

void add_actions(LeastSquares& ls, double w_a, double w_alpha, const Action& u) {
  ls.add(std::sqrt(w_a) * u.a, std::sqrt(w_a) * unit_row(5));
  ls.add(std::sqrt(w_alpha) * u.alpha, std::sqrt(w_alpha) * unit_row(6));
}

void add_velocity_limits(LeastSquares& ls, const MpcConfig& cfg, const WorldState& x) {
  if (cfg.velocity_penalty <= 0.0) return;
  const double s = std::sqrt(cfg.velocity_penalty);
  auto excess = [&](double value, double limit, int index) {
    if (value > limit) ls.add(s * (value - limit), s * unit_row(index));
    if (value < -limit) ls.add(s * (value + limit), s * unit_row(index));
  };
  excess(x.v, cfg.limits.v_max, 3);
  excess(x.omega, cfg.limits.omega_max, 4);
}

ValueNetwork::ValueAndJacobian critic_at(const ValueNetwork* critic, const FrenetError& e) {
  if (critic == nullptr) throw std::invalid_argument("critic-based MPC mode requires a critic");
  const auto vj = critic->value_and_jacobian(e.to_vector());
  if (!std::isfinite(vj.value) || !vj.jacobian.allFinite()) {
    throw NonFiniteCritic("critic returned a non-finite value");
  }
  return vj;
}

void finish(StageQuadratic& q, double discount, double mu) {
  q.value *= discount;
  q.grad *= discount;
  q.hess *= discount;
  q.hess += mu * Mat7::Identity();
}

}  // namespace

StageQuadratic tdmpc_stage_cost(const MpcConfig& cfg, const WorldState& x, const Action& u,
                                const StageReference& ref) {
  const FrenetError e = to_frenet(x, ref.pose, cfg.l_m);
  const Mat5 E = frenet_state_jacobian(x, ref.pose, cfg.l_m);
  LeastSquares ls;
  add_tracking(ls, e, E);
  add_actions(ls, cfg.action_weight_scale * cfg.expert.a, cfg.action_weight_scale * cfg.expert.alpha,
              u);
  return ls.q;
}

StageQuadratic stage_terms(const MpcConfig& cfg, const WorldState& x, const Action& u,
                           const StageReference& ref, int k, const ValueNetwork* critic) {
  const FrenetError e = to_frenet(x, ref.pose, cfg.l_m);
  const Mat5 E = frenet_state_jacobian(x, ref.pose, cfg.l_m);
  LeastSquares ls;
  const double wa = cfg.action_weight_scale * cfg.expert.a;
  const double walpha = cfg.action_weight_scale * cfg.expert.alpha;
  switch (cfg.mode) {
    case CostMode::naive:
    case CostMode::tdmpc:
      ls.q = tdmpc_stage_cost(cfg, x, u, ref);
      break;
    case CostMode::expert:
      add_expert_state(ls, cfg.expert, e, E, ref);
      add_actions(ls, cfg.expert.a, cfg.expert.alpha, u);
      break;
    case CostMode::dmpc:
      add_actions(ls, wa, walpha, u);
      break;
  }
  add_velocity_limits(ls, cfg, x);

  if (cfg.mode == CostMode::dmpc) {
    // Stage value dt * dV/dt along the nominal dynamics (moving reference
    // included); only the critic's first derivatives enter the model.
    const auto vj = critic_at(critic, e);
    const FrenetRate fr = frenet_rate(x, u, ref.pose, ref.rate, cfg.l_m);
    const double lie = cfg.delta_t_s * vj.jacobian.dot(fr.rate);
    Vec7 g;
    g.head<5>() = -cfg.delta_t_s * fr.d_state.transpose() * vj.jacobian;
    g.tail<2>() = -cfg.delta_t_s * fr.d_action.transpose() * vj.jacobian;
    ls.q.value -= lie;
    ls.q.grad += g;
    ls.q.hess += g * g.transpose();
  }
  finish(ls.q, std::pow(cfg.gamma, k), cfg.mu);
  return ls.q;
}

StageQuadratic terminal_terms(const MpcConfig& cfg, const WorldState& x,
                              const StageReference& ref, const ValueNetwork* critic) {
  const FrenetError e = to_frenet(x, ref.pose, cfg.l_m);
  const Mat5 E = frenet_state_jacobian(x, ref.pose, cfg.l_m);
  LeastSquares ls;
  switch (cfg.mode) {
    case CostMode::naive:
      add_tracking(ls, e, E);
      break;
    case CostMode::expert:
      add_expert_state(ls, cfg.expert, e, E, ref);
      break;
    case CostMode::tdmpc:
    case CostMode::dmpc: {
      const auto vj = critic_at(critic, e);
      Vec7 g = Vec7::Zero();
      g.head<5>() = -E.transpose() * vj.jacobian;
      ls.q.value -= vj.value;
      ls.q.grad += g;
      ls.q.hess += g * g.transpose();
      break;
    }
  }
  add_velocity_limits(ls, cfg, x);
  finish(ls.q, std::pow(cfg.gamma, cfg.horizon), cfg.mu);
  return ls.q;
}

QpProblem condense(const std::vector<DiscreteJacobians>& dynamics,
                   const std::vector<StageQuadratic>& stages, const StageQuadratic& terminal,
                   const std::vector<Action>& actions, const ActuatorLimits& limits) {
  const std::size_t n = actions.size();
  if (n == 0 || dynamics.size() != n || stages.size() != n) {
    throw std::invalid_argument("condense: expected N dynamics, N stages and N actions");
  }
  const Eigen::Index d = static_cast<Eigen::Index>(2 * n);
  QpProblem qp{MatrixXd::Zero(d, d), VectorXd::Zero(d), VectorXd(d), VectorXd(d)};

  // S = d x_k / d U, built forward along the horizon.
  MatrixXd S = MatrixXd::Zero(5, d);
  MatrixXd Z(7, d);
  for (std::size_t k = 0; k < n; ++k) {
    const auto col = static_cast<Eigen::Index>(2 * k);
    const auto width = col + 2;  // only the first 2k + 2 columns can be non-zero
    Z.setZero();
    Z.topLeftCorner(5, width) = S.leftCols(width);
    Z(5, col) = 1.0;
    Z(6, col + 1) = 1.0;
    const MatrixXd Zw = Z.leftCols(width);
    qp.H.topLeftCorner(width, width).noalias() += Zw.transpose() * stages[k].hess * Zw;
    qp.g.head(width).noalias() += Zw.transpose() * stages[k].grad;

    MatrixXd next = dynamics[k].A * S;
    next.middleCols(col, 2) += dynamics[k].B;
    S = std::move(next);
  }
  const Mat5 Hn = terminal.hess.topLeftCorner<5, 5>();
  qp.H.noalias() += S.transpose() * Hn * S;
  qp.g.noalias() += S.transpose() * terminal.grad.head<5>();
  qp.H = 0.5 * (qp.H + qp.H.transpose());

  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(2 * k);
    qp.lb(i) = -limits.a_max - actions[k].a;
    qp.ub(i) = limits.a_max - actions[k].a;
    qp.lb(i + 1) = -limits.alpha_max - actions[k].alpha;
    qp.ub(i + 1) = limits.alpha_max - actions[k].alpha;
  }
  return qp;
}

void write_planner_csv(const std::filesystem::path& path, const std::vector<PlannerLogRow>& rows) {
  CsvWriter csv(path, {"t", "mode", "sqp_iters_done", "qp_status", "qp_iters", "objective",
                       "solve_time_ms", "fault_count"});
  for (const auto& r : rows) {
    csv.field(r.t).field(to_string(r.mode)).field(r.sqp_iters_done).field(to_string(r.qp_status));
    csv.field(r.qp_iters).field(r.objective).field(r.solve_time_ms).field(r.fault_count);
    csv.end_row();
  }
}

MpcActor::MpcActor(MpcConfig cfg, const Reference& reference)
    : cfg_(std::move(cfg)), reference_(&reference) {
  cfg_.validate();
  if (reference.empty()) throw std::invalid_argument("MPC actor needs a non-empty reference");
  reset();
}

void MpcActor::reset() {
  actions_.assign(static_cast<std::size_t>(cfg_.horizon), Action{});
  warm_delta_.reset();
  plan_ = {};
  last_cmd_ = {};
  have_cmd_ = false;
  consecutive_faults_ = 0;
  total_faults_ = 0;
  log_.clear();
}

StageReference MpcActor::reference_at(double t) const {
  return {reference_->at(t), reference_->rate_at(t)};
}

Plan MpcActor::evaluate(const WorldState& x0, double t, const std::vector<Action>& actions,
                        const ValueNetwork* critic) const {
  Plan plan;
  plan.actions = actions;
  plan.states.reserve(actions.size() + 1);
  plan.states.push_back(x0);
  for (const Action& u : actions) {
    plan.states.push_back(integrate_nominal(plan.states.back(), u, cfg_.delta_t_s, cfg_.limits));
  }
  const int n = static_cast<int>(actions.size());
  for (int k = 0; k <= n; ++k) {
    const StageReference ref = reference_at(t + k * cfg_.delta_t_s);
    const WorldState& x = plan.states[static_cast<std::size_t>(k)];
    plan.errors.push_back(to_frenet(x, ref.pose, cfg_.l_m));
    if (k < n) {
      plan.objective += stage_terms(cfg_, x, actions[static_cast<std::size_t>(k)], ref, k, critic).value;
    } else {
      plan.objective += terminal_terms(cfg_, x, ref, critic).value;
    }
  }
  return plan;
}

ControlOutput MpcActor::control_step(const WorldState& measured, double t,
                                     const ValueNetwork* critic) {
  WorldState x0 = measured;
  if (cfg_.plan_from_commands && have_cmd_) {
    x0.v = last_cmd_.v;
    x0.omega = last_cmd_.omega;
  }
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<std::size_t>(cfg_.horizon);
  ControlOutput out;
  PlannerLogRow row;
  row.t = t;
  row.mode = cfg_.mode;

  std::vector<StageReference> refs(n + 1);
  for (std::size_t k = 0; k <= n; ++k) refs[k] = reference_at(t + static_cast<double>(k) * cfg_.delta_t_s);

  VectorXd last_delta;
  try {
    if (!x0.is_finite()) throw std::domain_error("non-finite state feedback");
    std::vector<WorldState> states(n + 1);
    std::vector<DiscreteJacobians> dyn(n);
    std::vector<StageQuadratic> stages(n);
    for (int it = 0; it < cfg_.sqp_iters; ++it) {
      states[0] = x0;
      for (std::size_t k = 0; k < n; ++k) {
        states[k + 1] = integrate_nominal(states[k], actions_[k], cfg_.delta_t_s, cfg_.limits);
        dyn[k] = linearize_dynamics(states[k], actions_[k], cfg_);
        stages[k] = stage_terms(cfg_, states[k], actions_[k], refs[k], static_cast<int>(k), critic);
      }
      const StageQuadratic terminal = terminal_terms(cfg_, states[n], refs[n], critic);
      const QpProblem qp = condense(dyn, stages, terminal, actions_, cfg_.limits);

      std::optional<VectorXd> warm;
      if (it == 0 && warm_delta_) warm = warm_delta_;
      const QpSolution sol = solver_.solve(qp, warm, cfg_.qp_max_iter);
      if (compare_cold_ && it == 0) out.qp_iters_cold = solver_.solve(qp, {}, cfg_.qp_max_iter).iterations;
      out.qp_status = sol.status;
      out.qp_iters += sol.iterations;
      row.qp_status = sol.status;
      row.qp_iters += sol.iterations;
      if (sol.status == QpStatus::infeasible_bounds || !sol.x.allFinite()) {
        throw std::runtime_error("QP subproblem failed");
      }
      out.predicted_decrease = -(qp.g.dot(sol.x) + 0.5 * sol.x.dot(qp.H * sol.x));
      for (std::size_t k = 0; k < n; ++k) {
        const auto i = static_cast<Eigen::Index>(2 * k);
        actions_[k].a = std::clamp(actions_[k].a + sol.x(i), -cfg_.limits.a_max, cfg_.limits.a_max);
        actions_[k].alpha = std::clamp(actions_[k].alpha + sol.x(i + 1), -cfg_.limits.alpha_max,
                                       cfg_.limits.alpha_max);
      }
      last_delta = sol.x;
      row.sqp_iters_done = it + 1;
    }
    plan_ = evaluate(x0, t, actions_, critic);
    const WorldState& next = plan_.states[1];
    if (!std::isfinite(plan_.objective) || !next.is_finite()) {
      throw std::domain_error("non-finite plan");
    }
    out.cmd = {next.v, next.omega};
    consecutive_faults_ = 0;
  } catch (const NonFiniteCritic&) {
    out.fault = true;
    out.cmd = {};
  } catch (const std::exception&) {
    out.fault = true;
    out.cmd = last_cmd_;
  }

  if (out.fault) {
    ++consecutive_faults_;
    ++total_faults_;
    actions_.assign(n, Action{});
    warm_delta_.reset();
    out.abort = consecutive_faults_ >= 3;
  } else {
    // Shift the plan by one step for the next warm start, duplicating the tail.
    for (std::size_t k = 0; k + 1 < n; ++k) actions_[k] = actions_[k + 1];
    VectorXd shifted(last_delta.size());
    shifted.head(last_delta.size() - 2) = last_delta.tail(last_delta.size() - 2);
    shifted.tail(2) = last_delta.tail(2);
    warm_delta_ = std::move(shifted);
  }
  last_cmd_ = out.cmd;
  have_cmd_ = true;

  row.objective = plan_.objective;
  row.fault_count = total_faults_;
  row.solve_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  log_.push_back(row);
  return out;
}

}  // namespace vlmpc
