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

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vlmpc/critic.hpp"
#include "vlmpc/dynamics.hpp"
#include "vlmpc/frenet.hpp"
#include "vlmpc/qp.hpp"
#include "vlmpc/reference.hpp"

namespace vlmpc {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

enum class CostMode { naive, expert, tdmpc, dmpc };
CostMode parse_cost_mode(std::string_view name);
std::string to_string(CostMode mode);
inline bool uses_critic(CostMode m) { return m == CostMode::tdmpc || m == CostMode::dmpc; }

/// Diagonal penalties of the hand-tuned tracking cost.
struct ExpertWeights {
  double x_err = 10.0;
  double y_err = 10.0;
  double psi_err = 1.0;
  double v_dev = 0.5;
  double omega_dev = 0.1;
  double a = 0.05;
  double alpha = 0.05;
};

struct MpcConfig {
  int horizon = 20;
  double delta_t_s = 0.1;
  double gamma = 0.99;
  CostMode mode = CostMode::expert;
  int sqp_iters = 1;
  double mu = 1e-3;  // Levenberg-Marquardt damping
  ActuatorLimits limits;
  double velocity_penalty = 100.0;  // weight on velocity excess beyond the limits
  ExpertWeights expert;
  /// Action weights of the non-expert modes relative to the expert's.
  double action_weight_scale = 0.1;
  double l_m = 0.2;
  int qp_max_iter = 0;
  /// Plan from the previously commanded velocities instead of the measured
  /// ones; the measured pose is always used. The velocity states of the
  /// model then stand for the velocity inputs whose rates the accelerations
  /// bound.
  bool plan_from_commands = true;

  void validate() const;
};

/// Quadratic model of one cost term over z = (x, y, psi, v, omega, a, alpha).
/// The cost is the negated objective so that lower is better.
struct StageQuadratic {
  double value = 0.0;
  Vec7 grad = Vec7::Zero();
  Mat7 hess = Mat7::Zero();
};

/// Thrown by the stage models when the critic produces a non-finite value.
class NonFiniteCritic : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Reference data at one horizon node.
struct StageReference {
  RefPose pose;
  RefRate rate;
  double v_ref() const;
};

/// gamma^k-discounted stage model with Gauss-Newton Hessian plus mu I.
/// The DMPC stage gradient holds the critic Jacobian fixed (first
/// derivatives of the critic only). Throws std::invalid_argument if a critic
/// mode is used without a critic and NonFiniteCritic if the critic returns a
/// non-finite value.
StageQuadratic stage_terms(const MpcConfig& cfg, const WorldState& x, const Action& u,
                           const StageReference& ref, int k, const ValueNetwork* critic);

/// gamma^N-discounted terminal model (action block is zero apart from damping).
StageQuadratic terminal_terms(const MpcConfig& cfg, const WorldState& x,
                              const StageReference& ref, const ValueNetwork* critic);

/// Undiscounted TDMPC running cost: planar tracking error plus a small action
/// penalty (the tracking quadratic is the least-squares residual of the dense
/// reward), with its Gauss-Newton model.
StageQuadratic tdmpc_stage_cost(const MpcConfig& cfg, const WorldState& x, const Action& u,
                                const StageReference& ref);

/// x_{k+1} = A_k x_k + B_k u_k linearization of the RK4 prediction step.
inline DiscreteJacobians linearize_dynamics(const WorldState& x, const Action& u,
                                            const MpcConfig& cfg) {
  return integrate_nominal_jacobians(x, u, cfg.delta_t_s, cfg.limits);
}

/// Eliminates the states by single shooting. The decision variable is the
/// stacked action increment of dimension 2N; bounds keep the updated actions
/// inside the actuator box. Throws std::invalid_argument on size mismatch.
QpProblem condense(const std::vector<DiscreteJacobians>& dynamics,
                   const std::vector<StageQuadratic>& stages, const StageQuadratic& terminal,
                   const std::vector<Action>& actions, const ActuatorLimits& limits);

/// Predicted trajectory of the nominal model.
struct Plan {
  std::vector<WorldState> states;  // N + 1
  std::vector<Action> actions;     // N
  std::vector<FrenetError> errors; // N + 1
  double objective = 0.0;          // cost (negated objective)
};

struct PlannerLogRow {
  double t = 0.0;
  CostMode mode = CostMode::expert;
  int sqp_iters_done = 0;
  QpStatus qp_status = QpStatus::optimal;
  int qp_iters = 0;
  double objective = 0.0;
  double solve_time_ms = 0.0;
  int fault_count = 0;
};

void write_planner_csv(const std::filesystem::path& path, const std::vector<PlannerLogRow>& rows);

struct ControlOutput {
  VelocityCommand cmd;
  bool fault = false;
  bool abort = false;  // too many consecutive faults
  int qp_iters = 0;
  int qp_iters_cold = -1;  // only filled when cold-start comparison is enabled
  QpStatus qp_status = QpStatus::optimal;
  double predicted_decrease = 0.0;
};

/// Receding-horizon controller with real-time iteration: each control step
/// performs cfg.sqp_iters Gauss-Newton SQP iterations warm-started from the
/// shifted previous plan, then commands the first predicted velocities.
class MpcActor {
 public:
  MpcActor(MpcConfig cfg, const Reference& reference);

  /// Critic may be null for naive/expert modes. The critic is read only.
  /// x0 is the measured state; see MpcConfig::plan_from_commands.
  ControlOutput control_step(const WorldState& x0, double t, const ValueNetwork* critic);

  void reset();
  const Plan& plan() const { return plan_; }
  const MpcConfig& config() const { return cfg_; }
  int fault_count() const { return total_faults_; }
  const std::vector<PlannerLogRow>& log() const { return log_; }
  /// Also solve each QP cold to compare iteration counts (diagnostic).
  void set_compare_cold_start(bool on) { compare_cold_ = on; }

  /// Nominal rollout and cost of an action sequence from x0 at time t.
  Plan evaluate(const WorldState& x0, double t, const std::vector<Action>& actions,
                const ValueNetwork* critic) const;

 private:
  StageReference reference_at(double t) const;

  MpcConfig cfg_;
  const Reference* reference_;
  BoxQpSolver solver_;
  std::vector<Action> actions_;
  std::optional<Eigen::VectorXd> warm_delta_;
  Plan plan_;
  VelocityCommand last_cmd_;
  bool have_cmd_ = false;
  int consecutive_faults_ = 0;
  int total_faults_ = 0;
  bool compare_cold_ = false;
  std::vector<PlannerLogRow> log_;
};

}  // namespace vlmpc
