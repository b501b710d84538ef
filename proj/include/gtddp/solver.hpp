/*
 Copyright 2026 The gtddp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include "gtddp/common.hpp"
#include "gtddp/cost.hpp"
#include "gtddp/dynamics.hpp"
#include "gtddp/trajectory.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace gtddp
{

/// Second-order expansion of the Hamiltonian Q = L_gamma + V_x' F around the
/// nominal (x, u, w).
struct QExpansion
{
    VectorXd Q_x, Q_u, Q_w;
    MatrixXd Q_xx, Q_uu, Q_ww, Q_ux, Q_wx, Q_uw;
};

/// Affine min-max update: du = l_u + K_u dx, dw = l_w + K_w dx.
struct Gains
{
    VectorXd l_u, l_w;
    MatrixXd K_u, K_w;
};

/// Gains on every interval k < K plus the local value model (V, V_x, V_xx) on
/// every knot k <= K.
struct GainSchedule
{
    std::vector<VectorXd> l_u, l_w;
    std::vector<MatrixXd> K_u, K_w;
    std::vector<double> V;
    std::vector<VectorXd> V_x;
    std::vector<MatrixXd> V_xx;

    double max_Q_u = 0.0;  ///< max over knots of ||Q_u||_inf
    double max_Q_w = 0.0;  ///< max over knots of ||Q_w||_inf
    double max_stationarity_residual = 0.0;  ///< worst residual of the coupled first-order conditions
    double expected_linear = 0.0;  ///< sum_k dt (l_u'Q_u + l_w'Q_w)
    double reg = 0.0;

    std::size_t steps() const { return l_u.size(); }
};

struct SolverConfig
{
    double dt = 0.01;
    std::size_t horizon = 300;  ///< number of intervals K
    std::size_t max_iters = 100;
    double cost_tol = 1e-6;     ///< relative cost decrease below which the solve has converged
    double reg_init = 1e-6;
    double reg_scale = 10.0;
    double reg_max = 1e8;
    std::vector<double> line_search_alphas = default_alphas();
    double accept_ratio = 0.0;
    /// Initial nominal controls; empty means zero controls.
    std::vector<VectorXd> initial_controls;
    /// Adds the dt F'V_xx F products to every Q block except Q_ww, which makes
    /// the minimizer's side of each backward step exact dynamic programming on
    /// the Euler-discretized dynamics. Without them the explicit Euler value
    /// recursion is unstable for stiff closed loops.
    bool discrete_correction = true;
    /// Multiplies every feedback gain. Only the verification suite changes it,
    /// to check that the LQ oracle catches a sign error.
    double gain_sign_hook = 1.0;

    static std::vector<double> default_alphas();
    void validate() const;
};

struct IterationLog
{
    std::size_t iter = 0;
    double cost = 0.0;          ///< J_gamma
    double cost_nominal = 0.0;  ///< J (penalty dropped)
    double alpha = 0.0;
    double lambda = 0.0;
    double grad_norm = 0.0;     ///< max(||Q_u||, ||Q_w||) of the backward pass behind this step
};

struct SolveResult
{
    TrajectoryIterate trajectory;
    GainSchedule gains;  ///< from the backward pass around `trajectory`
    std::vector<IterationLog> log;
    std::size_t accepted_iterations = 0;
    bool converged = false;
};

/// The line search and regularization schedule were exhausted without a cost
/// decrease, or a backward pass failed (saddle conditions lost beyond reg_max,
/// value divergence). Carries the best iterate found.
class StalledError : public NumericError
{
public:
    StalledError(const std::string &what, SolveResult best) : NumericError(what), best_(std::move(best)) {}
    const SolveResult &best() const { return best_; }

private:
    SolveResult best_;
};

QExpansion q_expansion(const Linearization &lin, const CostExpansion &cost, const VectorXd &V_x, const MatrixXd &V_xx);

/// Coupled min-max gains from Schur complements of the Q-expansion. `reg` is
/// added to Q_uu and subtracted from Q_ww. Throws NonSaddleError (knot
/// `knot`) if the regularized expansion is not a strict saddle.
Gains compute_gains(const QExpansion &q, double reg, std::size_t knot = 0);

/// Q_xx += dt F_x'V_xx F_x, Q_uu += dt F_u'V_xx F_u, and likewise for Q_ux,
/// Q_wx and Q_uw. Q_ww is left at -2 gamma^2 I.
void add_step_curvature(QExpansion &q, const Linearization &lin, const MatrixXd &V_xx, double dt);

/// Values of the local quadratic game at dx = 0 solved in both orders. They
/// agree when the Isaacs interchange holds; an order whose inner problem is
/// unbounded reports +inf (min-max) or -inf (max-min).
struct IsaacsCheck
{
    double min_max = 0.0;
    double max_min = 0.0;
    double gap() const { return std::abs(min_max - max_min); }
};

/// Diagnostic only; the solver assumes the interchange.
IsaacsCheck isaacs_check(const QExpansion &q);

/// Residual of the coupled first-order conditions for the feedforward gains.
double stationarity_residual(const QExpansion &q, const Gains &g);

/// Linearizations and cost expansions along a frozen iterate.
struct LocalModels
{
    std::vector<Linearization> dynamics;
    std::vector<CostExpansion> cost;
    TerminalExpansion terminal;
};

LocalModels local_models(const TrajectoryIterate &traj, const GameDynamics &dyn, const QuadraticGameCost &cost);

/// Integrates the value expansion backward from the terminal cost with explicit
/// Euler steps, computing the gains on every interval. Per-knot saddle failures
/// escalate the regularization from `reg` up to cfg.reg_max.
GainSchedule backward_pass(const TrajectoryIterate &traj, const LocalModels &models, const SolverConfig &cfg,
                           double reg = 0.0);
GainSchedule backward_pass(const TrajectoryIterate &traj, const GameDynamics &dyn, const QuadraticGameCost &cost,
                           const SolverConfig &cfg, double reg = 0.0);

/// Rolls the updated policies out from the iterate's initial state. Throws
/// DivergenceError on non-finite states.
TrajectoryIterate forward_pass(const TrajectoryIterate &traj, const GainSchedule &gains, double alpha,
                               const GameDynamics &dyn, const QuadraticGameCost &cost);

/// Open-loop Euler rollout of the given controls (zero disturbance).
TrajectoryIterate initial_rollout(const VectorXd &x0, const GameDynamics &dyn, const QuadraticGameCost &cost,
                                  const SolverConfig &cfg);

/// Game-theoretic DDP: alternates backward passes and line-searched forward
/// passes until the relative cost decrease drops below cfg.cost_tol.
SolveResult solve(const VectorXd &x0, const GameDynamics &dyn, const QuadraticGameCost &cost, const SolverConfig &cfg);

/// u(x, k) = u*_k + K_u,k (x - x*_k) along a solved trajectory.
class FeedbackPolicy
{
public:
    FeedbackPolicy() = default;
    FeedbackPolicy(std::vector<VectorXd> x_star, std::vector<VectorXd> u_star, std::vector<MatrixXd> K_u, double dt,
                   double t0 = 0.0);

    VectorXd operator()(const VectorXd &x, std::size_t k) const;
    std::size_t horizon() const { return u_star_.size(); }
    double dt() const { return dt_; }
    double t0() const { return t0_; }
    const std::vector<VectorXd> &x_star() const { return x_star_; }
    const std::vector<VectorXd> &u_star() const { return u_star_; }
    const std::vector<MatrixXd> &K_u() const { return K_u_; }

private:
    std::vector<VectorXd> x_star_, u_star_;
    std::vector<MatrixXd> K_u_;
    double dt_ = 0.0;
    double t0_ = 0.0;
};

FeedbackPolicy feedback_policy(const SolveResult &result);

} // namespace gtddp
