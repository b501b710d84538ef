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
#include "gtddp/trajectory.hpp"

namespace gtddp
{

/// Soft-constrained quadratic game cost
///   L_gamma = (x - x_f)' Q (x - x_f) + u' R_u u - gamma^2 w' w,
///   phi     = (x - x_f)' Q_f (x - x_f).
/// No 1/2 factors, so gradients carry a factor of two.
struct QuadraticGameCost
{
    MatrixXd Q;
    MatrixXd R_u;
    MatrixXd Q_f;
    VectorXd x_f;
    double gamma = 1.0;
    /// Disturbance dimension q (the cost does not otherwise depend on it).
    std::size_t disturbance_dim = 0;

    std::size_t state_dim() const { return static_cast<std::size_t>(x_f.size()); }
    std::size_t control_dim() const { return static_cast<std::size_t>(R_u.rows()); }

    /// Throws InputError on shape or definiteness violations.
    void validate() const;
};

struct CostExpansion
{
    double L = 0.0;
    VectorXd L_x, L_u, L_w;
    MatrixXd L_xx, L_uu, L_ww, L_ux, L_wx, L_uw;
};

struct TerminalExpansion
{
    double value = 0.0;
    VectorXd gradient;
    MatrixXd hessian;
};

CostExpansion running_cost(const QuadraticGameCost &c, const VectorXd &x, const VectorXd &u, const VectorXd &w);

/// Running cost value only (cheap path for rollouts).
double running_cost_value(const QuadraticGameCost &c, const VectorXd &x, const VectorXd &u, const VectorXd &w);

TerminalExpansion terminal_cost(const QuadraticGameCost &c, const VectorXd &x);

/// Rectangle-rule cost of a trajectory: sum_k dt L(x_k, u_k, w_k) + phi(x_K).
/// With `include_penalty` false the -gamma^2 w'w term is dropped.
double trajectory_cost(const QuadraticGameCost &c, const TrajectoryIterate &traj, bool include_penalty = true);

/// Quadcopter steering task: goal (3, 5, 1) with yaw pi, terminal weights
/// 1e7 / 1e6 / 1e5 on position / angles and velocity / body rates, Q = 1e-5 Q_f,
/// R_u = 1e-4 I and gamma = 0.05.
QuadraticGameCost quadcopter_cost_preset(std::size_t n = 16, std::size_t m = 4);

} // namespace gtddp
