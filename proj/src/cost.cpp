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
#include "gtddp/cost.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace gtddp
{

namespace
{
bool is_symmetric(const MatrixXd &a)
{
    return (a - a.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, a.lpNorm<Eigen::Infinity>());
}

double min_eigenvalue(const MatrixXd &a) { return Eigen::SelfAdjointEigenSolver<MatrixXd>(a).eigenvalues().minCoeff(); }
} // namespace

void QuadraticGameCost::validate() const
{
    const auto n = x_f.size();
    if (Q.rows() != n || Q.cols() != n || Q_f.rows() != n || Q_f.cols() != n)
        throw ShapeError("cost: Q and Q_f must be n x n with n = size of x_f");
    if (R_u.rows() != R_u.cols() || R_u.rows() == 0)
        throw ShapeError("cost: R_u must be square");
    if (!is_symmetric(Q) || !is_symmetric(Q_f) || !is_symmetric(R_u))
        throw InputError("cost: weight matrices must be symmetric");
    const double tol = 1e-12;
    if (min_eigenvalue(Q) < -tol * std::max(1.0, Q.norm()) || min_eigenvalue(Q_f) < -tol * std::max(1.0, Q_f.norm()))
        throw InputError("cost: Q and Q_f must be positive semidefinite");
    if (!(min_eigenvalue(R_u) > 0.0))
        throw InputError("cost: R_u must be positive definite");
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw InputError("cost: gamma must be positive");
}

double running_cost_value(const QuadraticGameCost &c, const VectorXd &x, const VectorXd &u, const VectorXd &w)
{
    require_shape(x.size() == c.x_f.size() && u.size() == c.R_u.rows(), "running_cost: shape mismatch");
    const VectorXd e = x - c.x_f;
    return e.dot(c.Q * e) + u.dot(c.R_u * u) - c.gamma * c.gamma * w.squaredNorm();
}

CostExpansion running_cost(const QuadraticGameCost &c, const VectorXd &x, const VectorXd &u, const VectorXd &w)
{
    require_shape(x.size() == c.x_f.size() && u.size() == c.R_u.rows(), "running_cost: shape mismatch");
    const auto n = x.size(), m = u.size(), q = w.size();
    const double g2 = c.gamma * c.gamma;
    const VectorXd e = x - c.x_f;

    CostExpansion out;
    out.L = e.dot(c.Q * e) + u.dot(c.R_u * u) - g2 * w.squaredNorm();
    out.L_x = 2.0 * c.Q * e;
    out.L_u = 2.0 * c.R_u * u;
    out.L_w = -2.0 * g2 * w;
    out.L_xx = 2.0 * c.Q;
    out.L_uu = 2.0 * c.R_u;
    out.L_ww = -2.0 * g2 * MatrixXd::Identity(q, q);
    out.L_ux = MatrixXd::Zero(m, n);
    out.L_wx = MatrixXd::Zero(q, n);
    out.L_uw = MatrixXd::Zero(m, q);
    return out;
}

TerminalExpansion terminal_cost(const QuadraticGameCost &c, const VectorXd &x)
{
    require_shape(x.size() == c.x_f.size(), "terminal_cost: shape mismatch");
    const VectorXd e = x - c.x_f;
    TerminalExpansion out;
    out.value = e.dot(c.Q_f * e);
    out.gradient = 2.0 * c.Q_f * e;
    out.hessian = 2.0 * c.Q_f;
    return out;
}

double trajectory_cost(const QuadraticGameCost &c, const TrajectoryIterate &traj, bool include_penalty)
{
    require_shape(traj.x.size() == traj.u.size() + 1, "trajectory_cost: need K+1 states for K controls");
    double J = 0.0;
    const double g2 = c.gamma * c.gamma;
    for (std::size_t k = 0; k < traj.u.size(); ++k)
    {
        const VectorXd e = traj.x[k] - c.x_f;
        double L = e.dot(c.Q * e) + traj.u[k].dot(c.R_u * traj.u[k]);
        if (include_penalty && k < traj.w.size())
            L -= g2 * traj.w[k].squaredNorm();
        J += traj.dt * L;
    }
    return J + terminal_cost(c, traj.x.back()).value;
}

QuadraticGameCost quadcopter_cost_preset(std::size_t n, std::size_t m)
{
    require_shape(n >= 12 && m >= 1, "quadcopter_cost_preset: needs the 16-state quadcopter layout");
    const auto N = static_cast<Eigen::Index>(n);
    VectorXd qf = VectorXd::Zero(N);
    qf.segment(0, 3).setConstant(1e7);
    qf.segment(3, 6).setConstant(1e6);
    qf.segment(9, 3).setConstant(1e5);

    QuadraticGameCost c;
    c.Q_f = qf.asDiagonal();
    c.Q = 1e-5 * c.Q_f;
    c.R_u = 1e-4 * MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    c.gamma = 0.05;
    c.x_f = VectorXd::Zero(N);
    c.x_f[0] = 3.0;
    c.x_f[1] = 5.0;
    c.x_f[2] = 1.0;
    c.x_f[5] = std::numbers::pi;
    c.disturbance_dim = m;
    return c;
}

} // namespace gtddp
