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

// Reference implementations used only by tests and the acceptance suite. They
// share no numerical code with the library: dense LU solves instead of
// Cholesky factors, a straight-line quadcopter transcription, and an RK4
// Riccati integrator.

#include "gtddp/common.hpp"
#include "gtddp/dynamics.hpp"
#include "gtddp/gp.hpp"

#include <functional>
#include <vector>

namespace gtddp::oracle
{

/// Scalar GP posterior evaluated by dense linear solves.
class DenseGp
{
public:
    DenseGp(MatrixXd inputs, VectorXd targets, GpHyperparams h);

    double kernel(const VectorXd &a, const VectorXd &b) const;
    double mean(const VectorXd &q) const;
    double var(const VectorXd &q) const;
    /// Posterior covariance between the latent values at a and b.
    double cov(const VectorXd &a, const VectorXd &b) const;
    VectorXd grad_mean(const VectorXd &q) const;
    /// sigma_s^2 M - dk(q,X) A^-1 dk(X,q).
    MatrixXd grad_var(const VectorXd &q) const;
    double log_marginal_likelihood() const;

private:
    VectorXd kvec(const VectorXd &q) const;
    MatrixXd kgrad(const VectorXd &q) const;  // (n+m) x N, column i = d k(q, x_i) / dq

    MatrixXd X_;
    VectorXd y_;
    GpHyperparams h_;
    MatrixXd A_;  // K + sigma_w^2 I
    Eigen::FullPivLU<MatrixXd> lu_;
    VectorXd alpha_;
};

/// Log marginal likelihood of one target column as a function of the log
/// hyperparameters, evaluated with DenseGp.
double dense_log_likelihood(const MatrixXd &inputs, const VectorXd &targets, const VectorXd &log_params);

/// Central differences of a vector function, step h * max(1, |x_i|).
MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd &)> &f, const VectorXd &x, double h);
VectorXd fd_gradient(const std::function<double(const VectorXd &)> &f, const VectorXd &x, double h);

/// Mixed central second difference of c(a, b) at a = b = q.
MatrixXd fd_mixed_hessian(const std::function<double(const VectorXd &, const VectorXd &)> &c, const VectorXd &q,
                          double h);

/// Straight-line quadcopter vector field (explicit inverse of the Euler-rate
/// map, rotation written out entry by entry).
VectorXd quadcopter(const VectorXd &x, const VectorXd &u, const QuadcopterParams &p);

/// Continuous-time LQ game
///   x' = A x + B u + D w,
///   J  = int x'Qx + u'Ru - gamma^2 w'w dt + x(T)' Q_f x(T),
/// with value x'P(t)x, -P' = Q + A'P + PA - P B R^-1 B' P + gamma^-2 P D D' P.
struct LqGame
{
    MatrixXd A, B, D, Q, R, Q_f;
    double gamma = 1.0;
    double horizon = 1.0;
};

struct RiccatiSolution
{
    double dt = 0.0;               ///< output grid spacing
    std::vector<MatrixXd> P;       ///< P(k dt), k = 0..K
    std::vector<MatrixXd> K_u;     ///< -R^-1 B' P
    std::vector<MatrixXd> K_w;     ///< gamma^-2 D' P
    double value(const VectorXd &x0) const { return x0.dot(P.front() * x0); }
};

/// RK4 backward from P(T) = Q_f with `substeps` RK4 steps per output interval.
RiccatiSolution solve_game_riccati(const LqGame &g, std::size_t intervals, std::size_t substeps = 20);

} // namespace gtddp::oracle
