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
#include "gtddp/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gtddp
{

std::vector<double> SolverConfig::default_alphas()
{
    std::vector<double> a;
    for (int i = 0; i <= 10; ++i)
        a.push_back(std::ldexp(1.0, -i));
    return a;
}

void SolverConfig::validate() const
{
    if (!(dt > 0.0) || horizon == 0 || max_iters == 0)
        throw InputError("solver: dt, horizon and max_iters must be positive");
    if (!(cost_tol > 0.0) || !(reg_init > 0.0) || !(reg_scale > 1.0) || !(reg_max >= reg_init))
        throw InputError("solver: cost_tol, reg_init must be positive and reg_scale > 1");
    if (line_search_alphas.empty())
        throw InputError("solver: line search needs at least one step size");
    for (std::size_t i = 0; i < line_search_alphas.size(); ++i)
    {
        const double a = line_search_alphas[i];
        if (!(a > 0.0 && a <= 1.0))
            throw InputError("solver: line search step sizes must lie in (0, 1]");
        if (i > 0 && !(a < line_search_alphas[i - 1]))
            throw InputError("solver: line search step sizes must be decreasing");
    }
    if (accept_ratio < 0.0)
        throw InputError("solver: accept_ratio must be nonnegative");
    if (!initial_controls.empty() && initial_controls.size() != horizon)
        throw InputError("solver: initial_controls must have one entry per interval");
}

QExpansion q_expansion(const Linearization &lin, const CostExpansion &c, const VectorXd &V_x, const MatrixXd &V_xx)
{
    require_shape(lin.F_x.rows() == V_x.size() && V_xx.rows() == V_x.size() && V_xx.cols() == V_x.size(),
                  "q_expansion: value expansion does not match the state dimension");
    require_shape(c.L_x.size() == V_x.size() && c.L_u.size() == lin.F_u.cols() && c.L_w.size() == lin.F_w.cols(),
                  "q_expansion: cost expansion does not match the dynamics");
    QExpansion q;
    q.Q_x = lin.F_x.transpose() * V_x + c.L_x;
    q.Q_u = lin.F_u.transpose() * V_x + c.L_u;
    q.Q_w = lin.F_w.transpose() * V_x + c.L_w;
    const MatrixXd VF = V_xx * lin.F_x;
    q.Q_xx = c.L_xx + VF + VF.transpose();
    q.Q_uu = c.L_uu;
    q.Q_ww = c.L_ww;
    q.Q_ux = lin.F_u.transpose() * V_xx + c.L_ux;
    q.Q_wx = lin.F_w.transpose() * V_xx + c.L_wx;
    q.Q_uw = c.L_uw;
    return q;
}

namespace
{
double extreme_eigenvalue(const MatrixXd &a, bool want_min)
{
    if (a.rows() == 0)
        return want_min ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(symmetrize(a), Eigen::EigenvaluesOnly).eigenvalues();
    return want_min ? ev.minCoeff() : ev.maxCoeff();
}
} // namespace

Gains compute_gains(const QExpansion &q, double reg, std::size_t knot)
{
    const auto m = q.Q_uu.rows();
    const auto nq = q.Q_ww.rows();
    const MatrixXd Quu = q.Q_uu + reg * MatrixXd::Identity(m, m);
    const MatrixXd Qww = q.Q_ww - reg * MatrixXd::Identity(nq, nq);
    const MatrixXd Qwu = q.Q_uw.transpose();

    auto fail = [&](const char *why) {
        throw NonSaddleError(std::string("expansion is not a saddle at knot ") + std::to_string(knot) + ": " + why,
                             knot, extreme_eigenvalue(Quu, true), extreme_eigenvalue(Qww, false));
    };

    Eigen::LLT<MatrixXd> uu(Quu);
    if (uu.info() != Eigen::Success)
        fail("Q_uu is not positive definite");
    // Q_ww is negative definite iff -Q_ww has a Cholesky factor.
    Eigen::LLT<MatrixXd> neg_ww(-Qww);
    if (nq > 0 && neg_ww.info() != Eigen::Success)
        fail("Q_ww is not negative definite");

    auto ww_solve = [&](const MatrixXd &b) -> MatrixXd {
        if (nq == 0)
            return MatrixXd::Zero(0, b.cols());
        return -neg_ww.solve(b);
    };

    // S_u = Quu - Quw Qww^-1 Qwu, S_w = Qww - Qwu Quu^-1 Quw
    const MatrixXd Su = symmetrize(Quu - q.Q_uw * ww_solve(Qwu));
    const MatrixXd Sw = symmetrize(Qww - Qwu * uu.solve(q.Q_uw));
    Eigen::LLT<MatrixXd> su(Su);
    if (su.info() != Eigen::Success)
        fail("control Schur complement is not positive definite");
    Eigen::LLT<MatrixXd> neg_sw(-Sw);
    if (nq > 0 && neg_sw.info() != Eigen::Success)
        fail("disturbance Schur complement is not negative definite");

    Gains g;
    g.l_u = -su.solve(q.Q_u - q.Q_uw * ww_solve(q.Q_w));
    g.K_u = -su.solve(q.Q_ux - q.Q_uw * ww_solve(q.Q_wx));
    if (nq > 0)
    {
        // -S_w^-1 b = (-S_w)^-1 b
        g.l_w = neg_sw.solve(q.Q_w - Qwu * uu.solve(q.Q_u));
        g.K_w = neg_sw.solve(q.Q_wx - Qwu * uu.solve(q.Q_ux));
    }
    else
    {
        g.l_w = VectorXd::Zero(0);
        g.K_w = MatrixXd::Zero(0, q.Q_ux.cols());
    }
    return g;
}

void add_step_curvature(QExpansion &q, const Linearization &lin, const MatrixXd &V_xx, double dt)
{
    const MatrixXd SFx = V_xx * lin.F_x;
    const MatrixXd SFu = V_xx * lin.F_u;
    q.Q_xx += dt * symmetrize(lin.F_x.transpose() * SFx);
    q.Q_uu += dt * symmetrize(lin.F_u.transpose() * SFu);
    // Q_ww keeps its continuous value -2 gamma^2 I, so every knot stays a strict
    // saddle whenever Q_uu is positive definite.
    q.Q_ux += dt * lin.F_u.transpose() * SFx;
    q.Q_wx += dt * lin.F_w.transpose() * SFx;
    q.Q_uw += dt * lin.F_u.transpose() * (V_xx * lin.F_w);
}

IsaacsCheck isaacs_check(const QExpansion &q)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    const MatrixXd Qwu = q.Q_uw.transpose();
    IsaacsCheck out;

    // min over du of the max over dw
    Eigen::LLT<MatrixXd> neg_ww(-q.Q_ww);
    out.min_max = inf;
    if (q.Q_ww.rows() == 0 || neg_ww.info() == Eigen::Success)
    {
        auto ww_inv = [&](const MatrixXd &b) -> MatrixXd {
            return q.Q_ww.rows() ? MatrixXd(-neg_ww.solve(b)) : MatrixXd::Zero(0, b.cols());
        };
        Eigen::LLT<MatrixXd> su(symmetrize(q.Q_uu - q.Q_uw * ww_inv(Qwu)));
        if (su.info() == Eigen::Success)
        {
            const VectorXd ww_qw = ww_inv(q.Q_w);
            const VectorXd c = q.Q_u - q.Q_uw * ww_qw;
            out.min_max = -0.5 * c.dot(su.solve(c)) - 0.5 * q.Q_w.dot(ww_qw);
        }
    }

    // max over dw of the min over du
    Eigen::LLT<MatrixXd> uu(q.Q_uu);
    out.max_min = -inf;
    if (uu.info() == Eigen::Success)
    {
        const MatrixXd Sw = symmetrize(q.Q_ww - Qwu * uu.solve(q.Q_uw));
        Eigen::LLT<MatrixXd> neg_sw(-Sw);
        if (Sw.rows() == 0 || neg_sw.info() == Eigen::Success)
        {
            const VectorXd d = q.Q_w - Qwu * uu.solve(q.Q_u);
            const double dw = d.size() ? d.dot(neg_sw.solve(d)) : 0.0;
            out.max_min = 0.5 * dw - 0.5 * q.Q_u.dot(uu.solve(q.Q_u));
        }
    }
    return out;
}

double stationarity_residual(const QExpansion &q, const Gains &g)
{
    const VectorXd ru = q.Q_u + q.Q_uu * g.l_u + q.Q_uw * g.l_w;
    const VectorXd rw = q.Q_w + q.Q_ww * g.l_w + q.Q_uw.transpose() * g.l_u;
    const double scale = std::max({1.0, q.Q_u.lpNorm<Eigen::Infinity>(), q.Q_w.size() ? q.Q_w.lpNorm<Eigen::Infinity>() : 0.0});
    const double r = std::max(ru.lpNorm<Eigen::Infinity>(), rw.size() ? rw.lpNorm<Eigen::Infinity>() : 0.0);
    return r / scale;
}

LocalModels local_models(const TrajectoryIterate &traj, const GameDynamics &dyn, const QuadraticGameCost &cost)
{
    const std::size_t K = traj.steps();
    require_shape(traj.x.size() == K + 1 && traj.w.size() == K, "local_models: iterate needs K+1 states, K controls and K disturbances");
    LocalModels out;
    out.dynamics.reserve(K);
    out.cost.reserve(K);
    for (std::size_t k = 0; k < K; ++k)
    {
        out.dynamics.push_back(dyn.linearize(traj.x[k], traj.u[k], traj.w[k]));
        out.cost.push_back(running_cost(cost, traj.x[k], traj.u[k], traj.w[k]));
    }
    out.terminal = terminal_cost(cost, traj.x.back());
    return out;
}

GainSchedule backward_pass(const TrajectoryIterate &traj, const LocalModels &models, const SolverConfig &cfg, double reg)
{
    const std::size_t K = traj.steps();
    require_shape(models.dynamics.size() == K && models.cost.size() == K, "backward_pass: local models do not match the iterate");
    const double dt = traj.dt;

    GainSchedule s;
    s.l_u.resize(K);
    s.l_w.resize(K);
    s.K_u.resize(K);
    s.K_w.resize(K);
    s.V.resize(K + 1);
    s.V_x.resize(K + 1);
    s.V_xx.resize(K + 1);
    s.reg = reg;

    s.V[K] = models.terminal.value;
    s.V_x[K] = models.terminal.gradient;
    s.V_xx[K] = symmetrize(models.terminal.hessian);

    for (std::size_t kk = K; kk-- > 0;)
    {
        QExpansion q = q_expansion(models.dynamics[kk], models.cost[kk], s.V_x[kk + 1], s.V_xx[kk + 1]);
        if (cfg.discrete_correction)
            add_step_curvature(q, models.dynamics[kk], s.V_xx[kk + 1], dt);

        Gains g;
        double lambda = reg;
        for (;;)
        {
            try
            {
                g = compute_gains(q, lambda, kk);
                break;
            }
            catch (const NonSaddleError &)
            {
                lambda = std::max(cfg.reg_init, lambda * cfg.reg_scale);
                if (lambda > cfg.reg_max)
                    throw;
            }
        }
        g.K_u *= cfg.gain_sign_hook;
        g.K_w *= cfg.gain_sign_hook;

        s.max_Q_u = std::max(s.max_Q_u, q.Q_u.lpNorm<Eigen::Infinity>());
        if (q.Q_w.size() > 0)
            s.max_Q_w = std::max(s.max_Q_w, q.Q_w.lpNorm<Eigen::Infinity>());
        if (lambda == 0.0)
            s.max_stationarity_residual = std::max(s.max_stationarity_residual, stationarity_residual(q, g));
        s.expected_linear += dt * (g.l_u.dot(q.Q_u) + g.l_w.dot(q.Q_w));

        const MatrixXd Qwu = q.Q_uw.transpose();
        const double dV = models.cost[kk].L + g.l_u.dot(q.Q_u) + g.l_w.dot(q.Q_w) + 0.5 * g.l_u.dot(q.Q_uu * g.l_u) +
                          g.l_u.dot(q.Q_uw * g.l_w) + 0.5 * g.l_w.dot(q.Q_ww * g.l_w);
        const VectorXd dVx = q.Q_x + g.K_u.transpose() * q.Q_u + g.K_w.transpose() * q.Q_w +
                             q.Q_ux.transpose() * g.l_u + q.Q_wx.transpose() * g.l_w +
                             g.K_u.transpose() * (q.Q_uu * g.l_u + q.Q_uw * g.l_w) +
                             g.K_w.transpose() * (Qwu * g.l_u + q.Q_ww * g.l_w);
        const MatrixXd KuQux = g.K_u.transpose() * q.Q_ux;
        const MatrixXd KwQwx = g.K_w.transpose() * q.Q_wx;
        const MatrixXd KwQwuKu = g.K_w.transpose() * Qwu * g.K_u;
        const MatrixXd dVxx = KuQux + KuQux.transpose() + KwQwx + KwQwx.transpose() + KwQwuKu +
                              KwQwuKu.transpose() + g.K_u.transpose() * q.Q_uu * g.K_u +
                              g.K_w.transpose() * q.Q_ww * g.K_w + q.Q_xx;

        s.V[kk] = s.V[kk + 1] + dt * dV;
        s.V_x[kk] = s.V_x[kk + 1] + dt * dVx;
        s.V_xx[kk] = symmetrize(s.V_xx[kk + 1] + dt * dVxx);
        if (!std::isfinite(s.V[kk]) || !s.V_x[kk].allFinite() || !s.V_xx[kk].allFinite())
            throw DivergenceError("value expansion diverged at knot " + std::to_string(kk) +
                                      "; try a smaller time step",
                                  -1, static_cast<long>(kk));

        s.l_u[kk] = std::move(g.l_u);
        s.l_w[kk] = std::move(g.l_w);
        s.K_u[kk] = std::move(g.K_u);
        s.K_w[kk] = std::move(g.K_w);
    }
    return s;
}

GainSchedule backward_pass(const TrajectoryIterate &traj, const GameDynamics &dyn, const QuadraticGameCost &cost,
                           const SolverConfig &cfg, double reg)
{
    return backward_pass(traj, local_models(traj, dyn, cost), cfg, reg);
}

TrajectoryIterate forward_pass(const TrajectoryIterate &traj, const GainSchedule &gains, double alpha,
                               const GameDynamics &dyn, const QuadraticGameCost &cost)
{
    const std::size_t K = traj.steps();
    require_shape(gains.steps() == K && traj.x.size() == K + 1 && traj.w.size() == K,
                  "forward_pass: gains and iterate are on different grids");
    TrajectoryIterate out;
    out.t0 = traj.t0;
    out.dt = traj.dt;
    out.x.resize(K + 1);
    out.u.resize(K);
    out.w.resize(K);
    out.x[0] = traj.x[0];
    for (std::size_t k = 0; k < K; ++k)
    {
        const VectorXd dx = out.x[k] - traj.x[k];
        out.u[k] = traj.u[k] + alpha * gains.l_u[k] + gains.K_u[k] * dx;
        out.w[k] = traj.w[k] + alpha * gains.l_w[k] + gains.K_w[k] * dx;
        out.x[k + 1] = out.x[k] + traj.dt * dyn(out.x[k], out.u[k], out.w[k]);
        if (!out.x[k + 1].allFinite() || !out.u[k].allFinite() || !out.w[k].allFinite())
            throw DivergenceError("forward rollout diverged at knot " + std::to_string(k + 1), -1,
                                  static_cast<long>(k + 1));
    }
    out.cost = trajectory_cost(cost, out, true);
    out.cost_nominal = trajectory_cost(cost, out, false);
    return out;
}

TrajectoryIterate initial_rollout(const VectorXd &x0, const GameDynamics &dyn, const QuadraticGameCost &cost,
                                  const SolverConfig &cfg)
{
    cfg.validate();
    require_shape(static_cast<std::size_t>(x0.size()) == dyn.state_dim(), "solve: initial state has wrong dimension");
    const std::size_t K = cfg.horizon;
    TrajectoryIterate t;
    t.dt = cfg.dt;
    t.x.resize(K + 1);
    t.u = cfg.initial_controls.empty()
              ? std::vector<VectorXd>(K, VectorXd::Zero(static_cast<Eigen::Index>(dyn.control_dim())))
              : cfg.initial_controls;
    t.w.assign(K, VectorXd::Zero(static_cast<Eigen::Index>(dyn.disturbance_dim())));
    t.x[0] = x0;
    for (std::size_t k = 0; k < K; ++k)
    {
        require_shape(static_cast<std::size_t>(t.u[k].size()) == dyn.control_dim(), "solve: initial control has wrong dimension");
        t.x[k + 1] = t.x[k] + t.dt * dyn(t.x[k], t.u[k], t.w[k]);
        if (!t.x[k + 1].allFinite())
            throw DivergenceError("initial rollout diverged at knot " + std::to_string(k + 1), -1, static_cast<long>(k + 1));
    }
    t.cost = trajectory_cost(cost, t, true);
    t.cost_nominal = trajectory_cost(cost, t, false);
    return t;
}

SolveResult solve(const VectorXd &x0, const GameDynamics &dyn, const QuadraticGameCost &cost, const SolverConfig &cfg)
{
    cost.validate();
    require_shape(cost.state_dim() == dyn.state_dim() && cost.control_dim() == dyn.control_dim(),
                  "solve: cost and dynamics dimensions differ");

    SolveResult res;
    res.trajectory = initial_rollout(x0, dyn, cost, cfg);
    res.log.push_back({0, res.trajectory.cost, res.trajectory.cost_nominal, 0.0, 0.0, 0.0});

    LocalModels models = local_models(res.trajectory, dyn, cost);
    double reg = 0.0;
    // Saddle failures beyond reg_max and value divergence end the solve; the
    // error carries the best iterate found so far.
    auto backward = [&](double lambda) {
        try
        {
            return backward_pass(res.trajectory, models, cfg, lambda);
        }
        catch (const NumericError &e)
        {
            throw StalledError(std::string("backward pass failed after ") + std::to_string(res.accepted_iterations) +
                                   " accepted iterations: " + e.what(),
                               res);
        }
    };
    res.gains = backward(reg);
    res.log.front().grad_norm = std::max(res.gains.max_Q_u, res.gains.max_Q_w);

    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter)
    {
        const double J = res.trajectory.cost;
        const double scale = std::max(std::abs(J), std::numeric_limits<double>::min());

        bool found = false;
        double full_step_change = std::numeric_limits<double>::infinity();
        TrajectoryIterate candidate;
        double alpha_used = 0.0;
        for (std::size_t i = 0; i < cfg.line_search_alphas.size(); ++i)
        {
            const double alpha = cfg.line_search_alphas[i];
            TrajectoryIterate trial;
            try
            {
                trial = forward_pass(res.trajectory, res.gains, alpha, dyn, cost);
            }
            catch (const NumericError &)
            {
                continue;
            }
            if (i == 0)
                full_step_change = std::abs(trial.cost - J) / scale;
            const double required = cfg.accept_ratio * alpha * std::abs(res.gains.expected_linear);
            if (trial.cost < J - required)
            {
                candidate = std::move(trial);
                alpha_used = alpha;
                found = true;
                break;
            }
        }

        if (found && (J - candidate.cost) / scale < cfg.cost_tol)
        {
            // The remaining improvement is below tolerance; keep the iterate
            // whose backward pass produced the current gains.
            res.converged = true;
            break;
        }
        if (!found)
        {
            if (full_step_change < cfg.cost_tol)
            {
                res.converged = true;
                break;
            }
            reg = std::max(cfg.reg_init, reg * cfg.reg_scale);
            if (reg > cfg.reg_max)
                throw StalledError("no step size decreased the cost and regularization is exhausted after " +
                                       std::to_string(iter - 1) + " accepted iterations",
                                   res);
            res.gains = backward(reg);
            continue;
        }

        res.trajectory = std::move(candidate);
        ++res.accepted_iterations;
        const double grad_norm = std::max(res.gains.max_Q_u, res.gains.max_Q_w);
        res.log.push_back({iter, res.trajectory.cost, res.trajectory.cost_nominal, alpha_used, reg, grad_norm});

        reg = 0.0;
        models = local_models(res.trajectory, dyn, cost);
        res.gains = backward(reg);
    }
    return res;
}

FeedbackPolicy::FeedbackPolicy(std::vector<VectorXd> x_star, std::vector<VectorXd> u_star, std::vector<MatrixXd> K_u,
                               double dt, double t0)
    : x_star_(std::move(x_star)), u_star_(std::move(u_star)), K_u_(std::move(K_u)), dt_(dt), t0_(t0)
{
    require_shape(K_u_.size() == u_star_.size() && x_star_.size() >= u_star_.size(),
                  "feedback policy: inconsistent trajectory and gain lengths");
}

VectorXd FeedbackPolicy::operator()(const VectorXd &x, std::size_t k) const
{
    if (k >= u_star_.size())
        throw InputError("feedback policy: knot " + std::to_string(k) + " is outside the horizon of " +
                         std::to_string(u_star_.size()));
    require_shape(x.size() == x_star_[k].size(), "feedback policy: state has wrong dimension");
    return u_star_[k] + K_u_[k] * (x - x_star_[k]);
}

FeedbackPolicy feedback_policy(const SolveResult &result)
{
    return FeedbackPolicy(result.trajectory.x, result.trajectory.u, result.gains.K_u, result.trajectory.dt,
                          result.trajectory.t0);
}

} // namespace gtddp
