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
#include "acceptance.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace gtddp
{
namespace
{

using acceptance::lq_cost;
using acceptance::lq_dynamics;
using acceptance::lq_fixture;

QExpansion scalar_q(double Quu, double Qww, double Quw, double Qu, double Qw, double Qux, double Qwx)
{
    QExpansion q;
    q.Q_x = VectorXd::Zero(1);
    q.Q_xx = MatrixXd::Zero(1, 1);
    q.Q_u = VectorXd::Constant(1, Qu);
    q.Q_w = VectorXd::Constant(1, Qw);
    q.Q_uu = MatrixXd::Constant(1, 1, Quu);
    q.Q_ww = MatrixXd::Constant(1, 1, Qww);
    q.Q_uw = MatrixXd::Constant(1, 1, Quw);
    q.Q_ux = MatrixXd::Constant(1, 1, Qux);
    q.Q_wx = MatrixXd::Constant(1, 1, Qwx);
    return q;
}

VectorXd random_vec(RandomSource &rng, Eigen::Index n)
{
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = 2.0 * rng.uniform() - 1.0;
    return v;
}

// Random saddle expansion with m controls, q disturbances and n states.
QExpansion random_saddle(RandomSource &rng, Eigen::Index n, Eigen::Index m, Eigen::Index nq)
{
    QExpansion q;
    auto mat = [&](Eigen::Index r, Eigen::Index c) {
        MatrixXd M(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            M.col(j) = random_vec(rng, r);
        return M;
    };
    const MatrixXd Mu = mat(m, m), Mw = mat(nq, nq);
    q.Q_uu = Mu * Mu.transpose() + MatrixXd::Identity(m, m);
    q.Q_ww = -(Mw * Mw.transpose() + MatrixXd::Identity(nq, nq));
    q.Q_uw = 0.5 * mat(m, nq);
    q.Q_u = random_vec(rng, m);
    q.Q_w = random_vec(rng, nq);
    q.Q_ux = mat(m, n);
    q.Q_wx = mat(nq, n);
    q.Q_x = random_vec(rng, n);
    q.Q_xx = MatrixXd::Identity(n, n);
    return q;
}

SolverConfig lq_config(double dt)
{
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.horizon = static_cast<std::size_t>(std::llround(1.0 / dt));
    return cfg;
}

TEST(QExpansion, ZeroDynamicsGivesCostDerivatives)
{
    RandomSource rng(41);
    CostExpansion c;
    c.L_x = random_vec(rng, 2);
    c.L_u = random_vec(rng, 1);
    c.L_w = random_vec(rng, 1);
    c.L_xx = MatrixXd::Identity(2, 2);
    c.L_uu = MatrixXd::Constant(1, 1, 2.0);
    c.L_ww = MatrixXd::Constant(1, 1, -3.0);
    c.L_ux = MatrixXd::Zero(1, 2);
    c.L_wx = MatrixXd::Zero(1, 2);
    c.L_uw = MatrixXd::Zero(1, 1);
    Linearization lin{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), MatrixXd::Zero(2, 1)};
    const QExpansion q = q_expansion(lin, c, VectorXd::Zero(2), MatrixXd::Zero(2, 2));
    EXPECT_EQ(q.Q_x, c.L_x);
    EXPECT_EQ(q.Q_u, c.L_u);
    EXPECT_EQ(q.Q_w, c.L_w);
    EXPECT_EQ(q.Q_xx, c.L_xx);
    EXPECT_EQ(q.Q_uu, c.L_uu);
    EXPECT_EQ(q.Q_ww, c.L_ww);
}

TEST(QExpansion, ScalarHandAlgebra)
{
    // xdot = -0.5 x + 2 u + 0.3 w, L = 3 x^2 + 0.5 u^2 - w^2 at (x, u, w) = (1, 0.2, 0.1),
    // V_x = 1.5, V_xx = 4.
    QuadraticGameCost cost;
    cost.Q = MatrixXd::Constant(1, 1, 3.0);
    cost.R_u = MatrixXd::Constant(1, 1, 0.5);
    cost.Q_f = MatrixXd::Zero(1, 1);
    cost.x_f = VectorXd::Zero(1);
    cost.gamma = 1.0;
    cost.disturbance_dim = 1;
    const CostExpansion c =
        running_cost(cost, VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 0.2), VectorXd::Constant(1, 0.1));
    Linearization lin{MatrixXd::Constant(1, 1, -0.5), MatrixXd::Constant(1, 1, 2.0), MatrixXd::Constant(1, 1, 0.3)};
    const QExpansion q = q_expansion(lin, c, VectorXd::Constant(1, 1.5), MatrixXd::Constant(1, 1, 4.0));
    EXPECT_NEAR(q.Q_x[0], 5.25, 1e-12);
    EXPECT_NEAR(q.Q_u[0], 3.2, 1e-12);
    EXPECT_NEAR(q.Q_w[0], 0.25, 1e-12);
    EXPECT_NEAR(q.Q_xx(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(q.Q_uu(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(q.Q_ww(0, 0), -2.0, 1e-12);
    EXPECT_NEAR(q.Q_ux(0, 0), 8.0, 1e-12);
    EXPECT_NEAR(q.Q_wx(0, 0), 1.2, 1e-12);
    EXPECT_NEAR(q.Q_uw(0, 0), 0.0, 1e-12);
}

TEST(QExpansion, StepCurvatureLeavesQwwUnchanged)
{
    RandomSource rng(42);
    QExpansion q = random_saddle(rng, 3, 2, 2);
    const QExpansion before = q;
    Linearization lin{MatrixXd::Identity(3, 3), MatrixXd::Ones(3, 2), MatrixXd::Ones(3, 2)};
    const MatrixXd V = 5.0 * MatrixXd::Identity(3, 3);
    add_step_curvature(q, lin, V, 0.01);
    EXPECT_EQ(q.Q_ww, before.Q_ww);
    EXPECT_LE((q.Q_uu - before.Q_uu - 0.01 * lin.F_u.transpose() * V * lin.F_u).norm(), 1e-12);
    EXPECT_LE((q.Q_uw - before.Q_uw - 0.01 * lin.F_u.transpose() * V * lin.F_w).norm(), 1e-12);
}

TEST(ComputeGains, DecoupledWhenNoCrossTerm)
{
    const QExpansion q = scalar_q(4.0, -5.0, 0.0, 2.0, 3.0, 8.0, -10.0);
    const Gains g = compute_gains(q, 0.0);
    EXPECT_NEAR(g.l_u[0], -0.5, 1e-15);
    EXPECT_NEAR(g.K_u(0, 0), -2.0, 1e-15);
    EXPECT_NEAR(g.l_w[0], 0.6, 1e-15);
    EXPECT_NEAR(g.K_w(0, 0), -2.0, 1e-15);
}

TEST(ComputeGains, ScalarHandSubstitution)
{
    const QExpansion q = scalar_q(2.0, -2.0, 1.0, 1.0, 1.0, 0.0, 0.0);
    const Gains g = compute_gains(q, 0.0);
    EXPECT_NEAR(g.l_u[0], -0.6, 1e-15);
    EXPECT_NEAR(g.l_w[0], 0.2, 1e-15);
}

TEST(ComputeGains, SatisfyStationarityPair)
{
    RandomSource rng(43);
    for (int t = 0; t < 50; ++t)
    {
        const QExpansion q = random_saddle(rng, 4, 3, 2);
        const Gains g = compute_gains(q, 0.0);
        const VectorXd ru = q.Q_u + q.Q_uu * g.l_u + q.Q_uw * g.l_w;
        const VectorXd rw = q.Q_w + q.Q_ww * g.l_w + q.Q_uw.transpose() * g.l_u;
        EXPECT_LE(ru.lpNorm<Eigen::Infinity>(), 1e-10);
        EXPECT_LE(rw.lpNorm<Eigen::Infinity>(), 1e-10);
        const MatrixXd Ru = q.Q_ux + q.Q_uu * g.K_u + q.Q_uw * g.K_w;
        const MatrixXd Rw = q.Q_wx + q.Q_ww * g.K_w + q.Q_uw.transpose() * g.K_u;
        EXPECT_LE(Ru.lpNorm<Eigen::Infinity>(), 1e-10);
        EXPECT_LE(Rw.lpNorm<Eigen::Infinity>(), 1e-10);
        EXPECT_LE(stationarity_residual(q, g), 1e-10);
    }
}

TEST(ComputeGains, NonSaddleThrows)
{
    const QExpansion q = scalar_q(-1.0, -2.0, 0.0, 1.0, 1.0, 0.0, 0.0);
    EXPECT_THROW(compute_gains(q, 0.0, 7), NonSaddleError);
    try
    {
        compute_gains(q, 0.0, 7);
    }
    catch (const NonSaddleError &e)
    {
        EXPECT_EQ(e.knot(), 7u);
        EXPECT_DOUBLE_EQ(e.min_eig_uu(), -1.0);
    }
    EXPECT_NO_THROW(compute_gains(q, 2.0));
    EXPECT_THROW(compute_gains(scalar_q(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0), 0.0), NonSaddleError);
}

TEST(Isaacs, QuadraticSaddleHasNoGap)
{
    RandomSource rng(44);
    for (int t = 0; t < 20; ++t)
    {
        const QExpansion q = random_saddle(rng, 3, 2, 2);
        const IsaacsCheck c = isaacs_check(q);
        const Gains g = compute_gains(q, 0.0);
        // Value of the local quadratic game at its saddle point.
        const double v = q.Q_u.dot(g.l_u) + q.Q_w.dot(g.l_w) + 0.5 * g.l_u.dot(q.Q_uu * g.l_u) +
                         0.5 * g.l_w.dot(q.Q_ww * g.l_w) + g.l_u.dot(q.Q_uw * g.l_w);
        EXPECT_LE(c.gap(), 1e-12 * std::max(1.0, std::abs(v)));
        EXPECT_NEAR(c.min_max, v, 1e-12 * std::max(1.0, std::abs(v)));
    }
    const IsaacsCheck bad = isaacs_check(scalar_q(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0));
    EXPECT_TRUE(std::isinf(bad.min_max));
}

TEST(BackwardPass, ZeroProblemKeepsTerminalExpansion)
{
    const VectorField zero = [](const VectorXd &x, const VectorXd &) { return VectorXd::Zero(x.size()).eval(); };
    const GameDynamics dyn = GameDynamics::compose(zero, 2, 1, nullptr, MatrixXd::Identity(2, 2));
    QuadraticGameCost cost;
    cost.Q = MatrixXd::Zero(2, 2);
    cost.R_u = MatrixXd::Identity(1, 1);
    cost.Q_f = (MatrixXd(2, 2) << 2, 1, 1, 3).finished();
    cost.x_f = (VectorXd(2) << 1, -1).finished();
    cost.gamma = 10.0;
    cost.disturbance_dim = 2;
    SolverConfig cfg;
    cfg.horizon = 20;
    const VectorXd x0 = (VectorXd(2) << 0.5, 0.5).finished();
    const TrajectoryIterate traj = initial_rollout(x0, dyn, cost, cfg);
    const GainSchedule s = backward_pass(traj, dyn, cost, cfg);
    const TerminalExpansion term = terminal_cost(cost, x0);
    for (std::size_t k = 0; k <= cfg.horizon; ++k)
    {
        EXPECT_LE((s.V_x[k] - term.gradient).norm(), 1e-12);
        EXPECT_LE((s.V_xx[k] - term.hessian).norm(), 1e-12);
    }
}

TEST(BackwardPass, ScalarGameMatchesRiccati)
{
    // xdot = 0.3 x + u + 0.5 w, L = x^2 + u^2 - gamma^2 w^2, phi = 2 x^2.
    const MatrixXd A = MatrixXd::Constant(1, 1, 0.3), B = MatrixXd::Constant(1, 1, 1.0);
    const GameDynamics dyn =
        GameDynamics::with_constant_scale(linear_fixture(A, B), 1, 1, MatrixXd::Identity(1, 1), VectorXd::Constant(1, 0.5));
    QuadraticGameCost cost;
    cost.Q = MatrixXd::Identity(1, 1);
    cost.R_u = MatrixXd::Identity(1, 1);
    cost.Q_f = MatrixXd::Constant(1, 1, 2.0);
    cost.x_f = VectorXd::Zero(1);
    cost.gamma = 1.0;
    cost.disturbance_dim = 1;
    const oracle::LqGame g{A, B, MatrixXd::Constant(1, 1, 0.5), cost.Q, cost.R_u, cost.Q_f, 1.0, 1.0};
    for (bool correction : {true, false})
    {
        for (double dt : {0.01, 0.001})
        {
            SolverConfig cfg = lq_config(dt);
            cfg.discrete_correction = correction;
            const TrajectoryIterate traj = initial_rollout(VectorXd::Ones(1), dyn, cost, cfg);
            const GainSchedule s = backward_pass(traj, dyn, cost, cfg);
            const oracle::RiccatiSolution ric = oracle::solve_game_riccati(g, cfg.horizon);
            double worst = 0.0;
            for (std::size_t k = 0; k <= cfg.horizon; ++k)
                worst = std::max(worst, std::abs(s.V_xx[k](0, 0) - 2.0 * ric.P[k](0, 0)) / (2.0 * ric.P[k](0, 0)));
            EXPECT_LE(worst, 5.0 * dt) << "dt " << dt << " correction " << correction;
        }
    }
}

TEST(BackwardPass, ValueMatricesSymmetric)
{
    const auto f = lq_fixture(0.5);
    const SolverConfig cfg = lq_config(0.01);
    const GameDynamics dyn = lq_dynamics(f);
    const QuadraticGameCost cost = lq_cost(f, 1.0);
    const GainSchedule s = backward_pass(initial_rollout(f.x0, dyn, cost, cfg), dyn, cost, cfg);
    for (const auto &V : s.V_xx)
        EXPECT_LT((V - V.transpose()).lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_LT(s.max_stationarity_residual, 1e-10);
}

TEST(ForwardPass, ZeroStepReturnsInput)
{
    const auto f = lq_fixture(0.5);
    const SolverConfig cfg = lq_config(0.01);
    const GameDynamics dyn = lq_dynamics(f);
    const QuadraticGameCost cost = lq_cost(f, 1.0);
    const TrajectoryIterate traj = initial_rollout(f.x0, dyn, cost, cfg);
    const GainSchedule s = backward_pass(traj, dyn, cost, cfg);
    const TrajectoryIterate same = forward_pass(traj, s, 0.0, dyn, cost);
    ASSERT_EQ(same.x.size(), traj.x.size());
    for (std::size_t k = 0; k < traj.x.size(); ++k)
        EXPECT_EQ(same.x[k], traj.x[k]);
    EXPECT_EQ(same.cost, traj.cost);
}

TEST(ForwardPass, FullStepReachesGameValue)
{
    const auto f = lq_fixture(0.5);
    const SolverConfig cfg = lq_config(0.001);
    const GameDynamics dyn = lq_dynamics(f);
    const QuadraticGameCost cost = lq_cost(f, 1.0);
    const TrajectoryIterate traj = initial_rollout(f.x0, dyn, cost, cfg);
    const TrajectoryIterate next = forward_pass(traj, backward_pass(traj, dyn, cost, cfg), 1.0, dyn, cost);
    const oracle::RiccatiSolution ric =
        oracle::solve_game_riccati({f.A, f.B, f.scale.asDiagonal() * f.C, f.Q, f.R, f.Q_f, 1.0, 1.0}, cfg.horizon);
    EXPECT_NEAR(next.cost, ric.value(f.x0), 1e-3 * ric.value(f.x0));
}

TEST(ForwardPass, EulerRolloutConvergesAtFirstOrder)
{
    const GameDynamics dyn = GameDynamics::compose(planar_fixture(), 6, 2, nullptr, MatrixXd::Identity(6, 6));
    QuadraticGameCost cost;
    cost.Q = MatrixXd::Identity(6, 6);
    cost.R_u = MatrixXd::Identity(2, 2);
    cost.Q_f = MatrixXd::Identity(6, 6);
    cost.x_f = VectorXd::Zero(6);
    cost.disturbance_dim = 6;
    const VectorXd x0 = (VectorXd(6) << 0, 0, 0.3, 1, 0, 0).finished();
    auto terminal = [&](std::size_t K) {
        SolverConfig cfg;
        cfg.dt = 1.0 / static_cast<double>(K);
        cfg.horizon = K;
        cfg.initial_controls.assign(K, (VectorXd(2) << 0.2, -0.1).finished());
        return initial_rollout(x0, dyn, cost, cfg).x.back();
    };
    const VectorXd ref = terminal(64000);
    const double e1 = (terminal(500) - ref).norm();
    const double e2 = (terminal(1000) - ref).norm();
    EXPECT_NEAR(e1 / e2, 2.0, 0.2);
}

TEST(Solve, LqFixtureOneIteration)
{
    const auto f = lq_fixture(0.5);
    const SolverConfig cfg = lq_config(0.001);
    const SolveResult res = solve(f.x0, lq_dynamics(f), lq_cost(f, 1.0), cfg);
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.accepted_iterations, 1u);
    for (std::size_t i = 1; i < res.log.size(); ++i)
        EXPECT_LT(res.log[i].cost, res.log[i - 1].cost);
    const oracle::RiccatiSolution ric =
        oracle::solve_game_riccati({f.A, f.B, f.scale.asDiagonal() * f.C, f.Q, f.R, f.Q_f, 1.0, 1.0}, cfg.horizon);
    EXPECT_NEAR(res.trajectory.cost, ric.value(f.x0), 1e-3 * ric.value(f.x0));
    EXPECT_LE(std::max(res.gains.max_Q_u, res.gains.max_Q_w), 1e-3 * res.log.front().grad_norm);
}

TEST(Solve, LargeGammaMatchesDisturbanceFreeSolution)
{
    const auto f = lq_fixture(0.5);
    const SolverConfig cfg = lq_config(0.01);
    const SolveResult game = solve(f.x0, lq_dynamics(f), lq_cost(f, 1e6), cfg);
    auto free = f;
    free.scale.setZero();
    const SolveResult plain = solve(f.x0, lq_dynamics(free), lq_cost(free, 1e6), cfg);
    double lw = 0.0, du = 0.0;
    for (std::size_t k = 0; k < cfg.horizon; ++k)
    {
        lw = std::max(lw, game.gains.l_w[k].lpNorm<Eigen::Infinity>());
        du = std::max(du, (game.trajectory.u[k] - plain.trajectory.u[k]).lpNorm<Eigen::Infinity>());
    }
    EXPECT_LT(lw, 1e-6);
    EXPECT_LT(du, 1e-6);
}

TEST(Solve, GridRefinementIsFirstOrder)
{
    const auto f = lq_fixture(0.5);
    auto cost_at = [&](double dt) { return solve(f.x0, lq_dynamics(f), lq_cost(f, 1.0), lq_config(dt)).trajectory.cost; };
    const double c1 = cost_at(0.004), c2 = cost_at(0.002), c4 = cost_at(0.001);
    // First order: the change from dt to dt/2 is twice the change from dt/2 to dt/4.
    EXPECT_LE(std::abs(c1 - c2), 2.0 * 2.0 * std::abs(c2 - c4));
    EXPECT_GE(std::abs(c1 - c2), 0.5 * 2.0 * std::abs(c2 - c4));
}

TEST(Solve, NonlinearPlanarProblemConverges)
{
    const PlanarParams p;
    const GameDynamics dyn =
        GameDynamics::with_constant_scale(planar_fixture(p), 6, 2, planar_input_matrix(p), VectorXd::Constant(6, 0.1));
    QuadraticGameCost cost;
    cost.Q = 0.1 * MatrixXd::Identity(6, 6);
    cost.R_u = 0.01 * MatrixXd::Identity(2, 2);
    cost.Q_f = 100.0 * MatrixXd::Identity(6, 6);
    cost.x_f = (VectorXd(6) << 1.0, 0.5, 0, 0, 0, 0).finished();
    cost.gamma = 2.0;
    cost.disturbance_dim = 2;
    SolverConfig cfg;
    cfg.dt = 0.01;
    cfg.horizon = 200;
    const SolveResult res = solve(VectorXd::Zero(6), dyn, cost, cfg);
    EXPECT_TRUE(res.converged);
    EXPECT_GT(res.accepted_iterations, 1u);
    for (std::size_t i = 1; i < res.log.size(); ++i)
        EXPECT_LT(res.log[i].cost, res.log[i - 1].cost);
    EXPECT_LE(std::max(res.gains.max_Q_u, res.gains.max_Q_w), 1e-3 * res.log.front().grad_norm);
    EXPECT_LT((res.trajectory.x.back().head(2) - cost.x_f.head(2)).norm(), 0.1);
}

TEST(Solve, IllPosedGameStallsWithBestIterate)
{
    // gamma^-2 W^2 far above 1/R: the maximizer's value escapes in finite time.
    const auto f = lq_fixture(0.5);
    SolverConfig cfg = lq_config(0.01);
    cfg.reg_max = 1e-4;
    try
    {
        solve(f.x0, lq_dynamics(f), lq_cost(f, 0.05), cfg);
        FAIL() << "expected StalledError";
    }
    catch (const StalledError &e)
    {
        EXPECT_EQ(e.best().trajectory.x.size(), cfg.horizon + 1);
        EXPECT_FALSE(e.best().log.empty());
    }
}

TEST(SolverConfig, Validation)
{
    SolverConfig cfg;
    cfg.dt = -1.0;
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = SolverConfig{};
    cfg.line_search_alphas.clear();
    EXPECT_THROW(cfg.validate(), InputError);
}

TEST(FeedbackPolicy, OnTrajectoryAffineAndNullSpace)
{
    const auto f = lq_fixture(0.5);
    const SolveResult res = solve(f.x0, lq_dynamics(f), lq_cost(f, 1.0), lq_config(0.01));
    const FeedbackPolicy pol = feedback_policy(res);
    for (std::size_t k : {0u, 37u, 99u})
    {
        const VectorXd &xs = res.trajectory.x[k];
        EXPECT_LE((pol(xs, k) - res.trajectory.u[k]).norm(), 1e-15);
        const VectorXd a = xs + VectorXd::Constant(2, 0.3), b = xs - VectorXd::Constant(2, 0.1);
        EXPECT_LE((0.25 * pol(a, k) + 0.75 * pol(b, k) - pol(0.25 * a + 0.75 * b, k)).norm(), 1e-12);
        const MatrixXd &K = res.gains.K_u[k];
        const VectorXd null = (VectorXd(2) << K(0, 1), -K(0, 0)).finished();
        EXPECT_LE((pol(xs + null, k) - pol(xs, k)).norm(), 1e-12);
    }
}

} // namespace
} // namespace gtddp
