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
#include "gtddp/gp.hpp"
#include "gtddp/sim.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>
#include <numbers>

namespace gtddp
{
namespace
{

GpHyperparams make_hyper(double s, double w, VectorXd m)
{
    GpHyperparams h;
    h.sigma_s = s;
    h.sigma_w = w;
    h.m_diag = std::move(m);
    return h;
}

GpDataset random_data(RandomSource &rng, Eigen::Index N, Eigen::Index dim, Eigen::Index outs = 1)
{
    GpDataset d;
    d.inputs.resize(N, dim);
    d.targets.resize(N, outs);
    for (Eigen::Index i = 0; i < N; ++i)
    {
        for (Eigen::Index k = 0; k < dim; ++k)
            d.inputs(i, k) = 4.0 * rng.uniform() - 2.0;
        for (Eigen::Index o = 0; o < outs; ++o)
            d.targets(i, o) = std::cos(d.inputs.row(i).sum() - static_cast<double>(o)) + 0.05 * rng.normal();
    }
    return d;
}

VectorXd random_point(RandomSource &rng, Eigen::Index dim)
{
    VectorXd q(dim);
    for (Eigen::Index k = 0; k < dim; ++k)
        q[k] = 4.0 * rng.uniform() - 2.0;
    return q;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

TEST(Kernel, ZeroDistanceIsSignalVariance)
{
    const auto h = make_hyper(1.7, 0.1, VectorXd::Constant(3, 0.4));
    const VectorXd a = VectorXd::LinSpaced(3, -1.0, 2.0);
    EXPECT_DOUBLE_EQ(kernel(a, a, h), 1.7 * 1.7);
}

TEST(Kernel, Symmetric)
{
    RandomSource rng(1);
    const auto h = make_hyper(0.8, 0.1, (VectorXd(4) << 0.5, 1.0, 2.0, 0.1).finished());
    for (int t = 0; t < 20; ++t)
    {
        const VectorXd a = random_point(rng, 4), b = random_point(rng, 4);
        EXPECT_EQ(kernel(a, b, h), kernel(b, a, h));
    }
}

TEST(Kernel, UnitOffset)
{
    const auto h = make_hyper(1.0, 0.1, VectorXd::Ones(3));
    const VectorXd a = VectorXd::Zero(3);
    const VectorXd b = VectorXd::Unit(3, 1);
    EXPECT_NEAR(kernel(a, b, h), std::exp(-0.5), 1e-15);
}

TEST(Kernel, DimensionMismatchThrows)
{
    const auto h = make_hyper(1.0, 0.1, VectorXd::Ones(3));
    EXPECT_THROW(kernel(VectorXd::Zero(3), VectorXd::Zero(2), h), ShapeError);
}

TEST(Kernel, MatrixIsPositiveSemidefinite)
{
    RandomSource rng(2);
    for (Eigen::Index N : {2, 10, 30, 50})
    {
        const GpDataset d = random_data(rng, N, 3);
        const auto h = make_hyper(1.3, 0.1, (VectorXd(3) << 0.3, 2.0, 5.0).finished());
        const MatrixXd K = kernel_matrix(d.inputs, h);
        EXPECT_EQ((K - K.transpose()).norm(), 0.0);
        const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(K).eigenvalues().minCoeff();
        EXPECT_GE(min_eig, -1e-10 * 1.3 * 1.3) << "N = " << N;
    }
}

TEST(Fit, SinglePointClosedForm)
{
    GpDataset d;
    d.inputs = (MatrixXd(1, 2) << 0.3, -0.7).finished();
    d.targets = (MatrixXd(1, 1) << 2.5).finished();
    const auto h = make_hyper(1.5, 0.4, VectorXd::Ones(2));
    const GpModel gp = GpModel::fit(d, {h});
    const double s = 1.5 * 1.5 + 0.4 * 0.4;
    EXPECT_NEAR(gp.alpha(0)[0], 2.5 / s, 1e-15);
    EXPECT_EQ(gp.jitter(0), 0.0);
}

TEST(Fit, DuplicateRowsWithNoise)
{
    GpDataset d;
    d.inputs = (MatrixXd(3, 1) << 0.5, 0.5, 0.5).finished();
    d.targets = (MatrixXd(3, 1) << 1.0, 1.1, 0.9).finished();
    const GpModel gp = GpModel::fit(d, {make_hyper(1.0, 0.1, VectorXd::Ones(1))});
    EXPECT_TRUE(std::isfinite(gp.predict_mean(VectorXd::Constant(1, 0.5), 0)));
}

TEST(Fit, AlphaMatchesDenseSolve)
{
    RandomSource rng(3);
    const GpDataset d = random_data(rng, 10, 4);
    const auto h = make_hyper(1.1, 0.2, (VectorXd(4) << 0.5, 1.0, 1.5, 0.2).finished());
    const GpModel gp = GpModel::fit(d, {h});
    const oracle::DenseGp dense(d.inputs, d.targets.col(0), h);
    MatrixXd A(10, 10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            A(i, j) = dense.kernel(d.inputs.row(i).transpose(), d.inputs.row(j).transpose()) + (i == j ? 0.04 : 0.0);
    const VectorXd alpha = A.fullPivLu().solve(VectorXd(d.targets.col(0)));
    EXPECT_LE((gp.alpha(0) - alpha).norm() / alpha.norm(), 1e-10);
}

TEST(Fit, RejectsBadInput)
{
    GpDataset d;
    d.inputs = MatrixXd::Zero(3, 2);
    d.targets = MatrixXd::Zero(2, 1);
    EXPECT_THROW(GpModel::fit(d, {make_hyper(1.0, 0.1, VectorXd::Ones(2))}), ShapeError);
    d.targets = MatrixXd::Zero(3, 1);
    EXPECT_THROW(GpModel::fit(d, {make_hyper(-1.0, 0.1, VectorXd::Ones(2))}), InputError);
    d.inputs(1, 1) = std::nan("");
    EXPECT_THROW(GpModel::fit(d, {make_hyper(1.0, 0.1, VectorXd::Ones(2))}), InputError);
}

TEST(PredictMean, FarQueryIsPriorMean)
{
    RandomSource rng(4);
    const GpDataset d = random_data(rng, 8, 2);
    const GpModel gp = GpModel::fit(d, {make_hyper(1.0, 0.1, VectorXd::Ones(2))});
    EXPECT_EQ(gp.predict_mean(VectorXd::Constant(2, 1e3), 0), 0.0);
}

TEST(PredictMean, SinglePointAtTrainingInput)
{
    GpDataset d;
    d.inputs = (MatrixXd(1, 1) << 1.0).finished();
    d.targets = (MatrixXd(1, 1) << -3.0).finished();
    const GpModel gp = GpModel::fit(d, {make_hyper(2.0, 0.5, VectorXd::Ones(1))});
    EXPECT_NEAR(gp.predict_mean(VectorXd::Ones(1), 0), 4.0 / 4.25 * -3.0, 1e-14);
}

TEST(PredictMean, MatchesDenseOracle)
{
    RandomSource rng(5);
    const GpDataset d = random_data(rng, 5, 3, 2);
    const std::vector<GpHyperparams> h{make_hyper(1.2, 0.1, VectorXd::Constant(3, 0.7)),
                                       make_hyper(0.6, 0.3, VectorXd::Constant(3, 1.9))};
    const GpModel gp = GpModel::fit(d, h);
    for (int t = 0; t < 10; ++t)
    {
        const VectorXd q = random_point(rng, 3);
        const VectorXd mean = gp.predict_mean(q);
        for (int o = 0; o < 2; ++o)
        {
            const oracle::DenseGp dense(d.inputs, d.targets.col(o), h[o]);
            EXPECT_LE(rel_err(mean[o], dense.mean(q)), 1e-10);
        }
    }
}

TEST(PredictMean, InterpolatesInNoiselessLimit)
{
    RandomSource rng(6);
    const GpDataset d = random_data(rng, 12, 2);
    const GpModel gp = GpModel::fit(d, {make_hyper(1.0, 1e-8, VectorXd::Constant(2, 1.0))});
    for (Eigen::Index i = 0; i < d.inputs.rows(); ++i)
        EXPECT_LE(rel_err(gp.predict_mean(d.inputs.row(i).transpose(), 0), d.targets(i, 0)), 1e-4);
}

TEST(PredictMean, QueryDimensionChecked)
{
    RandomSource rng(7);
    const GpModel gp = GpModel::fit(random_data(rng, 4, 2), {make_hyper(1.0, 0.1, VectorXd::Ones(2))});
    EXPECT_THROW(gp.predict_mean(VectorXd::Zero(3)), ShapeError);
}

TEST(PredictVar, FarQueryIsPriorVariance)
{
    RandomSource rng(8);
    const GpModel gp = GpModel::fit(random_data(rng, 6, 2), {make_hyper(1.4, 0.1, VectorXd::Ones(2))});
    EXPECT_NEAR(gp.predict_var(VectorXd::Constant(2, 50.0), 0), 1.4 * 1.4, 1e-14);
}

TEST(PredictVar, SinglePointAtTrainingInput)
{
    GpDataset d;
    d.inputs = (MatrixXd(1, 2) << 0.1, 0.2).finished();
    d.targets = (MatrixXd(1, 1) << 1.0).finished();
    const GpModel gp = GpModel::fit(d, {make_hyper(2.0, 0.5, VectorXd::Ones(2))});
    EXPECT_NEAR(gp.predict_var(d.inputs.row(0).transpose(), 0), 4.0 * 0.25 / 4.25, 1e-14);
}

TEST(PredictVar, NeverExceedsPrior)
{
    RandomSource rng(9);
    const GpDataset d = random_data(rng, 15, 3);
    const GpModel gp = GpModel::fit(d, {make_hyper(0.9, 0.05, VectorXd::Constant(3, 0.5))});
    for (int t = 0; t < 100; ++t)
    {
        const double v = gp.predict_var(random_point(rng, 3), 0);
        EXPECT_LE(v, 0.81);
        EXPECT_GE(v, 0.0);
    }
}

TEST(PredictVar, NonincreasingAsDataIsAdded)
{
    RandomSource rng(10);
    const GpDataset full = random_data(rng, 20, 2);
    const auto h = make_hyper(1.0, 0.1, VectorXd::Constant(2, 1.0));
    std::vector<double> previous;
    for (Eigen::Index N = 5; N <= 20; N += 5)
    {
        GpDataset d;
        d.inputs = full.inputs.topRows(N);
        d.targets = full.targets.topRows(N);
        const GpModel gp = GpModel::fit(d, {h});
        for (Eigen::Index i = 0; i < 5; ++i)
        {
            const double v = gp.predict_var(full.inputs.row(i).transpose(), 0);
            if (previous.size() == 5)
                EXPECT_LE(v, previous[static_cast<std::size_t>(i)] + 1e-15);
            else
                previous.push_back(v);
            previous[static_cast<std::size_t>(i)] = v;
        }
    }
}

TEST(Posterior, PermutationInvariant)
{
    RandomSource rng(11);
    const GpDataset d = random_data(rng, 9, 3);
    GpDataset p = d;
    const std::vector<int> perm{4, 2, 8, 0, 7, 1, 6, 3, 5};
    for (int i = 0; i < 9; ++i)
    {
        p.inputs.row(i) = d.inputs.row(perm[i]);
        p.targets.row(i) = d.targets.row(perm[i]);
    }
    const auto h = make_hyper(1.0, 0.2, VectorXd::Constant(3, 0.8));
    const GpModel a = GpModel::fit(d, {h});
    const GpModel b = GpModel::fit(p, {h});
    for (int t = 0; t < 10; ++t)
    {
        const VectorXd q = random_point(rng, 3);
        EXPECT_NEAR(a.predict_mean(q, 0), b.predict_mean(q, 0), 1e-12);
        EXPECT_NEAR(a.predict_var(q, 0), b.predict_var(q, 0), 1e-12);
    }
    EXPECT_NEAR(a.log_marginal_likelihood(0).value, b.log_marginal_likelihood(0).value, 1e-12);
}

TEST(GradMean, ZeroAtSingleTrainingInput)
{
    GpDataset d;
    d.inputs = (MatrixXd(1, 3) << 0.1, 0.2, 0.3).finished();
    d.targets = (MatrixXd(1, 1) << 1.0).finished();
    const GpModel gp = GpModel::fit(d, {make_hyper(1.0, 0.1, VectorXd::Ones(3))});
    EXPECT_EQ(gp.predict_grad_mean(d.inputs.row(0).transpose()).norm(), 0.0);
}

TEST(GradMean, MatchesFiniteDifferences)
{
    RandomSource rng(12);
    for (int t = 0; t < 20; ++t)
    {
        const GpDataset d = random_data(rng, 10, 4, 2);
        const std::vector<GpHyperparams> h{make_hyper(1.0, 0.1, VectorXd::Constant(4, 0.6)),
                                           make_hyper(2.0, 0.2, VectorXd::Constant(4, 1.5))};
        const GpModel gp = GpModel::fit(d, h);
        const VectorXd q = random_point(rng, 4);
        const MatrixXd fd = oracle::fd_jacobian([&](const VectorXd &z) { return gp.predict_mean(z); }, q, 1e-5);
        const MatrixXd an = gp.predict_grad_mean(q);
        ASSERT_EQ(an.rows(), 2);
        ASSERT_EQ(an.cols(), 4);
        EXPECT_LE((an - fd).lpNorm<Eigen::Infinity>(), 1e-5 * fd.lpNorm<Eigen::Infinity>());
    }
}

TEST(GradMean, ConstantKernelHasZeroGradient)
{
    RandomSource rng(13);
    const GpDataset d = random_data(rng, 6, 2);
    const GpModel gp = GpModel::fit(d, {make_hyper(1.0, 0.1, VectorXd::Constant(2, 1e-300))});
    EXPECT_LE(gp.predict_grad_mean(random_point(rng, 2)).lpNorm<Eigen::Infinity>(), 1e-250);
}

TEST(GradVar, FarQueryIsPriorCurvature)
{
    RandomSource rng(14);
    const VectorXd m = (VectorXd(2) << 0.5, 3.0).finished();
    const GpModel gp = GpModel::fit(random_data(rng, 5, 2), {make_hyper(1.5, 0.1, m)});
    const MatrixXd S = gp.predict_grad_var(VectorXd::Constant(2, 100.0)).front();
    EXPECT_LE((S - 2.25 * MatrixXd(m.asDiagonal())).norm(), 1e-14);
}

TEST(GradVar, SymmetricAndMatchesDenseOracle)
{
    RandomSource rng(15);
    const GpDataset d = random_data(rng, 3, 3);
    const auto h = make_hyper(1.2, 0.15, (VectorXd(3) << 0.4, 1.0, 2.5).finished());
    const GpModel gp = GpModel::fit(d, {h});
    const oracle::DenseGp dense(d.inputs, d.targets.col(0), h);
    for (int t = 0; t < 10; ++t)
    {
        const VectorXd q = random_point(rng, 3);
        const MatrixXd S = gp.predict_grad_var(q).front();
        EXPECT_LE((S - S.transpose()).lpNorm<Eigen::Infinity>(), 1e-12);
        const MatrixXd ref = dense.grad_var(q);
        EXPECT_LE((S - ref).lpNorm<Eigen::Infinity>(), 1e-10 * ref.lpNorm<Eigen::Infinity>());
    }
}

TEST(LogLikelihood, SinglePointClosedForm)
{
    const MatrixXd X = (MatrixXd(1, 1) << 0.0).finished();
    const VectorXd y = VectorXd::Constant(1, 1.3);
    const auto h = make_hyper(0.7, 0.2, VectorXd::Ones(1));
    const double s = 0.49 + 0.04;
    const double expected = -0.5 * 1.69 / s - 0.5 * std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
    EXPECT_NEAR(log_marginal_likelihood(X, y, h).value, expected, 1e-14);
}

TEST(LogLikelihood, MatchesDenseOracleAndFiniteDifferences)
{
    RandomSource rng(16);
    for (int t = 0; t < 10; ++t)
    {
        const GpDataset d = random_data(rng, 12, 3);
        const auto h = make_hyper(0.5 + rng.uniform(), 0.05 + 0.2 * rng.uniform(), VectorXd::Constant(3, 1.0));
        const LogLikelihood l = log_marginal_likelihood(d.inputs, d.targets.col(0), h);
        EXPECT_LE(rel_err(l.value, oracle::dense_log_likelihood(d.inputs, d.targets.col(0), h.to_log())), 1e-10);
        const VectorXd fd = oracle::fd_gradient(
            [&](const VectorXd &th) { return oracle::dense_log_likelihood(d.inputs, d.targets.col(0), th); },
            h.to_log(), 1e-5);
        EXPECT_LE((l.gradient - fd).lpNorm<Eigen::Infinity>(), 1e-5 * fd.lpNorm<Eigen::Infinity>());
    }
}

TEST(Hyperparams, LogRoundTrip)
{
    const auto h = make_hyper(0.3, 0.02, (VectorXd(2) << 4.0, 0.25).finished());
    const GpHyperparams back = GpHyperparams::from_log(h.to_log());
    EXPECT_NEAR(back.sigma_s, 0.3, 1e-15);
    EXPECT_NEAR(back.sigma_w, 0.02, 1e-16);
    EXPECT_LE((back.m_diag - h.m_diag).norm(), 1e-14);
}

TEST(Optimize, AscentContract)
{
    RandomSource rng(17);
    const GpDataset d = random_data(rng, 40, 2, 2);
    const auto traces = optimize_hyperparams(d, default_hyperparams(d));
    ASSERT_EQ(traces.size(), 2u);
    for (const auto &t : traces)
    {
        EXPECT_GE(t.final_value, t.initial_value);
        for (std::size_t i = 1; i < t.accepted_values.size(); ++i)
            EXPECT_GE(t.accepted_values[i], t.accepted_values[i - 1]);
        if (t.converged)
            EXPECT_LE(t.grad_norm, HyperOptConfig{}.grad_tol);
    }
}

TEST(Optimize, RecoversKnownHyperparameters)
{
    // Targets drawn from the prior with sigma_s = 1, sigma_w = 0.1, m = 1.
    RandomSource rng(18);
    const Eigen::Index N = 200;
    GpDataset d;
    d.inputs.resize(N, 2);
    for (Eigen::Index i = 0; i < N; ++i)
        d.inputs.row(i) = random_point(rng, 2).transpose() * 2.0;
    const auto truth = make_hyper(1.0, 0.1, VectorXd::Ones(2));
    MatrixXd K = kernel_matrix(d.inputs, truth);
    K.diagonal().array() += 0.01;
    const Eigen::LLT<MatrixXd> llt(K);
    d.targets = llt.matrixL() * rng.normal(N);
    const auto traces = optimize_hyperparams(d, default_hyperparams(d));
    const auto &h = traces.front().hyper;
    EXPECT_GT(h.sigma_s, 1.0 / 1.5);
    EXPECT_LT(h.sigma_s, 1.5);
    EXPECT_GT(h.sigma_w, 0.1 / 1.5);
    EXPECT_LT(h.sigma_w, 0.15);
}

TEST(Optimize, MultistartKeepsBestPerDimension)
{
    RandomSource rng(19);
    const GpDataset d = random_data(rng, 30, 2, 2);
    const auto a = optimize_hyperparams(d, default_hyperparams(d));
    const auto b = optimize_hyperparams(d, noise_dominated_hyperparams(d));
    const auto best = optimize_hyperparams_multistart(d, {default_hyperparams(d), noise_dominated_hyperparams(d)});
    for (std::size_t o = 0; o < 2; ++o)
        EXPECT_EQ(best[o].final_value, std::max(a[o].final_value, b[o].final_value));
    EXPECT_THROW(optimize_hyperparams_multistart(d, {}), InputError);
}

} // namespace
} // namespace gtddp
