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
#include "gtddp/sim.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

namespace gtddp
{

void SdeConfig::validate(std::size_t disturbance_dim) const
{
    if (!(dt > 0.0))
        throw InputError("sim: dt must be positive");
    if (n_runs < 1)
        throw InputError("sim: n_runs must be at least 1");
    const auto q = static_cast<Eigen::Index>(disturbance_dim);
    if (noise_cov.rows() != q || noise_cov.cols() != q)
        throw ShapeError("sim: noise covariance must be " + std::to_string(q) + " x " + std::to_string(q));
    if ((noise_cov - noise_cov.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * std::max(1.0, noise_cov.norm()))
        throw InputError("sim: noise covariance must be symmetric");
    if (q > 0 && Eigen::SelfAdjointEigenSolver<MatrixXd>(noise_cov).eigenvalues().minCoeff() <
                     -1e-12 * std::max(1.0, noise_cov.norm()))
        throw InputError("sim: noise covariance must be positive semidefinite");
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double RandomSource::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RandomSource::normal()
{
    if (has_spare_)
    {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
        u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

VectorXd RandomSource::normal(Eigen::Index n)
{
    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i)
        z[i] = normal();
    return z;
}

EulerMaruyama::EulerMaruyama(VectorField plant, MatrixXd G, const SdeConfig &cfg)
    : plant_(std::move(plant)), G_(std::move(G)), dt_(cfg.dt)
{
    cfg.validate(static_cast<std::size_t>(G_.cols()));
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(cfg.noise_cov);
    const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const MatrixXd sqrt_cov = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    diffusion_ = std::sqrt(dt_) * G_ * sqrt_cov;
    noiseless_ = !(cfg.noise_cov.array() != 0.0).any();
}

VectorXd EulerMaruyama::step(const VectorXd &x, const VectorXd &u, RandomSource &rng) const
{
    VectorXd next = x + dt_ * plant_(x, u);
    if (!noiseless_)
        next += diffusion_ * rng.normal(diffusion_.cols());
    return next;
}

VectorXd em_step(const VectorXd &x, const VectorXd &u, const VectorField &plant, const MatrixXd &G,
                 const SdeConfig &cfg, RandomSource &rng)
{
    return EulerMaruyama(plant, G, cfg).step(x, u, rng);
}

TrajectoryIterate rollout_closed_loop(const VectorXd &x0, const ControlLaw &policy, std::size_t steps,
                                      const EulerMaruyama &scheme, RandomSource &rng, long run)
{
    TrajectoryIterate t;
    t.dt = scheme.dt();
    t.x.reserve(steps + 1);
    t.u.reserve(steps);
    t.x.push_back(x0);
    for (std::size_t k = 0; k < steps; ++k)
    {
        VectorXd next;
        try
        {
            t.u.push_back(policy(t.x.back(), k));
            next = scheme.step(t.x.back(), t.u.back(), rng);
        }
        catch (const KinematicSingularityError &e)
        {
            throw DivergenceError(std::string("run ") + std::to_string(run) + " hit a singular attitude at knot " +
                                      std::to_string(k) + ": " + e.what(),
                                  run, static_cast<long>(k));
        }
        if (!next.allFinite())
            throw DivergenceError("run " + std::to_string(run) + " diverged at knot " + std::to_string(k + 1), run,
                                  static_cast<long>(k + 1));
        t.x.push_back(std::move(next));
    }
    return t;
}

std::size_t RolloutEnsemble::successes() const
{
    std::size_t n = 0;
    for (bool f : failed)
        n += f ? 0 : 1;
    return n;
}

std::vector<double> RolloutEnsemble::terminal_errors(const VectorXd &goal, Eigen::Index begin, Eigen::Index count) const
{
    std::vector<double> out;
    for (std::size_t r = 0; r < runs.size(); ++r)
        if (!failed[r])
            out.push_back((runs[r].x.back().segment(begin, count) - goal.segment(begin, count)).norm());
    return out;
}

void RolloutEnsemble::recompute_statistics()
{
    mean.resize(0, 0);
    std.resize(0, 0);
    const std::size_t ok = successes();
    if (ok == 0)
        return;
    std::size_t first = 0;
    while (failed[first])
        ++first;
    const auto knots = static_cast<Eigen::Index>(runs[first].x.size());
    const auto n = runs[first].x.front().size();
    mean = MatrixXd::Zero(knots, n);
    for (std::size_t r = 0; r < runs.size(); ++r)
        if (!failed[r])
            for (Eigen::Index k = 0; k < knots; ++k)
                mean.row(k) += runs[r].x[static_cast<std::size_t>(k)].transpose();
    mean /= static_cast<double>(ok);
    MatrixXd var = MatrixXd::Zero(knots, n);
    for (std::size_t r = 0; r < runs.size(); ++r)
        if (!failed[r])
            for (Eigen::Index k = 0; k < knots; ++k)
                var.row(k) += (runs[r].x[static_cast<std::size_t>(k)].transpose() - mean.row(k)).array().square().matrix();
    std = (var / static_cast<double>(ok)).cwiseSqrt();
}

RolloutEnsemble monte_carlo(const VectorXd &x0, const ControlLaw &policy, std::size_t steps, const VectorField &plant,
                            const MatrixXd &G, const SdeConfig &cfg)
{
    const EulerMaruyama scheme(plant, G, cfg);
    RolloutEnsemble ens;
    ens.runs.resize(cfg.n_runs);
    ens.failed.assign(cfg.n_runs, false);
    ens.failure_messages.assign(cfg.n_runs, "");
    ens.seeds.resize(cfg.n_runs);
    for (std::size_t r = 0; r < cfg.n_runs; ++r)
    {
        ens.seeds[r] = split_seed(cfg.seed, r);
        RandomSource rng(ens.seeds[r]);
        try
        {
            ens.runs[r] = rollout_closed_loop(x0, policy, steps, scheme, rng, static_cast<long>(r));
        }
        catch (const NumericError &e)
        {
            ens.failed[r] = true;
            ens.failure_messages[r] = e.what();
        }
    }
    ens.recompute_statistics();
    if (ens.successes() == 0)
        throw EnsembleFailure("all " + std::to_string(cfg.n_runs) + " Monte-Carlo runs failed", std::move(ens));
    return ens;
}

GpDataset subsample(const GpDataset &data, std::size_t max_rows)
{
    const std::size_t n = data.size();
    if (max_rows == 0 || n <= max_rows)
        return data;
    const std::size_t stride = (n + max_rows - 1) / max_rows;
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < n; i += stride)
        keep.push_back(static_cast<Eigen::Index>(i));
    GpDataset out;
    out.inputs = data.inputs(keep, Eigen::all);
    out.targets = data.targets(keep, Eigen::all);
    if (data.times.size() == data.inputs.rows())
        out.times = data.times(keep);
    return out;
}

TrainingData generate_training_rollouts(const std::vector<VectorXd> &starts, const ExcitationConfig &excitation,
                                        const VectorField &plant, const VectorField &nominal, const MatrixXd &G,
                                        const SdeConfig &cfg)
{
    if (starts.empty())
        throw InputError("generate_training_rollouts: need at least one start state");
    if (excitation.steps < 2 || excitation.hold_steps < 1 || excitation.substeps < 1)
        throw InputError("generate_training_rollouts: rollouts need at least 2 steps, a positive hold and substeps");
    SdeConfig fine = cfg;
    fine.dt = cfg.dt / static_cast<double>(excitation.substeps);
    const EulerMaruyama scheme(plant, G, fine);
    const Eigen::Index m = G.cols();
    const VectorXd base = excitation.base_control.size() ? excitation.base_control : VectorXd::Zero(m);
    require_shape(base.size() == m, "generate_training_rollouts: base control has wrong dimension");

    TrainingData out;
    std::vector<GpDataset> parts;
    for (std::size_t i = 0; i < starts.size(); ++i)
    {
        RandomSource noise(split_seed(cfg.seed, 2 * i));
        RandomSource excite(split_seed(cfg.seed, 2 * i + 1));
        VectorXd held = base;
        TrajectoryIterate log;
        log.dt = cfg.dt;
        log.x.push_back(starts[i]);
        bool failed = false;
        for (std::size_t k = 0; k < excitation.steps && !failed; ++k)
        {
            if (k % excitation.hold_steps == 0)
            {
                held = base;
                for (Eigen::Index j = 0; j < m; ++j)
                    held[j] += excitation.amplitude * (2.0 * excite.uniform() - 1.0);
            }
            try
            {
                VectorXd x = log.x.back();
                for (std::size_t s = 0; s < excitation.substeps; ++s)
                    x = scheme.step(x, held, noise);
                if (!x.allFinite())
                {
                    failed = true;
                    break;
                }
                log.u.push_back(held);
                log.x.push_back(std::move(x));
            }
            catch (const NumericError &)
            {
                failed = true;
            }
        }
        if (failed)
            ++out.failed_rollouts;
        if (log.x.size() < 3)
            continue;
        GpDataset part;
        // Nominal evaluation can itself hit the attitude singularity near a failure point.
        try
        {
            part = collect_training_data(nominal, log);
        }
        catch (const NumericError &)
        {
            if (!failed)
                ++out.failed_rollouts;
            continue;
        }
        std::vector<Eigen::Index> smooth;
        for (std::size_t r = 1; r + 1 < log.x.size(); ++r)
            if (log.u[r - 1] == log.u[r])
                smooth.push_back(static_cast<Eigen::Index>(r - 1));
        GpDataset kept;
        kept.inputs = part.inputs(smooth, Eigen::all);
        kept.targets = part.targets(smooth, Eigen::all);
        kept.times = part.times(smooth);
        parts.push_back(std::move(kept));
    }
    out.data = subsample(GpDataset::concatenate(parts), excitation.max_samples);
    return out;
}

} // namespace gtddp
