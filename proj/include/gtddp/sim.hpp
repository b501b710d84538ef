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
#include "gtddp/dynamics.hpp"
#include "gtddp/gp.hpp"
#include "gtddp/trajectory.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace gtddp
{

/// Euler-Maruyama settings for dx = f(x, u) dt + G dw, dw ~ N(0, noise_cov dt).
struct SdeConfig
{
    double dt = 0.01;
    MatrixXd noise_cov;  ///< q x q covariance density
    std::uint64_t seed = 0;
    std::size_t n_runs = 100;

    void validate(std::size_t disturbance_dim) const;
};

/// SplitMix64 finalizer applied to seed + golden-ratio * (index + 1). Used to
/// derive independent per-run seeds from one master seed.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

/// Standard normal and uniform draws from a 64-bit Mersenne Twister. Both
/// transforms are spelled out here (53-bit uniforms, Box-Muller) so that a
/// seed produces the same numbers with every standard library.
class RandomSource
{
public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

    double uniform();  ///< [0, 1)
    double normal();
    VectorXd normal(Eigen::Index n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Precomputed diffusion for one Euler-Maruyama scheme.
class EulerMaruyama
{
public:
    EulerMaruyama(VectorField plant, MatrixXd G, const SdeConfig &cfg);

    /// x + f(x, u) dt + G xi with xi ~ N(0, noise_cov dt).
    VectorXd step(const VectorXd &x, const VectorXd &u, RandomSource &rng) const;
    double dt() const { return dt_; }
    bool noiseless() const { return noiseless_; }

private:
    VectorField plant_;
    MatrixXd G_;
    MatrixXd diffusion_;  // G * sqrt(noise_cov) * sqrt(dt)
    double dt_;
    bool noiseless_;
};

VectorXd em_step(const VectorXd &x, const VectorXd &u, const VectorField &plant, const MatrixXd &G,
                 const SdeConfig &cfg, RandomSource &rng);

/// u(x, k).
using ControlLaw = std::function<VectorXd(const VectorXd &, std::size_t)>;

/// Integrates `steps` intervals under the control law. Throws DivergenceError
/// (run id `run`) on a non-finite or singular state.
TrajectoryIterate rollout_closed_loop(const VectorXd &x0, const ControlLaw &policy, std::size_t steps,
                                      const EulerMaruyama &scheme, RandomSource &rng, long run = 0);

struct RolloutEnsemble
{
    std::vector<TrajectoryIterate> runs;  ///< failed runs hold the prefix up to the failure
    std::vector<bool> failed;
    std::vector<std::string> failure_messages;
    std::vector<std::uint64_t> seeds;
    MatrixXd mean;  ///< (K+1) x n over successful runs
    MatrixXd std;   ///< population standard deviation over successful runs

    std::size_t successes() const;
    /// Per successful run, || x_K[begin:begin+count] - goal ||.
    std::vector<double> terminal_errors(const VectorXd &goal, Eigen::Index begin, Eigen::Index count) const;
    /// Recomputes mean and std from the stored runs.
    void recompute_statistics();
};

class EnsembleFailure : public NumericError
{
public:
    EnsembleFailure(const std::string &what, RolloutEnsemble ensemble)
        : NumericError(what), ensemble_(std::move(ensemble))
    {
    }
    const RolloutEnsemble &ensemble() const { return ensemble_; }

private:
    RolloutEnsemble ensemble_;
};

/// cfg.n_runs independent rollouts, run r seeded with split_seed(cfg.seed, r).
/// Throws EnsembleFailure only when every run fails.
RolloutEnsemble monte_carlo(const VectorXd &x0, const ControlLaw &policy, std::size_t steps, const VectorField &plant,
                            const MatrixXd &G, const SdeConfig &cfg);

/// Random excitation around a feedforward control, held piecewise constant.
struct ExcitationConfig
{
    VectorXd base_control;      ///< empty means zero
    double amplitude = 500.0;   ///< half-width of the uniform perturbation per control
    std::size_t hold_steps = 10;
    std::size_t steps = 100;    ///< logged intervals per rollout
    std::size_t max_samples = 200;
    /// Integration steps per logged interval. The plant evolves on the finer
    /// grid and is sampled every cfg.dt, as a logger would observe it.
    std::size_t substeps = 10;
};

struct TrainingData
{
    GpDataset data;
    std::size_t failed_rollouts = 0;
};

/// Logs one excitation rollout per start state on the plant, converts each
/// into residual targets against `nominal`, concatenates them and subsamples
/// by a uniform stride to at most `max_samples` rows. Samples whose central
/// difference straddles a control switch are dropped, since the state
/// derivative jumps there.
TrainingData generate_training_rollouts(const std::vector<VectorXd> &starts, const ExcitationConfig &excitation,
                                        const VectorField &plant, const VectorField &nominal, const MatrixXd &G,
                                        const SdeConfig &cfg);

/// Keeps rows 0, s, 2s, ... with s = ceil(N / max_rows).
GpDataset subsample(const GpDataset &data, std::size_t max_rows);

} // namespace gtddp
