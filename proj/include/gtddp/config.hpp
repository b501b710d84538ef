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

#include "gtddp/cost.hpp"
#include "gtddp/dynamics.hpp"
#include "gtddp/gp.hpp"
#include "gtddp/io.hpp"
#include "gtddp/sim.hpp"
#include "gtddp/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gtddp
{

struct PlantConfig
{
    /// "quadcopter", "planar_fixture" or "linear_fixture".
    std::string name = "quadcopter";
    QuadcopterParams quadcopter;
    PlanarParams planar;
    /// Plant parameters relative to the nominal model (quadcopter and planar).
    double inertia_scale = 1.2;
    double arm_scale = 1.1;
    /// Linear plant x' = A x + B u with disturbance channel D. A nonempty
    /// `scale` fixes W = diag(scale) instead of learning it.
    MatrixXd A, B, D;
    VectorXd scale;
    /// Empty means hover at the origin (quadcopter) or zero.
    VectorXd initial_state;
};

struct CollectConfig
{
    std::size_t rollouts = 4;
    std::size_t steps = 300;
    std::size_t hold_steps = 10;
    std::size_t substeps = 10;
    double amplitude = 500.0;
    /// Standard deviation of the process noise while logging training data.
    double noise_std = 1.0;
    std::size_t max_samples = 200;
    /// Start states; empty means `rollouts` copies of the initial state.
    std::vector<VectorXd> starts;
};

struct GpTrainConfig
{
    HyperOptConfig optimizer;
    /// Also start the ascent from the noise-dominated point and keep the
    /// better likelihood per output.
    bool multistart = true;
    /// Shared initial hyperparameters; unset means the data-driven default.
    std::optional<GpHyperparams> initial;
};

struct CostConfig
{
    /// "quadcopter" starts from the steering preset; "none" from zeros.
    std::string preset = "quadcopter";
    /// Diagonal overrides (take precedence over the preset) and full-matrix
    /// overrides (take precedence over everything).
    VectorXd Q_diag, R_diag, Qf_diag;
    MatrixXd Q, R, Qf;
    VectorXd x_f;
    std::optional<double> gamma;
};

struct SimConfig
{
    double noise_std = 10.0;
    /// Full covariance density; overrides noise_std when nonempty.
    MatrixXd noise_cov;
    std::size_t n_runs = 100;
};

struct ExperimentConfig
{
    std::uint64_t seed = 7;
    std::string output_dir = "gtddp_out";
    PlantConfig plant;
    CollectConfig collect;
    GpTrainConfig gp;
    CostConfig cost;
    SolverConfig solver;
    SimConfig sim;

    /// Throws InputError naming the offending key.
    void validate() const;

    Json to_json() const;
    /// Strict: unknown keys are rejected with their full path. Missing keys keep
    /// their defaults. The result is validated.
    static ExperimentConfig from_json(const Json &j);
    static ExperimentConfig load(const fs::path &path);
    /// FNV-1a of the canonical serialization without output_dir, so the same
    /// experiment written to two directories has one hash.
    std::uint64_t hash() const;
};

/// Everything the pipeline needs about the system, built from the config.
struct PlantSetup
{
    VectorField nominal;
    VectorField plant;
    MatrixXd channel;  ///< C, also the noise input matrix of the plant
    std::size_t n = 0;
    std::size_t m = 0;
    VectorXd x0;
    /// State slice used for terminal errors (position for the vehicles).
    Eigen::Index error_begin = 0;
    Eigen::Index error_count = 0;
};

PlantSetup make_plant(const ExperimentConfig &cfg);
QuadraticGameCost make_cost(const ExperimentConfig &cfg);
/// Linear plants with a fixed scale ignore `gp`.
GameDynamics make_game(const ExperimentConfig &cfg, const PlantSetup &plant, std::shared_ptr<const GpModel> gp);
MatrixXd sim_noise_cov(const ExperimentConfig &cfg, std::size_t q);

} // namespace gtddp
