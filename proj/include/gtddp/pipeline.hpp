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

#include "gtddp/config.hpp"

#include <iosfwd>
#include <optional>

namespace gtddp
{

// The four experiment stages. Each writes its artifacts into `out_dir` and
// reports progress on `log`.

struct CollectOutput
{
    fs::path dataset;
    std::size_t samples = 0;
    std::size_t failed_rollouts = 0;
};

/// Excitation rollouts on the plant per the collect section, in memory.
TrainingData collect_training(const ExperimentConfig &cfg);

/// Excitation rollouts on the plant, written as dataset.csv.
CollectOutput cmd_collect(const ExperimentConfig &cfg, const fs::path &out_dir, std::ostream &log);

struct TrainOutput
{
    fs::path model;
    std::vector<HyperOptTrace> traces;
};

/// Hyperparameter ascent per output dimension, written as model.json next to
/// a reference to the dataset.
TrainOutput cmd_train(const ExperimentConfig &cfg, const fs::path &dataset, const fs::path &out_dir,
                      std::ostream &log);

/// Learned hyperparameters for a dataset, as cmd_train computes them.
std::vector<HyperOptTrace> train_hyperparams(const ExperimentConfig &cfg, const GpDataset &data);

struct SolveOutput
{
    fs::path policy;
    fs::path iterations;
    SolveResult result;
};

/// Solves the game, writing policy.json and iterations.csv. Without a model
/// the disturbance scale is zero (or the fixed linear scale). On a stall or a
/// saddle failure the best iterate and its log are still written before the
/// error is rethrown.
SolveOutput cmd_solve(const ExperimentConfig &cfg, const std::optional<fs::path> &model, const fs::path &out_dir,
                      std::ostream &log);

struct SimulateOutput
{
    fs::path summary;
    fs::path manifest;
    RolloutEnsemble ensemble;
    std::vector<double> terminal_errors;  ///< successful runs only
};

/// Monte-Carlo rollouts of the plant under the stored policy: runs/run_XXX.csv,
/// summary.csv and manifest.json. If every run fails the manifest is written
/// and EnsembleFailure is rethrown.
SimulateOutput cmd_simulate(const ExperimentConfig &cfg, const fs::path &policy, const fs::path &out_dir,
                            std::ostream &log);

} // namespace gtddp
