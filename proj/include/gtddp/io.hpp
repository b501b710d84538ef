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
#include "gtddp/gp.hpp"
#include "gtddp/sim.hpp"
#include "gtddp/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace gtddp
{

namespace fs = std::filesystem;
using Json = nlohmann::json;

/// Unreadable, unwritable or malformed artifact files (CLI exit code 1).
class IoError : public InputError
{
public:
    using InputError::InputError;
};

/// Writes through a temporary file in the same directory and renames it into
/// place, so a failed write never leaves a partial file behind.
void write_file_atomic(const fs::path &path, const std::string &contents);
std::string read_file(const fs::path &path);

Json read_json(const fs::path &path);
void write_json(const fs::path &path, const Json &doc);

/// 17 significant digits, enough to reproduce every double exactly.
std::string format_double(double v);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string &bytes);

Json to_json(const VectorXd &v);
Json to_json(const MatrixXd &a);  ///< array of rows
VectorXd vector_from_json(const Json &j, const std::string &what);
MatrixXd matrix_from_json(const Json &j, const std::string &what);

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// CSV with header `t,x0..x{n-1},u0..u{m-1},dx0..dx{n-1}`, one row per sample.
std::string dataset_to_csv(const GpDataset &data);
/// Dimensions are read from the header. Errors name the offending line.
GpDataset dataset_from_csv(const std::string &text, const std::string &source = "dataset");
void write_dataset(const fs::path &path, const GpDataset &data);
GpDataset read_dataset(const fs::path &path);

// ---------------------------------------------------------------------------
// Hyperparameters and trained models
// ---------------------------------------------------------------------------

Json hyperparams_to_json(const GpHyperparams &h);
GpHyperparams hyperparams_from_json(const Json &j, const std::string &what = "hyperparameters");

/// Model file: the dataset it was trained on (path relative to the model
/// file) and the hyperparameters and log marginal likelihood per output.
struct ModelFile
{
    fs::path dataset;
    std::vector<GpHyperparams> hyper;
    std::vector<double> log_likelihood;
};

void write_model(const fs::path &path, const ModelFile &model);
ModelFile read_model(const fs::path &path);
/// Reads the model file, its dataset, and refits the posterior.
std::shared_ptr<const GpModel> load_gp(const fs::path &model_path);

// ---------------------------------------------------------------------------
// Policies, logs and ensembles
// ---------------------------------------------------------------------------

/// Solved trajectory plus gains, with explicit shapes.
Json policy_to_json(const SolveResult &result);
SolveResult policy_from_json(const Json &j);

/// `iter,cost,alpha,lambda,grad_norm,cost_nominal`.
std::string iteration_log_csv(const std::vector<IterationLog> &log);

/// `t,x0..,u0..`; the last knot has no control and leaves those cells empty.
std::string run_csv(const TrajectoryIterate &run);

/// `t,mean_x0..,std_x0..,goal_x0..`.
std::string summary_csv(const RolloutEnsemble &ens, const VectorXd &goal, double dt, double t0 = 0.0);

} // namespace gtddp
