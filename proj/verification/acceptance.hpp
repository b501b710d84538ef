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
#include <string>
#include <vector>

namespace gtddp::acceptance
{

struct CriterionResult
{
    int id = 0;
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double tolerance = 0.0;
    double seconds = 0.0;
    double time_limit = 0.0;  ///< 0 when the criterion states no runtime
    std::string detail;       ///< one line, includes secondary checks
};

struct Options
{
    /// Criteria to run; empty runs 1 through 8.
    std::vector<int> criteria;
    /// Multiplies every feedback gain in the LQ solves (suite sensitivity check).
    double gain_sign = 1.0;
    std::uint64_t seed = 2026;
};

/// Runs the requested criteria, printing one line per criterion to `log` as
/// it finishes.
std::vector<CriterionResult> run(const Options &opt, std::ostream &log);

std::string format(const CriterionResult &r);

// Fixtures shared with the unit tests.

/// Double integrator x = (position, velocity) with a disturbance on the
/// velocity: A = [[0,1],[0,0]], B = (0,1), channel (0,1) scaled by W = d.
struct LqFixture
{
    MatrixXd A, B, C, Q, R, Q_f;
    VectorXd scale;
    VectorXd x0;
    double horizon = 1.0;
};
LqFixture lq_fixture(double disturbance = 0.5);
GameDynamics lq_dynamics(const LqFixture &f);
QuadraticGameCost lq_cost(const LqFixture &f, double gamma);

/// Held-out one-step prediction on a noise-free excitation rollout of the
/// plant: prediction x + dt F(x, u, 0) against the plant's Euler step.
struct PredictionError
{
    double standardized_nominal = 0.0;  ///< error of the nominal model alone
    double standardized_composed = 0.0;
    double raw_nominal = 0.0;
    double raw_composed = 0.0;
    double standardized_ratio() const { return standardized_composed / standardized_nominal; }
    double raw_ratio() const { return raw_composed / raw_nominal; }
};
PredictionError heldout_prediction_error(const ExperimentConfig &cfg, const GameDynamics &composed,
                                         std::uint64_t seed, std::size_t steps = 200);

} // namespace gtddp::acceptance
