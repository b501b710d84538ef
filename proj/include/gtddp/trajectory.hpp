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

#include <cstddef>
#include <vector>

namespace gtddp
{

/// States on a uniform time grid t_k = t0 + k dt, k = 0..K, with the controls
/// and disturbances applied on each interval k = 0..K-1. `w` may be empty for
/// logged plant rollouts that have no modeled adversary.
struct TrajectoryIterate
{
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<VectorXd> x;
    std::vector<VectorXd> u;
    std::vector<VectorXd> w;
    double cost = 0.0;          ///< soft-constrained cost J_gamma
    double cost_nominal = 0.0;  ///< the same trajectory scored without the -gamma^2 w'w term

    std::size_t steps() const { return u.size(); }
    double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
};

} // namespace gtddp
