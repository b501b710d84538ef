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
#include "gtddp/trajectory.hpp"

#include <functional>
#include <memory>
#include <numbers>

namespace gtddp
{

/// f(x, u): a deterministic vector field.
using VectorField = std::function<VectorXd(const VectorXd &, const VectorXd &)>;

// ---------------------------------------------------------------------------
// Quadcopter
// ---------------------------------------------------------------------------

namespace quad
{
constexpr int kStateDim = 16;
constexpr int kControlDim = 4;
// State layout: position, Euler angles (roll, pitch, yaw), velocity, body
// rates, motor speeds.
constexpr int kPos = 0;
constexpr int kEuler = 3;
constexpr int kVel = 6;
constexpr int kRates = 9;
constexpr int kMotors = 12;
/// Roll must stay this far from +-pi/2, where the Euler-rate map is singular.
constexpr double kSingularityMargin = 1e-3;
} // namespace quad

struct QuadcopterParams
{
    double mass = 0.5;          // kg
    double gravity = 9.81;      // m/s^2
    double arm_length = 0.175;  // m
    Eigen::Vector3d inertia{2.32e-3, 2.32e-3, 4.0e-3};  // kg m^2, body-frame diagonal
    double k_m = 1.0 / 20.0;    // 1/s
    double k_F = 6.11e-8;       // N/rpm^2
    double k_M = 1.5e-9;        // N m/rpm^2

    /// Motor speed at which total thrust balances gravity.
    double omega_h() const;
    void validate() const;
};

/// Body-to-inertial rotation for roll phi, pitch theta, yaw psi.
Eigen::Matrix3d quad_rotation(double phi, double theta, double psi);

/// The 16 x 4 control input matrix: k_m times the motor mixing pattern in the
/// motor rows, zero elsewhere.
MatrixXd quad_input_matrix(const QuadcopterParams &p);

/// Nominal quadcopter vector field f(x) + G u. Throws
/// KinematicSingularityError when the roll angle reaches the singular set of
/// the Euler-rate map.
VectorXd quad_nominal(const VectorXd &x, const VectorXd &u, const QuadcopterParams &p);

/// Hover state at the given position: level attitude, zero rates, motors at
/// omega_h.
VectorXd quad_hover_state(const QuadcopterParams &p, const Eigen::Vector3d &position = Eigen::Vector3d::Zero());

VectorField quadcopter_model(const QuadcopterParams &p);

/// The same structure as the nominal model with inertia and arm length scaled.
VectorField perturbed_plant(const QuadcopterParams &p, double inertia_scale = 1.2, double arm_scale = 1.1);

// ---------------------------------------------------------------------------
// Test fixtures
// ---------------------------------------------------------------------------

/// x' = A x + B u.
VectorField linear_fixture(const MatrixXd &A, const MatrixXd &B);

/// Planar quadrotor: state (y, z, theta, y', z', theta'), controls are the two
/// rotor thrust deviations from hover (N).
struct PlanarParams
{
    double mass = 0.5;
    double gravity = 9.81;
    double arm_length = 0.175;
    double inertia = 2.32e-3;
};
VectorField planar_fixture(const PlanarParams &p = {});
MatrixXd planar_input_matrix(const PlanarParams &p = {});

// ---------------------------------------------------------------------------
// Game dynamics F(x, u, w) = fbar(x, u) + mu(x, u) + W(x, u) C w
// ---------------------------------------------------------------------------

struct Linearization
{
    MatrixXd F_x;  ///< n x n
    MatrixXd F_u;  ///< n x m
    MatrixXd F_w;  ///< n x q, equal to W C
};

class GameDynamics
{
public:
    /// Nominal model plus an optional learned residual. Without a residual the
    /// mean and the disturbance scale are both zero.
    static GameDynamics compose(VectorField nominal, std::size_t state_dim, std::size_t control_dim,
                                std::shared_ptr<const GpModel> residual, MatrixXd channel);

    /// Nominal model with a fixed diagonal disturbance scale W (fixtures).
    static GameDynamics with_constant_scale(VectorField nominal, std::size_t state_dim, std::size_t control_dim,
                                            MatrixXd channel, VectorXd scale);

    std::size_t state_dim() const { return n_; }
    std::size_t control_dim() const { return m_; }
    std::size_t disturbance_dim() const { return static_cast<std::size_t>(channel_.cols()); }
    const MatrixXd &channel() const { return channel_; }
    const std::shared_ptr<const GpModel> &residual() const { return gp_; }
    const VectorField &nominal() const { return nominal_; }

    VectorXd operator()(const VectorXd &x, const VectorXd &u, const VectorXd &w) const;

    /// mu(x, u); zero without a residual.
    VectorXd residual_mean(const VectorXd &x, const VectorXd &u) const;
    /// Diagonal of W(x, u): elementwise square root of the residual variance.
    VectorXd disturbance_scale(const VectorXd &x, const VectorXd &u) const;

    /// Jacobians at (x, u, w). The nominal and disturbance parts are
    /// differentiated by central differences; the residual mean uses the
    /// analytic GP gradient.
    Linearization linearize(const VectorXd &x, const VectorXd &u, const VectorXd &w) const;

private:
    // fbar + W C w, without the residual mean.
    VectorXd nominal_and_disturbance(const VectorXd &x, const VectorXd &u, const VectorXd &w) const;
    VectorXd chi(const VectorXd &x, const VectorXd &u) const;
    void check(const VectorXd &x, const VectorXd &u, const VectorXd &w) const;

    VectorField nominal_;
    std::size_t n_ = 0;
    std::size_t m_ = 0;
    std::shared_ptr<const GpModel> gp_;
    MatrixXd channel_;
    VectorXd constant_scale_;  // empty unless built with with_constant_scale
};

/// Residual regression targets from a logged rollout: for every interior knot
/// the central-difference state derivative minus the nominal vector field.
GpDataset collect_training_data(const VectorField &nominal, const TrajectoryIterate &rollout);

} // namespace gtddp
