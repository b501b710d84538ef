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
#include "gtddp/dynamics.hpp"

#include <cmath>
#include <string>

namespace gtddp
{

double QuadcopterParams::omega_h() const { return std::sqrt(mass * gravity / (4.0 * k_F)); }

void QuadcopterParams::validate() const
{
    const bool ok = mass > 0 && gravity > 0 && arm_length > 0 && (inertia.array() > 0).all() && k_m > 0 && k_F > 0 &&
                    k_M > 0 && inertia.allFinite();
    if (!ok)
        throw InputError("quadcopter parameters must all be positive");
}

Eigen::Matrix3d quad_rotation(double phi, double theta, double psi)
{
    const double cf = std::cos(phi), sf = std::sin(phi);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cp = std::cos(psi), sp = std::sin(psi);
    Eigen::Matrix3d R;
    R << cp * ct - sf * sp * st, -cf * sp, cp * st + ct * sf * sp,
         ct * sp + cp * sf * st, cf * cp, sp * st - cp * ct * sf,
         -cf * st, sf, cf * ct;
    return R;
}

MatrixXd quad_input_matrix(const QuadcopterParams &p)
{
    MatrixXd G = MatrixXd::Zero(quad::kStateDim, quad::kControlDim);
    G.bottomRows(4) << 1, 0, -1, 1,
                       1, 1, 0, -1,
                       1, 0, 1, 1,
                       1, -1, 0, -1;
    return p.k_m * G;
}

VectorXd quad_nominal(const VectorXd &x, const VectorXd &u, const QuadcopterParams &p)
{
    require_shape(x.size() == quad::kStateDim, "quadcopter state must have 16 entries");
    require_shape(u.size() == quad::kControlDim, "quadcopter control must have 4 entries");
    const double phi = x[quad::kEuler], theta = x[quad::kEuler + 1], psi = x[quad::kEuler + 2];
    const double cf = std::cos(phi);
    if (std::abs(cf) <= std::sin(quad::kSingularityMargin) || !std::isfinite(cf))
        throw KinematicSingularityError("Euler-rate map is singular at roll angle " + std::to_string(phi), phi);

    const Eigen::Vector3d rates = x.segment<3>(quad::kRates);
    const Eigen::Vector4d omega = x.segment<4>(quad::kMotors);
    const Eigen::Vector4d thrust = p.k_F * omega.array().square();
    const Eigen::Vector4d drag = p.k_M * omega.array().square();

    VectorXd dx(quad::kStateDim);
    dx.segment<3>(quad::kPos) = x.segment<3>(quad::kVel);

    Eigen::Matrix3d euler_map;
    euler_map << std::cos(theta), 0.0, -cf * std::sin(theta),
                 0.0, 1.0, std::sin(phi),
                 std::sin(theta), 0.0, cf * std::cos(theta);
    dx.segment<3>(quad::kEuler) = euler_map.partialPivLu().solve(rates);

    const Eigen::Vector3d body_thrust(0.0, 0.0, thrust.sum() / p.mass);
    dx.segment<3>(quad::kVel) = Eigen::Vector3d(0.0, 0.0, -p.gravity) + quad_rotation(phi, theta, psi) * body_thrust;

    const Eigen::Vector3d moments(p.arm_length * (thrust[1] - thrust[3]), p.arm_length * (thrust[2] - thrust[0]),
                                  drag[0] - drag[1] + drag[2] - drag[3]);
    const Eigen::Vector3d I_rates = p.inertia.cwiseProduct(rates);
    dx.segment<3>(quad::kRates) = (moments - rates.cross(I_rates)).cwiseQuotient(p.inertia);

    dx.segment<4>(quad::kMotors) = p.k_m * (Eigen::Vector4d::Constant(p.omega_h()) - omega);
    dx += quad_input_matrix(p) * u;
    return dx;
}

VectorXd quad_hover_state(const QuadcopterParams &p, const Eigen::Vector3d &position)
{
    VectorXd x = VectorXd::Zero(quad::kStateDim);
    x.segment<3>(quad::kPos) = position;
    x.segment<4>(quad::kMotors).setConstant(p.omega_h());
    return x;
}

VectorField quadcopter_model(const QuadcopterParams &p)
{
    p.validate();
    return [p](const VectorXd &x, const VectorXd &u) { return quad_nominal(x, u, p); };
}

VectorField perturbed_plant(const QuadcopterParams &p, double inertia_scale, double arm_scale)
{
    if (!(inertia_scale > 0.0) || !(arm_scale > 0.0))
        throw InputError("perturbation factors must be positive");
    QuadcopterParams q = p;
    q.inertia *= inertia_scale;
    q.arm_length *= arm_scale;
    return quadcopter_model(q);
}

VectorField linear_fixture(const MatrixXd &A, const MatrixXd &B)
{
    require_shape(A.rows() == A.cols() && B.rows() == A.rows(), "linear fixture: A must be square and B match");
    return [A, B](const VectorXd &x, const VectorXd &u) -> VectorXd {
        require_shape(x.size() == A.rows() && u.size() == B.cols(), "linear fixture: argument shape mismatch");
        return A * x + B * u;
    };
}

VectorField planar_fixture(const PlanarParams &p)
{
    return [p](const VectorXd &x, const VectorXd &u) -> VectorXd {
        require_shape(x.size() == 6 && u.size() == 2, "planar fixture: expects 6 states and 2 controls");
        const double thrust = p.mass * p.gravity + u[0] + u[1];
        VectorXd dx(6);
        dx.head<3>() = x.tail<3>();
        dx[3] = -thrust * std::sin(x[2]) / p.mass;
        dx[4] = thrust * std::cos(x[2]) / p.mass - p.gravity;
        dx[5] = p.arm_length * (u[0] - u[1]) / p.inertia;
        return dx;
    };
}

MatrixXd planar_input_matrix(const PlanarParams &p)
{
    MatrixXd B = MatrixXd::Zero(6, 2);
    B(4, 0) = B(4, 1) = 1.0 / p.mass;
    B(5, 0) = p.arm_length / p.inertia;
    B(5, 1) = -p.arm_length / p.inertia;
    return B;
}

GameDynamics GameDynamics::compose(VectorField nominal, std::size_t state_dim, std::size_t control_dim,
                                   std::shared_ptr<const GpModel> residual, MatrixXd channel)
{
    require_shape(static_cast<std::size_t>(channel.rows()) == state_dim,
                  "disturbance channel must have one row per state");
    if (residual)
    {
        require_shape(residual->output_dim() == state_dim, "GP residual output dimension must equal the state dimension");
        require_shape(residual->input_dim() == state_dim + control_dim,
                      "GP residual input dimension must equal state plus control dimension");
    }
    GameDynamics d;
    d.nominal_ = std::move(nominal);
    d.n_ = state_dim;
    d.m_ = control_dim;
    d.gp_ = std::move(residual);
    d.channel_ = std::move(channel);
    return d;
}

GameDynamics GameDynamics::with_constant_scale(VectorField nominal, std::size_t state_dim, std::size_t control_dim,
                                               MatrixXd channel, VectorXd scale)
{
    require_shape(static_cast<std::size_t>(scale.size()) == state_dim, "disturbance scale must have one entry per state");
    GameDynamics d = compose(std::move(nominal), state_dim, control_dim, nullptr, std::move(channel));
    d.constant_scale_ = std::move(scale);
    return d;
}

void GameDynamics::check(const VectorXd &x, const VectorXd &u, const VectorXd &w) const
{
    require_shape(static_cast<std::size_t>(x.size()) == n_, "game dynamics: state has wrong dimension");
    require_shape(static_cast<std::size_t>(u.size()) == m_, "game dynamics: control has wrong dimension");
    require_shape(w.size() == channel_.cols(), "game dynamics: disturbance has wrong dimension");
}

VectorXd GameDynamics::chi(const VectorXd &x, const VectorXd &u) const
{
    VectorXd z(x.size() + u.size());
    z << x, u;
    return z;
}

VectorXd GameDynamics::residual_mean(const VectorXd &x, const VectorXd &u) const
{
    if (!gp_)
        return VectorXd::Zero(static_cast<Eigen::Index>(n_));
    return gp_->predict_mean(chi(x, u));
}

VectorXd GameDynamics::disturbance_scale(const VectorXd &x, const VectorXd &u) const
{
    if (constant_scale_.size() > 0)
        return constant_scale_;
    if (!gp_)
        return VectorXd::Zero(static_cast<Eigen::Index>(n_));
    return gp_->predict_var(chi(x, u)).cwiseSqrt();
}

VectorXd GameDynamics::nominal_and_disturbance(const VectorXd &x, const VectorXd &u, const VectorXd &w) const
{
    VectorXd f = nominal_(x, u);
    require_shape(static_cast<std::size_t>(f.size()) == n_, "nominal model returned a vector of the wrong size");
    const VectorXd cw = channel_ * w;
    if (constant_scale_.size() > 0)
        return f + constant_scale_.cwiseProduct(cw);
    if (!gp_)
        return f;
    // W is diagonal, so only rows the channel actually drives need a variance.
    const VectorXd z = chi(x, u);
    for (Eigen::Index d = 0; d < cw.size(); ++d)
        if (cw[d] != 0.0)
            f[d] += std::sqrt(gp_->predict_var(z, static_cast<std::size_t>(d))) * cw[d];
    return f;
}

VectorXd GameDynamics::operator()(const VectorXd &x, const VectorXd &u, const VectorXd &w) const
{
    check(x, u, w);
    VectorXd f = nominal_and_disturbance(x, u, w);
    if (gp_)
        f += gp_->predict_mean(chi(x, u));
    return f;
}

Linearization GameDynamics::linearize(const VectorXd &x, const VectorXd &u, const VectorXd &w) const
{
    check(x, u, w);
    const auto n = static_cast<Eigen::Index>(n_);
    const auto m = static_cast<Eigen::Index>(m_);
    Linearization lin;
    lin.F_x.resize(n, n);
    lin.F_u.resize(n, m);

    // Cube root of machine epsilon balances truncation and rounding error.
    auto step = [](double v) { return 6e-6 * std::max(1.0, std::abs(v)); };
    auto finite_or_throw = [&](const VectorXd &v, const char *what, Eigen::Index j) {
        if (!v.allFinite())
            throw EvaluationError(std::string("non-finite dynamics while differentiating with respect to ") + what +
                                  "[" + std::to_string(j) + "]");
    };

    VectorXd xp = x, xm = x;
    for (Eigen::Index j = 0; j < n; ++j)
    {
        const double h = step(x[j]);
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        const VectorXd fp = nominal_and_disturbance(xp, u, w);
        const VectorXd fm = nominal_and_disturbance(xm, u, w);
        finite_or_throw(fp, "x", j);
        finite_or_throw(fm, "x", j);
        lin.F_x.col(j) = (fp - fm) / (xp[j] - xm[j]);
        xp[j] = xm[j] = x[j];
    }
    VectorXd up = u, um = u;
    for (Eigen::Index j = 0; j < m; ++j)
    {
        const double h = step(u[j]);
        up[j] = u[j] + h;
        um[j] = u[j] - h;
        const VectorXd fp = nominal_and_disturbance(x, up, w);
        const VectorXd fm = nominal_and_disturbance(x, um, w);
        finite_or_throw(fp, "u", j);
        finite_or_throw(fm, "u", j);
        lin.F_u.col(j) = (fp - fm) / (up[j] - um[j]);
        up[j] = um[j] = u[j];
    }
    if (gp_)
    {
        const MatrixXd g = gp_->predict_grad_mean(chi(x, u));
        lin.F_x += g.leftCols(n);
        lin.F_u += g.rightCols(m);
    }
    lin.F_w = disturbance_scale(x, u).asDiagonal() * channel_;
    return lin;
}

GpDataset collect_training_data(const VectorField &nominal, const TrajectoryIterate &rollout)
{
    const std::size_t knots = rollout.x.size();
    if (knots < 3)
        throw InputError("collect_training_data: need at least 3 knots, got " + std::to_string(knots));
    require_shape(rollout.u.size() + 1 >= knots, "collect_training_data: missing controls for interior knots");
    if (!(rollout.dt > 0.0))
        throw InputError("collect_training_data: time step must be positive");

    const auto n = rollout.x.front().size();
    const auto m = rollout.u.front().size();
    const auto samples = static_cast<Eigen::Index>(knots - 2);
    GpDataset data;
    data.inputs.resize(samples, n + m);
    data.targets.resize(samples, n);
    data.times.resize(samples);
    for (std::size_t i = 1; i + 1 < knots; ++i)
    {
        const auto r = static_cast<Eigen::Index>(i - 1);
        const VectorXd xdot = (rollout.x[i + 1] - rollout.x[i - 1]) / (2.0 * rollout.dt);
        data.inputs.row(r).head(n) = rollout.x[i].transpose();
        data.inputs.row(r).tail(m) = rollout.u[i].transpose();
        data.targets.row(r) = (xdot - nominal(rollout.x[i], rollout.u[i])).transpose();
        data.times[r] = rollout.time(i);
    }
    return data;
}

} // namespace gtddp
