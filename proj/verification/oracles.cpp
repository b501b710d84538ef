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
#include "oracles.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numbers>

namespace gtddp::oracle
{

DenseGp::DenseGp(MatrixXd inputs, VectorXd targets, GpHyperparams h)
    : X_(std::move(inputs)), y_(std::move(targets)), h_(std::move(h))
{
    const auto N = X_.rows();
    A_.resize(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            A_(i, j) = kernel(X_.row(i).transpose(), X_.row(j).transpose()) + (i == j ? h_.sigma_w * h_.sigma_w : 0.0);
    lu_.compute(A_);
    alpha_ = lu_.solve(y_);
}

double DenseGp::kernel(const VectorXd &a, const VectorXd &b) const
{
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k)
        s += h_.m_diag[k] * (a[k] - b[k]) * (a[k] - b[k]);
    return h_.sigma_s * h_.sigma_s * std::exp(-0.5 * s);
}

VectorXd DenseGp::kvec(const VectorXd &q) const
{
    VectorXd k(X_.rows());
    for (Eigen::Index i = 0; i < X_.rows(); ++i)
        k[i] = kernel(q, X_.row(i).transpose());
    return k;
}

MatrixXd DenseGp::kgrad(const VectorXd &q) const
{
    MatrixXd G(q.size(), X_.rows());
    for (Eigen::Index i = 0; i < X_.rows(); ++i)
    {
        const double k = kernel(q, X_.row(i).transpose());
        for (Eigen::Index d = 0; d < q.size(); ++d)
            G(d, i) = h_.m_diag[d] * (X_(i, d) - q[d]) * k;
    }
    return G;
}

double DenseGp::mean(const VectorXd &q) const { return kvec(q).dot(alpha_); }

double DenseGp::var(const VectorXd &q) const { return cov(q, q); }

double DenseGp::cov(const VectorXd &a, const VectorXd &b) const
{
    const VectorXd ka = kvec(a);
    const VectorXd kb = kvec(b);
    return kernel(a, b) - ka.dot(lu_.solve(kb));
}

VectorXd DenseGp::grad_mean(const VectorXd &q) const { return kgrad(q) * alpha_; }

MatrixXd DenseGp::grad_var(const VectorXd &q) const
{
    const MatrixXd G = kgrad(q);
    const MatrixXd prior = h_.sigma_s * h_.sigma_s * MatrixXd(h_.m_diag.asDiagonal());
    return prior - G * lu_.solve(MatrixXd(G.transpose()));
}

double DenseGp::log_marginal_likelihood() const
{
    double logdet = 0.0;
    const MatrixXd LU = lu_.matrixLU();
    for (Eigen::Index i = 0; i < LU.rows(); ++i)
        logdet += std::log(std::abs(LU(i, i)));
    const double N = static_cast<double>(y_.size());
    return -0.5 * y_.dot(alpha_) - 0.5 * logdet - 0.5 * N * std::log(2.0 * std::numbers::pi);
}

double dense_log_likelihood(const MatrixXd &inputs, const VectorXd &targets, const VectorXd &log_params)
{
    GpHyperparams h;
    h.sigma_s = std::exp(log_params[0]);
    h.sigma_w = std::exp(log_params[1]);
    h.m_diag = log_params.tail(log_params.size() - 2).array().exp();
    return DenseGp(inputs, targets, h).log_marginal_likelihood();
}

MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd &)> &f, const VectorXd &x, double h)
{
    const VectorXd f0 = f(x);
    MatrixXd J(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        const double step = h * std::max(1.0, std::abs(x[i]));
        VectorXd xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        J.col(i) = (f(xp) - f(xm)) / (xp[i] - xm[i]);
    }
    return J;
}

VectorXd fd_gradient(const std::function<double(const VectorXd &)> &f, const VectorXd &x, double h)
{
    VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        const double step = h * std::max(1.0, std::abs(x[i]));
        VectorXd xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i]);
    }
    return g;
}

MatrixXd fd_mixed_hessian(const std::function<double(const VectorXd &, const VectorXd &)> &c, const VectorXd &q,
                          double h)
{
    const auto n = q.size();
    MatrixXd H(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
        {
            VectorXd ap = q, am = q, bp = q, bm = q;
            ap[i] += h;
            am[i] -= h;
            bp[j] += h;
            bm[j] -= h;
            H(i, j) = (c(ap, bp) - c(ap, bm) - c(am, bp) + c(am, bm)) / (4.0 * h * h);
        }
    return H;
}

VectorXd quadcopter(const VectorXd &x, const VectorXd &u, const QuadcopterParams &p)
{
    const double vx = x[6], vy = x[7], vz = x[8];
    const double phi = x[3], th = x[4], psi = x[5];
    const double wp = x[9], wq = x[10], wr = x[11];
    const double o1 = x[12], o2 = x[13], o3 = x[14], o4 = x[15];
    const double sf = std::sin(phi), cf = std::cos(phi);
    const double st = std::sin(th), ct = std::cos(th);
    const double sp = std::sin(psi), cp = std::cos(psi);
    const double Ixx = p.inertia[0], Iyy = p.inertia[1], Izz = p.inertia[2];
    const double L = p.arm_length, kF = p.k_F, kM = p.k_M, km = p.k_m;
    const double wh = std::sqrt(p.mass * p.gravity / (4.0 * kF));

    const double F1 = kF * o1 * o1, F2 = kF * o2 * o2, F3 = kF * o3 * o3, F4 = kF * o4 * o4;
    const double M1 = kM * o1 * o1, M2 = kM * o2 * o2, M3 = kM * o3 * o3, M4 = kM * o4 * o4;
    const double T = (F1 + F2 + F3 + F4) / p.mass;

    VectorXd dx(16);
    dx[0] = vx;
    dx[1] = vy;
    dx[2] = vz;
    // inverse of [[ct, 0, -cf st], [0, 1, sf], [st, 0, cf ct]]
    dx[3] = ct * wp + st * wr;
    dx[4] = st * sf / cf * wp + wq - ct * sf / cf * wr;
    dx[5] = -st / cf * wp + ct / cf * wr;
    // third column of the body-to-world rotation times the specific thrust
    dx[6] = (cp * st + ct * sf * sp) * T;
    dx[7] = (sp * st - cp * ct * sf) * T;
    dx[8] = cf * ct * T - p.gravity;
    dx[9] = (L * (F2 - F4) - (wq * Izz * wr - wr * Iyy * wq)) / Ixx;
    dx[10] = (L * (F3 - F1) - (wr * Ixx * wp - wp * Izz * wr)) / Iyy;
    dx[11] = ((M1 - M2 + M3 - M4) - (wp * Iyy * wq - wq * Ixx * wp)) / Izz;
    dx[12] = km * (wh - o1) + km * (u[0] - u[2] + u[3]);
    dx[13] = km * (wh - o2) + km * (u[0] + u[1] - u[3]);
    dx[14] = km * (wh - o3) + km * (u[0] + u[2] + u[3]);
    dx[15] = km * (wh - o4) + km * (u[0] - u[1] - u[3]);
    return dx;
}

RiccatiSolution solve_game_riccati(const LqGame &g, std::size_t intervals, std::size_t substeps)
{
    const MatrixXd Rinv = g.R.inverse();
    const MatrixXd BRB = g.B * Rinv * g.B.transpose();
    const MatrixXd DD = g.D * g.D.transpose() / (g.gamma * g.gamma);
    // dP/ds in reversed time s = T - t
    auto rhs = [&](const MatrixXd &P) -> MatrixXd {
        return g.Q + g.A.transpose() * P + P * g.A - P * BRB * P + P * DD * P;
    };

    RiccatiSolution out;
    out.dt = g.horizon / static_cast<double>(intervals);
    const double h = out.dt / static_cast<double>(substeps);
    out.P.assign(intervals + 1, MatrixXd());
    MatrixXd P = g.Q_f;
    out.P[intervals] = P;
    for (std::size_t k = intervals; k-- > 0;)
    {
        for (std::size_t s = 0; s < substeps; ++s)
        {
            const MatrixXd k1 = rhs(P);
            const MatrixXd k2 = rhs(P + 0.5 * h * k1);
            const MatrixXd k3 = rhs(P + 0.5 * h * k2);
            const MatrixXd k4 = rhs(P + h * k3);
            P += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            P = 0.5 * (P + P.transpose()).eval();
        }
        out.P[k] = P;
    }
    for (const auto &Pk : out.P)
    {
        out.K_u.push_back(-Rinv * g.B.transpose() * Pk);
        out.K_w.push_back(g.D.transpose() * Pk / (g.gamma * g.gamma));
    }
    return out;
}

} // namespace gtddp::oracle
