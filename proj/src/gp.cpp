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
#include "gtddp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gtddp
{

namespace
{
constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-6;

// Row-wise squared distances weighted by m: out_i = sum_k m_k (X_ik - q_k)^2.
VectorXd weighted_sq_dist(const Eigen::Ref<const MatrixXd> &X, const Eigen::Ref<const VectorXd> &q,
                          const VectorXd &m)
{
    return (X.rowwise() - q.transpose()).array().square().matrix() * m;
}

// exp(-d2 / 2), flushed to exactly zero once it is below 1e-260. Products of
// such tiny weights would otherwise run through denormal arithmetic, which is
// two orders of magnitude slower, for no change in any prediction.
constexpr double kMaxHalfDist = 600.0;
inline double se_weight(double d2) { return 0.5 * d2 > kMaxHalfDist ? 0.0 : std::exp(-0.5 * d2); }
} // namespace

void GpHyperparams::validate() const
{
    if (!(std::isfinite(sigma_s) && sigma_s > 0.0))
        throw InputError("GP hyperparameter sigma_s must be positive, got " + std::to_string(sigma_s));
    if (!(std::isfinite(sigma_w) && sigma_w > 0.0))
        throw InputError("GP hyperparameter sigma_w must be positive, got " + std::to_string(sigma_w));
    if (m_diag.size() == 0)
        throw InputError("GP hyperparameter m_diag is empty");
    for (Eigen::Index k = 0; k < m_diag.size(); ++k)
        if (!(std::isfinite(m_diag[k]) && m_diag[k] > 0.0))
            throw InputError("GP hyperparameter m_diag[" + std::to_string(k) + "] must be positive");
}

VectorXd GpHyperparams::to_log() const
{
    VectorXd theta(m_diag.size() + 2);
    theta[0] = std::log(sigma_s);
    theta[1] = std::log(sigma_w);
    theta.tail(m_diag.size()) = m_diag.array().log();
    return theta;
}

GpHyperparams GpHyperparams::from_log(const Eigen::Ref<const VectorXd> &theta)
{
    GpHyperparams h;
    h.sigma_s = std::exp(theta[0]);
    h.sigma_w = std::exp(theta[1]);
    h.m_diag = theta.tail(theta.size() - 2).array().exp();
    return h;
}

void GpDataset::validate() const
{
    if (inputs.rows() < 1)
        throw InputError("GP dataset is empty");
    if (targets.rows() != inputs.rows())
        throw ShapeError("GP dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                         std::to_string(targets.rows()) + " target rows");
    if (targets.cols() < 1 || inputs.cols() < 1)
        throw ShapeError("GP dataset needs at least one input and one output column");
    if (times.size() != 0 && times.size() != inputs.rows())
        throw ShapeError("GP dataset time column length does not match the sample count");
    if (!inputs.allFinite() || !targets.allFinite())
        throw InputError("GP dataset contains non-finite entries");
}

GpDataset GpDataset::concatenate(const std::vector<GpDataset> &parts)
{
    Eigen::Index rows = 0, in_cols = -1, out_cols = -1;
    bool with_times = true;
    for (const auto &p : parts)
    {
        if (p.inputs.rows() == 0)
            continue;
        if (in_cols < 0)
        {
            in_cols = p.inputs.cols();
            out_cols = p.targets.cols();
        }
        require_shape(p.inputs.cols() == in_cols && p.targets.cols() == out_cols,
                      "cannot concatenate GP datasets of different dimensions");
        rows += p.inputs.rows();
        with_times = with_times && p.times.size() == p.inputs.rows();
    }
    GpDataset out;
    if (in_cols < 0)
        return out;
    out.inputs.resize(rows, in_cols);
    out.targets.resize(rows, out_cols);
    if (with_times)
        out.times.resize(rows);
    Eigen::Index r = 0;
    for (const auto &p : parts)
    {
        const Eigen::Index n = p.inputs.rows();
        if (n == 0)
            continue;
        out.inputs.middleRows(r, n) = p.inputs;
        out.targets.middleRows(r, n) = p.targets;
        if (with_times)
            out.times.segment(r, n) = p.times;
        r += n;
    }
    return out;
}

double kernel(const Eigen::Ref<const VectorXd> &a, const Eigen::Ref<const VectorXd> &b, const GpHyperparams &h)
{
    if (a.size() != b.size() || a.size() != h.m_diag.size())
        throw ShapeError("kernel: inputs of dimension " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " do not match m_diag of dimension " +
                         std::to_string(h.m_diag.size()));
    const double r2 = ((a - b).array().square() * h.m_diag.array()).sum();
    return h.sigma_s * h.sigma_s * std::exp(-0.5 * r2);
}

MatrixXd kernel_matrix(const Eigen::Ref<const MatrixXd> &inputs, const GpHyperparams &h)
{
    require_shape(inputs.cols() == h.m_diag.size(), "kernel_matrix: input dimension does not match m_diag");
    const Eigen::Index n = inputs.rows();
    const double s2 = h.sigma_s * h.sigma_s;
    MatrixXd K(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
    {
        K(j, j) = s2;
        const VectorXd xj = inputs.row(j).transpose();
        const VectorXd d = weighted_sq_dist(inputs.topRows(j), xj, h.m_diag);
        for (Eigen::Index i = 0; i < j; ++i)
        {
            K(i, j) = s2 * se_weight(d[i]);
            K(j, i) = K(i, j);
        }
    }
    return K;
}

Eigen::LLT<MatrixXd> factorize_covariance(const Eigen::Ref<const MatrixXd> &inputs, const GpHyperparams &h,
                                          std::size_t output_dim, double *jitter_out)
{
    MatrixXd A = kernel_matrix(inputs, h);
    A.diagonal().array() += h.sigma_w * h.sigma_w;
    const double s2 = h.sigma_s * h.sigma_s;

    // sigma_w^2 > 0 makes A positive definite in exact arithmetic, so jitter is
    // only introduced once a plain factorization has failed.
    Eigen::LLT<MatrixXd> llt(A);
    double jitter = 0.0;
    for (double frac = kJitterStart; llt.info() != Eigen::Success; frac *= 10.0)
    {
        if (frac > kJitterMax * 1.0000001)
            throw ConditioningError("covariance of output dimension " + std::to_string(output_dim) +
                                        " is not positive definite even with jitter " +
                                        std::to_string(kJitterMax) + " sigma_s^2",
                                    output_dim);
        jitter = frac * s2;
        MatrixXd Aj = A;
        Aj.diagonal().array() += jitter;
        llt.compute(Aj);
    }
    if (jitter_out)
        *jitter_out = jitter;
    return llt;
}

LogLikelihood log_marginal_likelihood(const Eigen::Ref<const MatrixXd> &inputs, const Eigen::Ref<const VectorXd> &y,
                                      const GpHyperparams &h, bool with_gradient, std::size_t output_dim)
{
    require_shape(inputs.rows() == y.size(), "log_marginal_likelihood: target length mismatch");
    require_shape(inputs.cols() == h.m_diag.size(), "log_marginal_likelihood: input dimension mismatch");
    const Eigen::Index n = inputs.rows();
    double jitter = 0.0;
    const auto llt = factorize_covariance(inputs, h, output_dim, &jitter);
    const VectorXd alpha = llt.solve(y);
    const MatrixXd &L = llt.matrixLLT();
    const double log_det = 2.0 * L.diagonal().array().log().sum();

    LogLikelihood out;
    out.value = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!with_gradient)
        return out;

    // dL/dtheta = 1/2 tr((alpha alpha^T - A^-1) dA/dtheta)
    const MatrixXd Ainv = llt.solve(MatrixXd::Identity(n, n));
    const MatrixXd B = alpha * alpha.transpose() - Ainv;
    const MatrixXd K = kernel_matrix(inputs, h);
    const MatrixXd BK = B.cwiseProduct(K);

    const Eigen::Index d = inputs.cols();
    out.gradient.resize(d + 2);
    // jitter is proportional to sigma_s^2 so it scales with the kernel.
    out.gradient[0] = BK.sum() + jitter * B.trace();
    out.gradient[1] = h.sigma_w * h.sigma_w * B.trace();
    for (Eigen::Index k = 0; k < d; ++k)
    {
        const VectorXd col = inputs.col(k);
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            acc += (BK.col(j).array() * (col.array() - col[j]).square()).sum();
        out.gradient[2 + k] = -0.25 * h.m_diag[k] * acc;
    }
    return out;
}

GpModel GpModel::fit(GpDataset data, std::vector<GpHyperparams> hyper)
{
    data.validate();
    const std::size_t n_out = data.output_dim();
    if (hyper.size() == 1 && n_out > 1)
        hyper.assign(n_out, hyper.front());
    require_shape(hyper.size() == n_out, "GpModel::fit: need one hyperparameter set per output dimension");

    GpModel model;
    model.outputs_.reserve(n_out);
    for (std::size_t d = 0; d < n_out; ++d)
    {
        hyper[d].validate();
        require_shape(static_cast<std::size_t>(hyper[d].m_diag.size()) == data.input_dim(),
                      "GpModel::fit: m_diag length does not match the input dimension");
        Output out;
        out.hyper = hyper[d];
        out.llt = factorize_covariance(data.inputs, hyper[d], d, &out.jitter);
        out.alpha = out.llt.solve(data.targets.col(static_cast<Eigen::Index>(d)));
        model.outputs_.push_back(std::move(out));
    }
    model.data_ = std::move(data);
    return model;
}

std::vector<GpHyperparams> GpModel::hyperparams() const
{
    std::vector<GpHyperparams> out;
    for (const auto &o : outputs_)
        out.push_back(o.hyper);
    return out;
}

void GpModel::check_query(const Eigen::Ref<const VectorXd> &q) const
{
    if (static_cast<std::size_t>(q.size()) != input_dim())
        throw ShapeError("GP query of dimension " + std::to_string(q.size()) + ", model expects " +
                         std::to_string(input_dim()));
}

VectorXd GpModel::kernel_vector(const Eigen::Ref<const VectorXd> &q, std::size_t dim) const
{
    const auto &h = outputs_[dim].hyper;
    const VectorXd d2 = weighted_sq_dist(data_.inputs, q, h.m_diag);
    return (h.sigma_s * h.sigma_s) * d2.unaryExpr([](double v) { return se_weight(v); });
}

double GpModel::predict_mean(const Eigen::Ref<const VectorXd> &q, std::size_t dim) const
{
    check_query(q);
    return kernel_vector(q, dim).dot(outputs_.at(dim).alpha);
}

double GpModel::predict_var(const Eigen::Ref<const VectorXd> &q, std::size_t dim) const
{
    check_query(q);
    const auto &o = outputs_.at(dim);
    const double s2 = o.hyper.sigma_s * o.hyper.sigma_s;
    const VectorXd v = o.llt.matrixL().solve(kernel_vector(q, dim));
    const double var = s2 - v.squaredNorm();
    // Rounding can push the posterior slightly below zero.
    return var < 0.0 ? 0.0 : var;
}

VectorXd GpModel::predict_mean(const Eigen::Ref<const VectorXd> &q) const
{
    VectorXd out(output_dim());
    for (std::size_t d = 0; d < output_dim(); ++d)
        out[static_cast<Eigen::Index>(d)] = predict_mean(q, d);
    return out;
}

VectorXd GpModel::predict_var(const Eigen::Ref<const VectorXd> &q) const
{
    VectorXd out(output_dim());
    for (std::size_t d = 0; d < output_dim(); ++d)
        out[static_cast<Eigen::Index>(d)] = predict_var(q, d);
    return out;
}

MatrixXd GpModel::predict_grad_mean(const Eigen::Ref<const VectorXd> &q) const
{
    check_query(q);
    const Eigen::Index n_in = static_cast<Eigen::Index>(input_dim());
    MatrixXd grad(static_cast<Eigen::Index>(output_dim()), n_in);
    const MatrixXd diff = data_.inputs.rowwise() - q.transpose();  // chi_i - q
    for (std::size_t d = 0; d < output_dim(); ++d)
    {
        const auto &o = outputs_[d];
        const VectorXd w = kernel_vector(q, d).cwiseProduct(o.alpha);
        // sum_i alpha_i k_i M (chi_i - q)
        grad.row(static_cast<Eigen::Index>(d)) = (diff.transpose() * w).cwiseProduct(o.hyper.m_diag).transpose();
    }
    return grad;
}

std::vector<MatrixXd> GpModel::predict_grad_var(const Eigen::Ref<const VectorXd> &q) const
{
    check_query(q);
    const MatrixXd diff = data_.inputs.rowwise() - q.transpose();
    std::vector<MatrixXd> out;
    out.reserve(output_dim());
    for (std::size_t d = 0; d < output_dim(); ++d)
    {
        const auto &o = outputs_[d];
        const double s2 = o.hyper.sigma_s * o.hyper.sigma_s;
        const VectorXd k = kernel_vector(q, d);
        // Column i of G is M k_i (chi_i - q).
        const MatrixXd G = o.hyper.m_diag.asDiagonal() * (diff.transpose() * k.asDiagonal());
        const MatrixXd V = o.llt.matrixL().solve(G.transpose());
        MatrixXd cov = s2 * MatrixXd(o.hyper.m_diag.asDiagonal()) - V.transpose() * V;
        out.push_back(symmetrize(cov));
    }
    return out;
}

LogLikelihood GpModel::log_marginal_likelihood(std::size_t dim) const
{
    if (dim >= output_dim())
        throw ShapeError("log_marginal_likelihood: output dimension " + std::to_string(dim) + " out of range");
    return gtddp::log_marginal_likelihood(data_.inputs, data_.targets.col(static_cast<Eigen::Index>(dim)),
                                          outputs_[dim].hyper, true, dim);
}

namespace
{
HyperOptTrace ascend_one(const MatrixXd &X, const VectorXd &y, const GpHyperparams &init, const HyperOptConfig &cfg,
                         std::size_t dim)
{
    HyperOptTrace trace;
    VectorXd theta = init.to_log();
    LogLikelihood cur;
    try
    {
        cur = log_marginal_likelihood(X, y, init, true, dim);
    }
    catch (const ConditioningError &e)
    {
        throw InitializationError("initial GP hyperparameters of output " + std::to_string(dim) +
                                  " are unusable: " + e.what());
    }
    if (!std::isfinite(cur.value) || !cur.gradient.allFinite())
        throw InitializationError("non-finite log marginal likelihood at the initial hyperparameters of output " +
                                  std::to_string(dim));

    trace.initial_value = cur.value;
    trace.accepted_values.push_back(cur.value);

    // Barzilai-Borwein step lengths with Armijo backtracking; every accepted
    // step strictly increases the likelihood.
    double step = cfg.initial_step / std::max(1.0, cur.gradient.lpNorm<Eigen::Infinity>());
    VectorXd prev_theta, prev_grad;
    std::size_t it = 0;
    for (; it < cfg.max_iters; ++it)
    {
        if (cur.gradient.lpNorm<Eigen::Infinity>() < cfg.grad_tol)
        {
            trace.converged = true;
            break;
        }
        if (prev_theta.size() > 0)
        {
            const VectorXd s = theta - prev_theta;
            const VectorXd g = cur.gradient - prev_grad;
            const double sg = s.dot(g);
            // Ascent: curvature is negative along s when sg < 0.
            if (sg < 0.0)
                step = std::clamp(-s.squaredNorm() / sg, 1e-8, 1e3);
        }
        bool accepted = false;
        double t = step;
        const double g2 = cur.gradient.squaredNorm();
        for (std::size_t b = 0; b < cfg.max_backtracks; ++b, t *= cfg.backtrack)
        {
            VectorXd trial = (theta + t * cur.gradient).cwiseMax(-cfg.log_bound).cwiseMin(cfg.log_bound);
            LogLikelihood next;
            try
            {
                next = log_marginal_likelihood(X, y, GpHyperparams::from_log(trial), true, dim);
            }
            catch (const ConditioningError &)
            {
                continue;
            }
            if (!std::isfinite(next.value) || !next.gradient.allFinite())
                continue;
            if (next.value > cur.value + cfg.armijo * t * g2 ||
                (next.value > cur.value && t * cur.gradient.norm() < 1e-10))
            {
                prev_theta = theta;
                prev_grad = cur.gradient;
                theta = trial;
                cur = next;
                step = t;
                accepted = true;
                trace.accepted_values.push_back(cur.value);
                break;
            }
        }
        if (!accepted)
            break;
    }
    trace.iterations = it;
    trace.hyper = GpHyperparams::from_log(theta);
    trace.final_value = cur.value;
    trace.grad_norm = cur.gradient.lpNorm<Eigen::Infinity>();
    trace.converged = trace.converged || trace.grad_norm < cfg.grad_tol;
    return trace;
}
} // namespace

std::vector<HyperOptTrace> optimize_hyperparams(const GpDataset &data, const std::vector<GpHyperparams> &init,
                                                const HyperOptConfig &config)
{
    data.validate();
    const std::size_t n_out = data.output_dim();
    require_shape(init.size() == 1 || init.size() == n_out,
                  "optimize_hyperparams: need one shared or one per-output initial hyperparameter set");
    std::vector<HyperOptTrace> out;
    out.reserve(n_out);
    for (std::size_t d = 0; d < n_out; ++d)
    {
        const auto &h0 = init.size() == 1 ? init.front() : init[d];
        h0.validate();
        require_shape(static_cast<std::size_t>(h0.m_diag.size()) == data.input_dim(),
                      "optimize_hyperparams: m_diag length does not match the input dimension");
        out.push_back(ascend_one(data.inputs, data.targets.col(static_cast<Eigen::Index>(d)), h0, config, d));
    }
    return out;
}

std::vector<HyperOptTrace> optimize_hyperparams_multistart(const GpDataset &data,
                                                           const std::vector<std::vector<GpHyperparams>> &starts,
                                                           const HyperOptConfig &config)
{
    if (starts.empty())
        throw InputError("optimize_hyperparams_multistart: need at least one starting point");
    std::vector<HyperOptTrace> best = optimize_hyperparams(data, starts.front(), config);
    for (std::size_t s = 1; s < starts.size(); ++s)
    {
        auto traces = optimize_hyperparams(data, starts[s], config);
        for (std::size_t d = 0; d < best.size(); ++d)
            if (traces[d].final_value > best[d].final_value)
                best[d] = std::move(traces[d]);
    }
    return best;
}

std::vector<GpHyperparams> noise_dominated_hyperparams(const GpDataset &data)
{
    auto out = default_hyperparams(data);
    for (auto &h : out)
    {
        const double sd = h.sigma_s;
        h.sigma_w = sd;
        h.sigma_s = 0.1 * sd;
    }
    return out;
}

std::vector<GpHyperparams> default_hyperparams(const GpDataset &data)
{
    data.validate();
    const Eigen::Index n = data.inputs.rows();
    const VectorXd in_mean = data.inputs.colwise().mean();
    VectorXd in_var = (data.inputs.rowwise() - in_mean.transpose()).array().square().colwise().sum() /
                      static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
    VectorXd m(in_var.size());
    for (Eigen::Index k = 0; k < in_var.size(); ++k)
        m[k] = in_var[k] > 1e-12 ? 1.0 / in_var[k] : 1.0;

    std::vector<GpHyperparams> out;
    for (Eigen::Index d = 0; d < data.targets.cols(); ++d)
    {
        const VectorXd y = data.targets.col(d);
        const double mean = y.mean();
        double sd = std::sqrt((y.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)));
        if (!(sd > 1e-8))
            sd = 1e-3;
        GpHyperparams h;
        h.sigma_s = sd;
        h.sigma_w = 0.1 * sd;
        h.m_diag = m;
        out.push_back(h);
    }
    return out;
}

} // namespace gtddp
