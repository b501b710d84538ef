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

#include <Eigen/Cholesky>

#include <cstddef>
#include <vector>

namespace gtddp
{

/// Hyperparameters of one squared-exponential ARD kernel with additive
/// observation noise.
struct GpHyperparams
{
    double sigma_s = 1.0;  ///< signal standard deviation
    double sigma_w = 0.1;  ///< observation-noise standard deviation
    VectorXd m_diag;       ///< diagonal of the inverse squared length-scale matrix M

    /// Throws InputError unless every parameter is finite and positive.
    void validate() const;

    /// (log sigma_s, log sigma_w, log m_diag...).
    VectorXd to_log() const;
    static GpHyperparams from_log(const Eigen::Ref<const VectorXd> &theta);
};

/// Training set: N input rows (state concatenated with control) and N target
/// rows (observed residual derivatives).
struct GpDataset
{
    MatrixXd inputs;   ///< N x (n+m)
    MatrixXd targets;  ///< N x n
    VectorXd times;    ///< optional sample times, empty or length N

    std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
    std::size_t input_dim() const { return static_cast<std::size_t>(inputs.cols()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(targets.cols()); }

    void validate() const;

    /// Row-wise concatenation. Empty datasets are skipped.
    static GpDataset concatenate(const std::vector<GpDataset> &parts);
};

/// k(a, b) = sigma_s^2 exp(-1/2 sum_k m_k (a_k - b_k)^2).
double kernel(const Eigen::Ref<const VectorXd> &a, const Eigen::Ref<const VectorXd> &b,
              const GpHyperparams &h);

/// Kernel matrix K(X, X) without noise or jitter.
MatrixXd kernel_matrix(const Eigen::Ref<const MatrixXd> &inputs, const GpHyperparams &h);

struct LogLikelihood
{
    double value = 0.0;
    VectorXd gradient;  ///< w.r.t. (log sigma_s, log sigma_w, log m_diag...)
};

/// Log marginal likelihood of a single target column. Throws
/// ConditioningError (carrying `output_dim`) if the covariance cannot be
/// factorized.
LogLikelihood log_marginal_likelihood(const Eigen::Ref<const MatrixXd> &inputs,
                                      const Eigen::Ref<const VectorXd> &targets, const GpHyperparams &h,
                                      bool with_gradient = true, std::size_t output_dim = 0);

/// Vector-valued GP regression: one independent zero-mean GP per output
/// dimension, each with its own hyperparameters. Immutable once fitted.
class GpModel
{
public:
    static GpModel fit(GpDataset data, std::vector<GpHyperparams> hyper);

    std::size_t input_dim() const { return data_.input_dim(); }
    std::size_t output_dim() const { return data_.output_dim(); }
    std::size_t size() const { return data_.size(); }
    const GpDataset &dataset() const { return data_; }
    const GpHyperparams &hyperparams(std::size_t dim) const { return outputs_.at(dim).hyper; }
    std::vector<GpHyperparams> hyperparams() const;
    /// Diagonal jitter that was needed to factorize output `dim` (usually 0).
    double jitter(std::size_t dim) const { return outputs_.at(dim).jitter; }
    const VectorXd &alpha(std::size_t dim) const { return outputs_.at(dim).alpha; }

    VectorXd predict_mean(const Eigen::Ref<const VectorXd> &q) const;
    VectorXd predict_var(const Eigen::Ref<const VectorXd> &q) const;
    double predict_mean(const Eigen::Ref<const VectorXd> &q, std::size_t dim) const;
    double predict_var(const Eigen::Ref<const VectorXd> &q, std::size_t dim) const;

    /// n x (n+m) Jacobian of predict_mean with respect to the query.
    MatrixXd predict_grad_mean(const Eigen::Ref<const VectorXd> &q) const;

    /// Per output dimension, the (n+m) x (n+m) posterior covariance of the
    /// gradient of the residual.
    std::vector<MatrixXd> predict_grad_var(const Eigen::Ref<const VectorXd> &q) const;

    LogLikelihood log_marginal_likelihood(std::size_t dim) const;

private:
    struct Output
    {
        GpHyperparams hyper;
        Eigen::LLT<MatrixXd> llt;
        VectorXd alpha;
        double jitter = 0.0;
    };

    void check_query(const Eigen::Ref<const VectorXd> &q) const;
    VectorXd kernel_vector(const Eigen::Ref<const VectorXd> &q, std::size_t dim) const;

    GpDataset data_;
    std::vector<Output> outputs_;
};

/// Cholesky factor of K + sigma_w^2 I with jitter escalation. Returns the
/// jitter used through `jitter_out`.
Eigen::LLT<MatrixXd> factorize_covariance(const Eigen::Ref<const MatrixXd> &inputs, const GpHyperparams &h,
                                          std::size_t output_dim, double *jitter_out = nullptr);

struct HyperOptConfig
{
    std::size_t max_iters = 200;
    double grad_tol = 1e-5;
    double initial_step = 0.05;
    double backtrack = 0.5;
    std::size_t max_backtracks = 40;
    double armijo = 1e-4;
    /// Bound on |log parameter| to keep the search away from degenerate kernels.
    double log_bound = 30.0;
};

struct HyperOptTrace
{
    GpHyperparams hyper;
    double initial_value = 0.0;
    double final_value = 0.0;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> accepted_values;  ///< likelihood after every accepted step, starting at the initial value
};

/// Backtracking gradient ascent on the log marginal likelihood in log-parameter
/// space, independently per output dimension. `init` holds either one entry
/// (shared starting point) or one per output dimension.
std::vector<HyperOptTrace> optimize_hyperparams(const GpDataset &data, const std::vector<GpHyperparams> &init,
                                                const HyperOptConfig &config = {});

/// Runs optimize_hyperparams from every starting point and keeps, per output
/// dimension, the trace with the largest final likelihood (earliest start on
/// ties).
std::vector<HyperOptTrace> optimize_hyperparams_multistart(const GpDataset &data,
                                                           const std::vector<std::vector<GpHyperparams>> &starts,
                                                           const HyperOptConfig &config = {});

/// Data-driven starting point: sigma_s from the target spread, sigma_w a tenth
/// of it, length-scales from the input spread.
std::vector<GpHyperparams> default_hyperparams(const GpDataset &data);

/// Same length-scales as default_hyperparams with the roles swapped: the
/// target spread is attributed to noise and sigma_s is a tenth of it.
std::vector<GpHyperparams> noise_dominated_hyperparams(const GpDataset &data);

} // namespace gtddp
