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

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtddp
{
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Usage, shape and configuration problems (CLI exit code 1).
class InputError : public Error
{
public:
    using Error::Error;
};

class ShapeError : public InputError
{
public:
    using InputError::InputError;
};

/// Numeric failures: conditioning, divergence, stalls (CLI exit code 2).
class NumericError : public Error
{
public:
    using Error::Error;
};

class ConditioningError : public NumericError
{
public:
    ConditioningError(const std::string &what, std::size_t output_dim)
        : NumericError(what), output_dim_(output_dim)
    {
    }
    std::size_t output_dim() const { return output_dim_; }

private:
    std::size_t output_dim_;
};

class InitializationError : public NumericError
{
public:
    using NumericError::NumericError;
};

class KinematicSingularityError : public NumericError
{
public:
    KinematicSingularityError(const std::string &what, double angle)
        : NumericError(what), angle_(angle)
    {
    }
    double angle() const { return angle_; }

private:
    double angle_;
};

class EvaluationError : public NumericError
{
public:
    using NumericError::NumericError;
};

class DivergenceError : public NumericError
{
public:
    DivergenceError(const std::string &what, long run, long knot)
        : NumericError(what), run_(run), knot_(knot)
    {
    }
    long run() const { return run_; }
    long knot() const { return knot_; }

private:
    long run_;
    long knot_;
};

class NonSaddleError : public NumericError
{
public:
    NonSaddleError(const std::string &what, std::size_t knot, double min_eig_uu, double max_eig_ww)
        : NumericError(what), knot_(knot), min_eig_uu_(min_eig_uu), max_eig_ww_(max_eig_ww)
    {
    }
    std::size_t knot() const { return knot_; }
    double min_eig_uu() const { return min_eig_uu_; }
    double max_eig_ww() const { return max_eig_ww_; }

private:
    std::size_t knot_;
    double min_eig_uu_;
    double max_eig_ww_;
};

inline void require_shape(bool ok, const std::string &what)
{
    if (!ok)
        throw ShapeError(what);
}

inline bool all_finite(const Eigen::Ref<const MatrixXd> &a) { return a.allFinite(); }

inline MatrixXd symmetrize(const Eigen::Ref<const MatrixXd> &a) { return 0.5 * (a + a.transpose()); }

} // namespace gtddp
