#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qsync {

using Real = double;
using Complex = std::complex<double>;
using Index = std::ptrdiff_t;

using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;
using DenseMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Real kPi = std::numbers::pi;
inline constexpr Real kTwoPi = 2.0 * std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

// =============================================================================
// Errors
// =============================================================================
//
// Every failure raised by the library derives from qsync::Error. The category
// decides the CLI exit code (see tools/qsync.cpp): config -> 2,
// numerical -> 3, resource -> 4. Precondition violations are reported as
// ArgumentError and map to 2 as well.

enum class ErrorCategory { argument, config, numerical, resource };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Precondition violated by the caller (bad index, wrong mode count, ...).
class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error(ErrorCategory::argument, what) {}
};

/// Configuration file or CLI override could not be parsed or validated.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// A numerical procedure failed or produced a result outside its certificate.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

/// Fock truncation too small for the requested state.
class TruncationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Steady manifold is more than one-dimensional.
class MultiplicityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Iterative solver or integrator did not reach its tolerance.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, Real residual)
        : NumericalError(what), residual_(residual) {}
    [[nodiscard]] Real residual() const noexcept { return residual_; }

private:
    Real residual_;
};

/// Work refused up front because it would exceed a resource budget.
class ResourceError : public Error {
public:
    explicit ResourceError(const std::string& what) : Error(ErrorCategory::resource, what) {}
};

}  // namespace qsync
