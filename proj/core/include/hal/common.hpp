#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hal {

using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-domain input data (CSV content, role mapping, folds).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid option values handed to an operation.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed to reach its stated tolerance.
class NumericError : public Error {
public:
    NumericError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Basis enumeration would exceed the configured memory budget.
class BudgetError : public Error {
public:
    using Error::Error;
};

// splitmix64 finalizer; used to derive independent per-task seeds from a
// root seed so results do not depend on scheduling order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Compensated (Neumaier) summation.
class KahanSum {
public:
    void add(double x) noexcept;
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double kahan_mean(const std::vector<double>& xs);

double logit(double p);
double expit(double x);

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
// independent; callers write results by index.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

// Thread count from HALMLE_THREADS, else hardware concurrency (>= 1).
std::size_t default_thread_count();

} // namespace hal
