#pragma once

// Shared helpers and independent oracles for the test binaries.

#include <hal/basis.hpp>
#include <hal/common.hpp>
#include <hal/data.hpp>
#include <hal/lasso.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testing {

inline std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "halmle-tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline std::filesystem::path write_text(const std::string& name, const std::string& text) {
    const auto p = temp_path(name);
    std::ofstream(p) << text;
    return p;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Uniform covariates, binary treatment from a logistic propensity and a
// binary or continuous outcome.
inline hal::Dataset random_dataset(hal::Index n, int d, bool treatment, bool binary, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd w(n, d);
    Eigen::VectorXd a(n), y(n);
    for (hal::Index i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) w(i, k) = u(rng);
        a(i) = u(rng) < hal::expit(0.3 * w(i, 0) - 0.2) ? 1.0 : 0.0;
        const double m = 0.5 * a(i) + w(i, 0) - 0.5 * (d > 1 ? w(i, 1) : 0.0);
        y(i) = binary ? (u(rng) < hal::expit(m) ? 1.0 : 0.0) : m + 0.5 * z(rng);
    }
    return hal::Dataset(w, treatment ? std::optional<Eigen::VectorXd>(a) : std::nullopt, y,
                        binary ? hal::OutcomeKind::binary : hal::OutcomeKind::continuous);
}

/// Penalized objective written from the definition, independent of the solver:
/// sum_i w_i L(y_i, b0 + x_i beta) / sum_i w_i + lambda * sum_j |beta_j|.
inline double oracle_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, hal::LossFamily loss,
                               double lambda, double b0, const Eigen::VectorXd& beta,
                               const Eigen::VectorXd& weights = {}) {
    const hal::Index n = x.rows();
    const Eigen::VectorXd w =
        weights.size() == n ? Eigen::VectorXd(weights / weights.sum()) : Eigen::VectorXd::Constant(n, 1.0 / n);
    const Eigen::VectorXd eta = (x * beta).array() + b0;
    double risk = 0.0;
    for (hal::Index i = 0; i < n; ++i) {
        if (loss == hal::LossFamily::gaussian) {
            risk += w(i) * (y(i) - eta(i)) * (y(i) - eta(i));
        } else {
            const double e = eta(i);
            const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
            risk += w(i) * (softplus - y(i) * e);
        }
    }
    return risk + lambda * beta.lpNorm<1>();
}

struct OracleSolution {
    double b0 = 0.0;
    Eigen::VectorXd beta;
    double objective = 0.0;
};

/// Accelerated proximal gradient (FISTA with adaptive restart) on the dense
/// design: the projected-gradient oracle for the lasso objective. Sign
/// constraints project the soft-thresholded point onto the allowed orthant.
inline OracleSolution proximal_gradient_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                               hal::LossFamily loss, double lambda,
                                               const std::vector<hal::SignConstraint>& signs = {},
                                               int max_iter = 400000) {
    const hal::Index n = x.rows(), p = x.cols();
    Eigen::MatrixXd z(n, p + 1);
    z.col(0).setOnes();
    z.rightCols(p) = x;
    const double curvature = loss == hal::LossFamily::gaussian ? 2.0 : 0.25;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((z.transpose() * z) / static_cast<double>(n));
    const double lip = curvature * es.eigenvalues().maxCoeff();
    const double step = 1.0 / lip;

    auto grad = [&](const Eigen::VectorXd& theta) {
        const Eigen::VectorXd eta = z * theta;
        Eigen::VectorXd r(n);
        for (hal::Index i = 0; i < n; ++i)
            r(i) = loss == hal::LossFamily::gaussian ? -2.0 * (y(i) - eta(i)) : hal::expit(eta(i)) - y(i);
        return Eigen::VectorXd(z.transpose() * r / static_cast<double>(n));
    };
    auto prox = [&](Eigen::VectorXd v) {
        for (hal::Index j = 1; j <= p; ++j) {
            const double t = step * lambda;
            double s = v(j) > t ? v(j) - t : (v(j) < -t ? v(j) + t : 0.0);
            if (!signs.empty()) {
                const auto c = signs[static_cast<std::size_t>(j - 1)];
                if (c == hal::SignConstraint::nonnegative) s = std::max(s, 0.0);
                if (c == hal::SignConstraint::nonpositive) s = std::min(s, 0.0);
            }
            v(j) = s;
        }
        return v;
    };
    auto objective = [&](const Eigen::VectorXd& theta) {
        return oracle_objective(x, y, loss, lambda, theta(0), theta.tail(p));
    };

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1), mom = theta;
    double t = 1.0;
    double f = objective(theta);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd next = prox(mom - step * grad(mom));
        const double fn = objective(next);
        if (fn > f) {
            // Restart the momentum when the objective goes up.
            mom = theta;
            t = 1.0;
            continue;
        }
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        mom = next + ((t - 1.0) / tn) * (next - theta);
        const double change = (next - theta).lpNorm<Eigen::Infinity>();
        theta = next;
        t = tn;
        f = fn;
        if (change < 1e-14) break;
    }
    return {theta(0), theta.tail(p), f};
}

} // namespace testing
