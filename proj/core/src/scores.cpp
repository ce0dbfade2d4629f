#include "hal/scores.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hal {

double constraint_r(const Direction& h, const HalFit& fit) {
    return h.intercept * std::abs(fit.intercept) + penalized_constraint_r(h, fit);
}

double penalized_constraint_r(const Direction& h, const HalFit& fit) {
    double r = 0.0;
    for (const auto& [j, hj] : h.entries) r += hj * std::abs(fit.beta(j));
    return r;
}

Eigen::VectorXd empirical_scores(const SparseColumns& design, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& eta, LossFamily loss,
                                 const Eigen::VectorXd& weights) {
    const Index n = design.rows();
    if (y.size() != n || eta.size() != n) throw ConfigError("empirical_scores: length mismatch");
    Eigen::VectorXd d(n);
    for (Index i = 0; i < n; ++i) {
        const double w = weights.size() ? weights(i) : 1.0 / static_cast<double>(n);
        d(i) = w * pointwise_loss_derivative(loss, y(i), eta(i));
    }
    Eigen::VectorXd g(design.cols() + 1);
    g(0) = d.sum();
    for (Index j = 0; j < design.cols(); ++j) {
        double s = 0.0;
        for (SparseColumns::InnerIterator it(design, j); it; ++it) s += it.value() * d(it.row());
        g(j + 1) = s;
    }
    return g;
}

double path_score(const HalFit& fit, const Direction& h, const Eigen::VectorXd& scores) {
    // d/d delta of beta_j (1 + delta h_j) is h_j beta_j.
    double s = h.intercept * fit.intercept * scores(0);
    for (const auto& [j, hj] : h.entries) s += hj * fit.beta(j) * scores(j + 1);
    return s;
}

double path_score(const HalFit& fit, const Direction& h, const BasisCatalog& catalog,
                  const Eigen::VectorXd& y) {
    const Eigen::VectorXd eta = catalog.design * fit.beta + Eigen::VectorXd::Constant(y.size(), fit.intercept);
    return path_score(fit, h, empirical_scores(catalog.design, y, eta, fit.loss));
}

std::vector<Direction> constrained_battery(const HalFit& fit, int size, std::uint64_t seed) {
    std::vector<Direction> out;
    if (fit.active_set.empty() || size <= 0) return out;
    Index pivot = fit.active_set.front();
    for (Index j : fit.active_set)
        if (std::abs(fit.beta(j)) > std::abs(fit.beta(pivot))) pivot = j;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int b = 0; b < size; ++b) {
        Direction h;
        std::size_t pivot_pos = 0;
        for (Index j : fit.active_set) {
            if (j == pivot) pivot_pos = h.entries.size();
            h.entries.emplace_back(j, normal(rng));
        }
        const double r = penalized_constraint_r(h, fit);
        h.entries[pivot_pos].second -= r / std::abs(fit.beta(pivot));
        out.push_back(std::move(h));
    }
    return out;
}

std::vector<double> battery_scores_at(const HalFit& initial, const std::vector<Direction>& battery,
                                      const SparseColumns& design, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& eta) {
    const Eigen::VectorXd scores = empirical_scores(design, y, eta, initial.loss);
    std::vector<double> out;
    out.reserve(battery.size());
    for (const auto& h : battery) out.push_back(path_score(initial, h, scores));
    return out;
}

ScoreDiagnostics score_diagnostics(const HalFit& fit, const BasisCatalog& catalog,
                                   const Eigen::VectorXd& y, int battery_size, std::uint64_t seed) {
    ScoreDiagnostics d;
    d.lambda = fit.lambda;
    const Eigen::VectorXd eta =
        catalog.design * fit.beta + Eigen::VectorXd::Constant(y.size(), fit.intercept);
    const Eigen::VectorXd scores = empirical_scores(catalog.design, y, eta, fit.loss);
    d.intercept_residual = scores(0);
    for (Index j : fit.active_set) {
        d.active_score_residuals.emplace_back(j, scores(j + 1));
        d.max_abs_active_residual = std::max(d.max_abs_active_residual, std::abs(scores(j + 1)));
    }
    d.battery = constrained_battery(fit, battery_size, seed);
    d.battery_empty = d.battery.empty();
    for (const auto& h : d.battery) {
        const double s = path_score(fit, h, scores);
        d.constrained_path_residuals.push_back(s);
        d.max_abs_path_residual = std::max(d.max_abs_path_residual, std::abs(s));
        d.max_identity_error =
            std::max(d.max_identity_error, std::abs(s + fit.lambda * penalized_constraint_r(h, fit)));
    }
    return d;
}

double empirical_score_mean(const std::function<double(Index)>& fn, Index rows) {
    if (rows < 1) throw DataError("empirical_score_mean: no rows");
    KahanSum s;
    for (Index i = 0; i < rows; ++i) {
        const double v = fn(i);
        if (!std::isfinite(v))
            throw DataError("empirical_score_mean: non-finite value at row " + std::to_string(i + 1));
        s.add(v);
    }
    return s.value() / static_cast<double>(rows);
}

} // namespace hal
