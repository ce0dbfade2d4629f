#pragma once

#include "hal/basis.hpp"
#include "hal/lasso.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace hal {

/// Direction h of the path beta_delta(j) = (1 + delta * h_j) * beta_j.
struct Direction {
    double intercept = 0.0;
    std::vector<std::pair<Index, double>> entries; // (column, h_j)
};

// h(0)|beta(0)| + sum_j h_j |beta_j|.
double constraint_r(const Direction& h, const HalFit& fit);
// Same sum restricted to the penalized coordinates (intercept excluded).
double penalized_constraint_r(const Direction& h, const HalFit& fit);

// P_n dL/dbeta_j at a linear predictor eta: entry 0 is the intercept score
// P_n dL/deta, entry j is P_n phi_j dL/deta. Empty weights mean 1/n.
Eigen::VectorXd empirical_scores(const SparseColumns& design, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& eta, LossFamily loss,
                                 const Eigen::VectorXd& weights = {});

// d/d delta P_n L(Q_{beta_delta^h}) at delta = 0, given the score vector at
// the point where the derivative is taken.
double path_score(const HalFit& fit, const Direction& h, const Eigen::VectorXd& scores);
double path_score(const HalFit& fit, const Direction& h, const BasisCatalog& catalog,
                  const Eigen::VectorXd& y);

// Random standard-normal directions on the active set, each shifted on the
// largest-|beta| pivot so that r(h, beta) = 0. Intercept component is zero.
std::vector<Direction> constrained_battery(const HalFit& fit, int size, std::uint64_t seed);

struct ScoreDiagnostics {
    double lambda = 0.0;
    double intercept_residual = 0.0;
    std::vector<std::pair<Index, double>> active_score_residuals;
    double max_abs_active_residual = 0.0;
    std::vector<Direction> battery;
    std::vector<double> constrained_path_residuals;
    double max_abs_path_residual = 0.0;
    // max over the battery of |path_score + lambda * r_penalized|.
    double max_identity_error = 0.0;
    bool battery_empty = false;
    std::optional<double> eif_residual;
};

ScoreDiagnostics score_diagnostics(const HalFit& fit, const BasisCatalog& catalog,
                                   const Eigen::VectorXd& y, int battery_size = 50,
                                   std::uint64_t seed = 1);

// Path scores of an existing battery evaluated at another linear predictor
// (e.g. after a targeting update), with the initial fit's coefficients.
std::vector<double> battery_scores_at(const HalFit& initial, const std::vector<Direction>& battery,
                                      const SparseColumns& design, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& eta);

// (1/n) sum_i fn(i); throws DataError naming the first non-finite row.
double empirical_score_mean(const std::function<double(Index)>& fn, Index rows);

} // namespace hal
