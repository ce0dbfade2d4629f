#pragma once

#include "hal/basis.hpp"
#include "hal/data.hpp"
#include "hal/lasso.hpp"
#include "hal/scores.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hal {

/// Predictions of Qbar(A, W) = E(Y | A, W) at the observed A and with A set
/// to 1 and 0. Carries the HAL fit when there is one.
struct OutcomeModel {
    OutcomeKind kind = OutcomeKind::binary;
    Eigen::VectorXd q_obs;
    Eigen::VectorXd q1;
    Eigen::VectorXd q0;
    std::shared_ptr<const BasisCatalog> catalog;
    std::optional<HalFit> fit;
    // Basis evaluated at (1, W) and (0, W); filled with the fit.
    std::shared_ptr<const SparseColumns> design1;
    std::shared_ptr<const SparseColumns> design0;

    const Eigen::VectorXd& arm(int a) const { return a == 1 ? q1 : q0; }
};

// Outcome model from a HAL fit on the catalog built from data.regression_design().
OutcomeModel make_outcome_model(const Dataset& data, std::shared_ptr<const BasisCatalog> catalog,
                                const HalFit& fit);
// Qbar fixed at c everywhere.
OutcomeModel constant_outcome_model(const Dataset& data, double c);
// Predictions supplied directly (e.g. the true Qbar_0 in simulations).
OutcomeModel outcome_from_predictions(const Dataset& data, Eigen::VectorXd q_obs, Eigen::VectorXd q1,
                                      Eigen::VectorXd q0);

/// Gbar(W) = P(A = 1 | W), truncated to [lo, hi].
struct PropensityModel {
    Eigen::VectorXd raw;
    Eigen::VectorXd g; // truncated
    double lo = 0.01;
    double hi = 0.99;
    int truncation_hits = 0;
    std::string label;
    std::optional<HalFit> fit;

    // P(A = a | W_i) after truncation.
    double arm(int a, Index i) const { return a == 1 ? g(i) : 1.0 - g(i); }
};

PropensityModel make_propensity(Eigen::VectorXd raw, double lo = 0.01, double hi = 0.99,
                                std::string label = {});

enum class Estimand { tsm1, tsm0, ate };
std::string to_string(Estimand e);
Estimand parse_estimand(const std::string& text);

struct TargetReport {
    Estimand estimand = Estimand::tsm1;
    std::string method;
    double psi = 0.0;
    Eigen::VectorXd ic;
    double se = 0.0;
    std::array<double, 2> ci{0.0, 0.0};
    // P_n D* (signed); equals mean(ic).
    double pn_dstar = 0.0;
    double tol = 0.0;
    bool tol_met = true;
    int steps = 0;
    int halvings = 0;
    double loglik_gain = 0.0;
    int truncation_hits = 0;
    // Orthogonalized update diagnostics.
    std::optional<double> battery_max;
    bool projection_ridged = false;
    // IPW weight summary: min, max, mean of 1{A=a}/G.
    std::optional<std::array<double, 3>> weight_summary;
};

// Fills se, ci and pn_dstar from psi and ic.
void finalize_report(TargetReport& r);

// 1{A=1}/Gbar (Y - Qbar(1,W)) + Qbar(1,W) - psi.
double canonical_gradient_tsm(double a, double y, double qbar1, double gbar, double psi);
// Same for the arm A = arm, with g_arm = P(A = arm | W).
double canonical_gradient_arm(int arm, double a, double y, double qbar_arm, double g_arm, double psi);

// Plug-in mean of Qbar(arm, W) with its influence curve at G.
TargetReport plugin_tsm(const OutcomeModel& q, const PropensityModel& g, const Dataset& data, int arm = 1);
TargetReport ipw_tsm(const PropensityModel& g, const Dataset& data, int arm = 1);

// P_0 (Qbar - Qbar_0)(Gbar - Gbar_0)/Gbar by tensor Gauss-Legendre
// quadrature over the unit cube.
struct RemainderResult {
    double value = 0.0;
    // |value - value at half the points per axis|.
    double quadrature_error = 0.0;
};
using CubeFunction = std::function<double(std::span<const double>)>;
RemainderResult exact_remainder_tsm(const CubeFunction& qbar, const CubeFunction& gbar,
                                    const CubeFunction& qbar0, const CubeFunction& gbar0,
                                    int dimension, int points_per_axis = 64);

struct TmleOptions {
    double step = 0.001;
    int max_steps = 20000;
    int max_halvings = 40;
    // Stopping tolerance on |P_n D*|; NaN means sigma_n / (sqrt(n) log n).
    double tol = std::numeric_limits<double>::quiet_NaN();
    double tol_constant = 1.0;
    // Bounds applied to rescaled continuous predictions.
    double clip = 1e-4;
    // Battery for the preservation diagnostic.
    int battery_size = 50;
    std::uint64_t battery_seed = 1;
    int secant_iterations = 3;
};

struct TmleResult {
    OutcomeModel q;
    TargetReport report;
    // Total fluctuation epsilon per target (plain update only).
    std::vector<double> epsilon;
};

// Iterated logistic fluctuation along the clever covariate 1{A=arm}/G.
TmleResult tmle_update_tsm(const OutcomeModel& q, const PropensityModel& g, const Dataset& data,
                           const TmleOptions& options = {}, int arm = 1);
// Same with the clever covariate orthogonalized against the span of the
// initial fit's active-coordinate scores, so its constrained path scores are
// preserved.
TmleResult orthogonalized_tmle_update(const OutcomeModel& q, const PropensityModel& g,
                                      const Dataset& data, const TmleOptions& options = {},
                                      int arm = 1);

enum class Method { plugin, ipw, tmle, tmle_preserving };
std::string to_string(Method m);
Method parse_method(const std::string& text);

// psi(1) - psi(0) with the differenced influence curve.
TmleResult ate(const OutcomeModel& q, const PropensityModel& g, const Dataset& data, Method method,
               const TmleOptions& options = {});
// Single-arm or ATE estimate by method.
TmleResult estimate(Estimand estimand, const OutcomeModel& q, const PropensityModel& g,
                    const Dataset& data, Method method, const TmleOptions& options = {});

// Max |path score| over the battery at the model's current predictions,
// with the battery drawn from the model's fit.
double battery_max_at(const OutcomeModel& initial, const Eigen::VectorXd& q_obs, const Dataset& data,
                      int battery_size, std::uint64_t seed);

// Weighted least-squares residual h - B c of h on the columns of B.
// Returns false in `ridged` when the Gram matrix needed stabilization.
Eigen::VectorXd weighted_residual(const Eigen::MatrixXd& basis, const Eigen::VectorXd& weights,
                                  const Eigen::VectorXd& h, Eigen::VectorXd* coef = nullptr,
                                  bool* ridged = nullptr);

} // namespace hal
