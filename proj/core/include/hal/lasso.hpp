#pragma once

#include "hal/basis.hpp"
#include "hal/common.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hal {

enum class LossFamily { gaussian, binomial };

std::string to_string(LossFamily loss);
LossFamily parse_loss(const std::string& text);

// Per-observation loss: (y - eta)^2 or -[y log mu + (1 - y) log(1 - mu)]
// with mu = expit(eta).
double pointwise_loss(LossFamily loss, double y, double eta);
// d loss / d eta.
double pointwise_loss_derivative(LossFamily loss, double y, double eta);
// Response-scale prediction (identity or inverse logit).
double inverse_link(LossFamily loss, double eta);

struct SolverOptions {
    // Largest coefficient change (scaled by the column norm) ending a sweep loop.
    double tolerance = 1e-7;
    int max_sweeps = 10000;
    // Exit gate: the largest KKT violation of a returned fit.
    double kkt_tolerance = 1e-7;
    // IRLS weights are floored here.
    double weight_floor = 1e-8;
    // Recompute the penalized objective after every sweep and fail if it rises.
    bool check_monotone = false;
};

struct FitOptions {
    SolverOptions solver;
    // Observation weights (nonnegative, normalized internally to sum 1). Empty
    // means equal weights. Zero weights implement held-out rows.
    Eigen::VectorXd weights;
    // Overrides the catalog's per-column sign constraints when nonempty.
    std::vector<SignConstraint> signs;
    // Columns allowed to enter; empty means all.
    std::vector<Index> columns;
};

/// Solution of min P_n L(Q_beta) + lambda * sum_j |beta_j| (intercept free).
struct HalFit {
    Eigen::VectorXd beta;
    double intercept = 0.0;
    double lambda = 0.0;
    // |intercept| + sum |beta_j|: the sectional variation norm of the fit.
    double l1_norm = 0.0;
    // sum |beta_j|: the penalized part of the norm.
    double slope_l1_norm = 0.0;
    LossFamily loss = LossFamily::gaussian;
    std::vector<Index> active_set;
    double train_risk = 0.0;
    std::uint64_t catalog_ref = 0;

    double kkt_residual = 0.0;
    int sweeps = 0;
    bool converged = false;
    // Set by constrained fits whose bound does not bind.
    bool bound_slack = false;

    // (intercept, beta...) as used by predict().
    Eigen::VectorXd coefficients() const;
};

struct LassoPath {
    std::vector<double> lambda_grid;
    std::vector<HalFit> fits;
};

/// Pathwise coordinate descent over a fixed design. Reusable across lambdas;
/// the previous solution's gradient drives strong-rule screening.
class LassoSolver {
public:
    LassoSolver(const SparseColumns& design, const Eigen::VectorXd& y, LossFamily loss,
                FitOptions options = {}, std::uint64_t catalog_ref = 0);

    // Smallest lambda with the intercept-only model optimal.
    double lambda_max() const noexcept { return lambda_max_; }
    HalFit null_fit() const;
    HalFit solve(double lambda, const HalFit* warm_start = nullptr);

    // P_n dL/dbeta at (intercept, beta); entry 0 is the intercept.
    Eigen::VectorXd gradient(double intercept, const Eigen::VectorXd& beta) const;
    double risk(double intercept, const Eigen::VectorXd& beta) const;
    double objective(double lambda, double intercept, const Eigen::VectorXd& beta) const;
    double kkt_residual(double lambda, double intercept, const Eigen::VectorXd& beta) const;

    const Eigen::VectorXd& weights() const noexcept { return w_; }
    Index columns() const noexcept { return x_.cols(); }

private:
    struct State;

    Eigen::VectorXd linear_predictor(double intercept, const Eigen::VectorXd& beta) const;
    double column_dot(Index j, const Eigen::VectorXd& v) const;
    double threshold(Index j, double c, double t) const;
    double violation(Index j, double g, double b, double lambda) const;
    // Coordinate descent on the working set; true when converged within budget sweeps.
    bool solve_gaussian(State& s, const std::vector<Index>& working, double lambda, double tol,
                        int budget);
    bool solve_binomial(State& s, const std::vector<Index>& working, double lambda, double tol,
                        int budget);
    // Newton iterations on the sign-fixed active set, dropping coordinates
    // that cross zero.
    void polish(State& s, double lambda) const;
    double kkt_from_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& beta,
                             double lambda) const;

    static constexpr int kPhaseBudget = 20;
    HalFit finish(const State& s, double lambda) const;

    const SparseColumns& x_;
    Eigen::VectorXd y_;
    LossFamily loss_;
    SolverOptions opts_;
    std::uint64_t catalog_ref_;
    Eigen::VectorXd w_;
    std::vector<SignConstraint> signs_;
    std::vector<Index> allowed_;
    Eigen::VectorXd gauss_curv_; // sum_i w_i x_ij^2
    double null_intercept_ = 0.0;
    double lambda_max_ = 0.0;
    std::optional<Eigen::VectorXd> last_gradient_;
    double last_lambda_ = 0.0;
};

HalFit fit_lasso(const BasisCatalog& catalog, const Eigen::VectorXd& y, LossFamily loss,
                 double lambda, const FitOptions& options = {},
                 const HalFit* warm_start = nullptr);

struct PathOptions {
    FitOptions fit;
    // Smallest lambda as a fraction of lambda_max.
    double min_ratio = 0.01;
    // Explicit decreasing grid; overrides grid_size/min_ratio when nonempty.
    std::vector<double> grid;
};

std::vector<double> lambda_grid(double lambda_max, int grid_size, double min_ratio);

LassoPath fit_path(const BasisCatalog& catalog, const Eigen::VectorXd& y, LossFamily loss,
                   int grid_size, const PathOptions& options = {});
LassoPath fit_path(LassoSolver& solver, const std::vector<double>& grid);

struct ConstrainedOptions {
    PathOptions path;
    int grid_size = 20;
    // Relative tolerance on |slope norm - bound|.
    double relative_tolerance = 0.005;
    int max_bisections = 100;
    // lambda floor (fraction of lambda_max) used as the unpenalized limit.
    double unpenalized_ratio = 1e-6;
};

// Fit whose penalized norm (sum |beta_j|) matches l1_bound from below, or the
// least-penalized fit flagged bound_slack when the bound cannot bind.
HalFit constrained_fit(const BasisCatalog& catalog, const Eigen::VectorXd& y, LossFamily loss,
                       double l1_bound, const ConstrainedOptions& options = {});

// Same search on an existing solver, starting from lambda_hint.
HalFit solve_for_norm(LassoSolver& solver, double l1_bound, double relative_tolerance,
                      double lambda_hint, const HalFit* warm_start = nullptr,
                      int max_bisections = 100, double unpenalized_ratio = 1e-6);

} // namespace hal
