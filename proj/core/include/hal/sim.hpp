#pragma once

#include "hal/data.hpp"
#include "hal/pipeline.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hal {

/// Data-generating process on the unit cube with known nuisance functions.
struct Dgp {
    std::string id;
    int dimension = 2;
    bool has_treatment = true;
    OutcomeKind kind = OutcomeKind::binary;
    std::function<double(std::span<const double>)> gbar0;
    std::function<double(double, std::span<const double>)> qbar0;
    double noise_sd = 1.0; // continuous outcomes: Y = Qbar0 + N(0, noise_sd^2)
    // Covariates Qbar0 depends on; the rest integrate out trivially.
    std::vector<int> q_dims;
    // Discontinuity locations of Qbar0 per covariate (for exact integration).
    std::vector<std::vector<double>> breakpoints;
    double psi0 = 0.0; // tsm1 value at 400 points per axis

    Dataset sample(Index n, std::uint64_t seed) const;
    // E[Qbar0(a, W)] for the estimand's arm (the difference for ate; E[Qbar0(W)]
    // without treatment) by tensor Gauss-Legendre quadrature.
    double psi0_at(int points_per_axis, Estimand estimand = Estimand::tsm1) const;
    Truth truth(Estimand estimand = Estimand::tsm1) const;
};

// A: binary outcome, two covariates, mild confounding.
// B: A plus an instrument W3 that drives treatment only (positivity strain).
// C: continuous outcome, no treatment, two-dimensional step function.
// step: continuous outcome, one covariate, a single jump.
// A-randomized: A with Gbar0 = 0.5.
// A-null: A with no treatment effect.
// A-shift: binary outcome with a constant effect of 0.3 on the mean.
std::vector<Dgp> builtin_dgps();
Dgp find_dgp(const std::string& id);

struct Replicate {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double psi = 0.0;
    double se = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    bool covered = false;
    double pn_dstar = 0.0;
    double tol = 0.0;
    bool tol_met = false;
    double runtime = 0.0;
    std::map<std::string, double> extras;
};

struct SimResult {
    std::string dgp;
    std::string estimator;
    Index n = 0;
    int replicates = 0;
    std::uint64_t seed = 0;
    double psi0 = 0.0;
    std::vector<Replicate> rows;
    int failures = 0;
    double mean_estimate = 0.0;
    double bias = 0.0;
    double variance = 0.0;
    double mse = 0.0;
    double coverage = 0.0;
    double mean_ci_width = 0.0;
    double mean_se = 0.0;
    double mean_ic_variance = 0.0; // mean of se^2 * n
    double tol_met_rate = 0.0;
};

// Maps (data, estimator seed) to a pipeline result.
using SimEstimator = std::function<PipelineResult(const Dataset&, std::uint64_t)>;

SimEstimator pipeline_estimator(const PipelineConfig& config, const Truth& truth);

// Replicate r draws its data from mix_seed(mix_seed(seed, r), 0) and hands
// the estimator mix_seed(mix_seed(seed, r), 1). Failed replicates are
// recorded; more than 5% failures throws NumericError.
SimResult run_mc(const Dgp& dgp, const SimEstimator& estimator, Index n, int replicates,
                 std::uint64_t seed, std::size_t threads = 1, const std::string& name = "estimator");
// Same, with coverage and bias measured against `psi0` (e.g. for ate).
SimResult run_mc(const Dgp& dgp, const SimEstimator& estimator, Index n, int replicates,
                 std::uint64_t seed, std::size_t threads, const std::string& name, double psi0);

struct RateRow {
    Index n = 0;
    double mean_error = 0.0;
    double sd_error = 0.0;
    std::vector<double> errors;
};

struct RateResult {
    std::string dgp;
    std::vector<RateRow> rows;
    double slope = 0.0; // least squares slope of log mean error on log n
    std::uint64_t seed = 0;
};

struct RateOptions {
    BasisSpec spec;
    CvOptions cv;
    int folds = 5;
    std::size_t threads = 1;
    // When positive, spec uses quantile knots with ceil(knot_scale * n^knot_exponent)
    // per axis (capped at n), a sieve that grows with the sample size.
    double knot_scale = 0.0;
    double knot_exponent = 0.5;
};

// Basis spec used at sample size n under the options' knot rule.
BasisSpec rate_spec(const RateOptions& options, Index n);

// L2(P0) norm of (Qbar_n - Qbar0) for a HAL fit, integrated exactly over the
// cells cut by the fit's knots and the truth's breakpoints.
double l2_error(const Dgp& dgp, const BasisCatalog& catalog, const HalFit& fit);

RateResult rate_experiment(const Dgp& dgp, const std::vector<Index>& n_grid, int replicates,
                           std::uint64_t seed, const RateOptions& options = {});

} // namespace hal
