#pragma once

#include "hal/common.hpp"
#include "hal/data.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace hal {

using SparseColumns = Eigen::SparseMatrix<double, Eigen::ColMajor>;

enum class KnotStrategy { all_observations, quantiles };
enum class SignConstraint { none, nonnegative, nonpositive };

/// Restrictions on the HAL model: interaction depth, knot placement, spline
/// order, column cap, coefficient signs and additive structure.
struct BasisSpec {
    int max_degree = 1;
    KnotStrategy knots = KnotStrategy::all_observations;
    int quantile_count = 5;
    int spline_order = 0;
    std::optional<std::size_t> max_basis;
    // Keyed by covariate subset (0-based, sorted) of the basis group.
    std::map<std::vector<int>, SignConstraint> sign_constraints;
    // When nonempty, only subsets contained in one of these groups are used.
    std::vector<std::vector<int>> additive_groups;
    // Upper bound on (pre-dedup column count) x (rows) evaluated entries.
    double memory_budget_entries = 4.0e8;

    void validate(int dimension) const;
};

/// One tensor-product spline: prod_{j in subset} 1{knot_j <= x_j} (order 0)
/// or prod max(x_j - knot_j, 0) (order 1).
struct BasisFunction {
    std::vector<int> subset;
    std::vector<double> knot;
    int order = 0;
};

double evaluate_basis(const BasisFunction& f, std::span<const double> x);

/// Deduplicated basis functions and their evaluations on the training rows.
struct BasisCatalog {
    int dimension = 0;
    std::vector<BasisFunction> functions;
    SparseColumns design; // rows x functions.size()
    // Observation rows whose knots generated each column (merged duplicates).
    std::vector<std::vector<Index>> provenance;
    std::vector<SignConstraint> signs;
    std::size_t pre_dedup_count = 0;
    std::uint64_t fingerprint = 0;

    Index rows() const noexcept { return design.rows(); }
    Index size() const noexcept { return design.cols(); }
    // Fraction of training rows where the column is nonzero.
    std::vector<double> support_fraction() const;
};

// Number of candidate columns enumerate_basis would generate before merging.
std::size_t candidate_count(Index rows, int dimension, const BasisSpec& spec);

BasisCatalog enumerate_basis(const Eigen::MatrixXd& x, const BasisSpec& spec);
// Regressors of Y on (A, W) when a treatment is present, else on W.
BasisCatalog enumerate_basis(const Dataset& data, const BasisSpec& spec);

// Keeps the k columns with the largest support; ties keep enumeration order.
BasisCatalog rank_by_sparsity(const BasisCatalog& catalog, std::size_t k);

// Catalog restricted to the listed columns (in the given order).
BasisCatalog select_columns(const BasisCatalog& catalog, std::span<const Index> columns);

// Evaluations of the catalog's functions on new rows.
SparseColumns evaluate_design(const BasisCatalog& catalog, const Eigen::MatrixXd& x);

// coefficients = (intercept, beta_1..beta_p).
Eigen::VectorXd predict(const BasisCatalog& catalog, const Eigen::VectorXd& coefficients,
                        const Eigen::MatrixXd& x);

// |intercept| + sum |beta_j| for coefficients = (intercept, beta...).
double sectional_variation_norm(const Eigen::VectorXd& coefficients);

std::uint64_t catalog_fingerprint(const std::vector<BasisFunction>& functions, Index rows);

} // namespace hal
