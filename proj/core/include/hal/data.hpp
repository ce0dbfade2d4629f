#pragma once

#include "hal/common.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hal {

enum class OutcomeKind { continuous, binary };

std::string to_string(OutcomeKind kind);
OutcomeKind parse_outcome_kind(const std::string& text);

/// Which CSV columns play which role. Exactly one outcome; treatment optional.
struct ColumnRoles {
    std::vector<std::string> covariates;
    std::optional<std::string> treatment;
    std::string outcome;
    OutcomeKind outcome_kind = OutcomeKind::continuous;
};

// Parses "W=w1,w2;A=a;Y=y;kind=binary". Keys are case-insensitive; A and kind
// are optional.
ColumnRoles parse_roles(const std::string& text);

/// Observations O_i = (W_i, A_i, Y_i). Immutable once constructed.
class Dataset {
public:
    Dataset(Eigen::MatrixXd covariates, std::optional<Eigen::VectorXd> treatment,
            Eigen::VectorXd outcome, OutcomeKind kind,
            std::vector<std::string> covariate_names = {},
            std::string treatment_name = "a", std::string outcome_name = "y");

    Index rows() const noexcept { return covariates_.rows(); }
    Index covariate_count() const noexcept { return covariates_.cols(); }

    const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
    bool has_treatment() const noexcept { return treatment_.has_value(); }
    const Eigen::VectorXd& treatment() const; // throws DataError if absent
    const Eigen::VectorXd& outcome() const noexcept { return outcome_; }
    OutcomeKind outcome_kind() const noexcept { return kind_; }

    const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
    const std::string& treatment_name() const noexcept { return treatment_name_; }
    const std::string& outcome_name() const noexcept { return outcome_name_; }
    // d + 2 labels (d + 1 without treatment): covariates, treatment, outcome.
    std::vector<std::string> column_names() const;

    // Regressor matrix for Y ~ (A, W): treatment first when present, else W.
    Eigen::MatrixXd regression_design() const;
    // Same with the treatment column set to `a` for every row.
    Eigen::MatrixXd regression_design(double a) const;

    Dataset subset(std::span<const Index> rows) const;
    Dataset with_outcome(Eigen::VectorXd outcome, OutcomeKind kind) const;

private:
    Eigen::MatrixXd covariates_;
    std::optional<Eigen::VectorXd> treatment_;
    Eigen::VectorXd outcome_;
    OutcomeKind kind_;
    std::vector<std::string> covariate_names_;
    std::string treatment_name_;
    std::string outcome_name_;
};

Dataset load_csv(const std::filesystem::path& path, const ColumnRoles& roles);
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// V-fold partition of the rows. Fold ids are 1..V.
struct FoldPlan {
    int folds = 0;
    std::vector<int> assignment;
    std::uint64_t seed = 0;

    std::vector<Index> validation_rows(int fold) const;
    std::vector<Index> training_rows(int fold) const;
    std::vector<Index> fold_sizes() const;
};

FoldPlan make_folds(Index rows, int folds, std::uint64_t seed);
FoldPlan make_folds(const Dataset& data, int folds, std::uint64_t seed);

// n indices drawn uniformly with replacement.
std::vector<Index> resample_indices(Index rows, std::uint64_t seed);
Dataset resample(const Dataset& data, std::uint64_t seed);

// Row multiplicities of a resample, as weights summing to one.
Eigen::VectorXd multiplicity_weights(std::span<const Index> draws, Index rows);

} // namespace hal
