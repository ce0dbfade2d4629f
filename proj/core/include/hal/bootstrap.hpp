#pragma once

#include "hal/basis.hpp"
#include "hal/lasso.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace hal {

// Plug-in feature of a fit (coefficients in catalog space) under observation
// weights summing to one: the original sample gets 1/n each, a resample its
// multiplicities.
using PluginFeature = std::function<double(const HalFit&, const Eigen::VectorXd& weights)>;

struct BootstrapOptions {
    int B = 500;
    std::uint64_t seed = 1;
    double relative_tolerance = 0.005;
    double max_failure_rate = 0.05;
    double level = 0.95;
    std::size_t threads = 1;
};

struct BootstrapReport {
    int B = 0;
    double estimate = 0.0;
    std::vector<double> estimates; // successful replicates in index order
    int failures = 0;
    double boot_se = 0.0;
    std::array<double, 2> ci_percentile{0.0, 0.0};
    std::array<double, 2> ci_wald{0.0, 0.0};
    double l1_bound = 0.0;
    // Columns every replicate was restricted to.
    std::vector<Index> columns;
    bool columns_identical = true;
};

// Resamples rows, refits the lasso on the fit's active columns at its slope
// norm, and evaluates the feature on each refit.
BootstrapReport bootstrap_plugin(const BasisCatalog& catalog, const HalFit& fit,
                                 const Eigen::VectorXd& y, const PluginFeature& feature,
                                 const BootstrapOptions& options = {});

// Type-7 sample quantile.
double quantile(std::vector<double> xs, double p);

struct PlateauRow {
    std::size_t path_index = 0;
    double lambda = 0.0;
    double l1_norm = 0.0;
    double estimate = 0.0;
    std::array<double, 2> ci{0.0, 0.0};
    double width = 0.0;
};

struct PlateauReport {
    std::vector<PlateauRow> scan;
    std::size_t selected = 0; // index into scan
    double selected_norm = 0.0;
    bool flagged = false;     // widths never stabilized
    BootstrapReport selected_report;
};

// First scan position k whose trailing window of `window` points has every
// consecutive relative width change below `threshold`.
std::optional<std::size_t> plateau_index(const std::vector<double>& widths, int window = 3,
                                         double threshold = 0.05);

// Percentile-CI widths at every path fit from the cv fit onward; selects the
// plateau point. With stop_at_plateau the scan ends at the selected point
// (same selection, shorter table).
PlateauReport plateau_select(const BasisCatalog& catalog, const Eigen::VectorXd& y,
                             const LassoPath& path, std::size_t cv_index,
                             const PluginFeature& feature, const BootstrapOptions& options = {},
                             int window = 3, double threshold = 0.05, bool stop_at_plateau = false);

} // namespace hal
