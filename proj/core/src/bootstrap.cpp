#include "hal/bootstrap.hpp"

#include "hal/data.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace hal {

double quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw DataError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile: p must lie in [0,1]");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

BootstrapReport bootstrap_plugin(const BasisCatalog& catalog, const HalFit& fit,
                                 const Eigen::VectorXd& y, const PluginFeature& feature,
                                 const BootstrapOptions& options) {
    if (options.B < 2) throw ConfigError("bootstrap: B must be >= 2");
    if (!feature) throw ConfigError("bootstrap: missing feature");
    const Index n = catalog.rows();
    if (y.size() != n) throw DataError("bootstrap: outcome length differs from the design");

    BootstrapReport rep;
    rep.B = options.B;
    rep.columns = fit.active_set;
    rep.l1_bound = fit.slope_l1_norm;
    rep.estimate = feature(fit, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));

    const BasisCatalog restricted = select_columns(catalog, rep.columns);
    HalFit start = fit;
    start.beta.resize(static_cast<Index>(rep.columns.size()));
    for (std::size_t k = 0; k < rep.columns.size(); ++k) start.beta(static_cast<Index>(k)) = fit.beta(rep.columns[k]);
    start.active_set.clear();
    for (Index k = 0; k < start.beta.size(); ++k)
        if (start.beta(k) != 0.0) start.active_set.push_back(k);
    const auto count = static_cast<std::size_t>(options.B);
    std::vector<double> est(count, 0.0);
    std::vector<char> ok(count, 0);
    std::vector<char> same_columns(count, 1);

    parallel_for(count, options.threads, [&](std::size_t b) {
        const auto draws = resample_indices(n, mix_seed(options.seed, b));
        FitOptions fo;
        fo.weights = multiplicity_weights(draws, n);
        fo.signs = restricted.signs;
        HalFit refit;
        try {
            LassoSolver solver(restricted.design, y, fit.loss, fo, catalog.fingerprint);
            refit = rep.columns.empty()
                        ? solver.null_fit()
                        : solve_for_norm(solver, rep.l1_bound, options.relative_tolerance, fit.lambda, &start);
        } catch (const NumericError&) {
            return;
        } catch (const DataError&) {
            // e.g. a resample whose binary outcome has no variation
            return;
        }
        HalFit mapped = refit;
        mapped.beta = Eigen::VectorXd::Zero(catalog.size());
        mapped.active_set.clear();
        for (std::size_t k = 0; k < rep.columns.size(); ++k) {
            const double v = refit.beta(static_cast<Index>(k));
            mapped.beta(rep.columns[k]) = v;
            if (v != 0.0) mapped.active_set.push_back(rep.columns[k]);
        }
        for (Index j : mapped.active_set)
            if (!std::binary_search(rep.columns.begin(), rep.columns.end(), j)) same_columns[b] = 0;
        const double v = feature(mapped, fo.weights);
        if (!std::isfinite(v)) return;
        est[b] = v;
        ok[b] = 1;
    });

    for (std::size_t b = 0; b < count; ++b) {
        if (ok[b]) rep.estimates.push_back(est[b]);
        else ++rep.failures;
        if (!same_columns[b]) rep.columns_identical = false;
    }
    if (rep.failures > options.max_failure_rate * options.B)
        throw NumericError("bootstrap: " + std::to_string(rep.failures) + " of " +
                               std::to_string(options.B) + " replicates failed",
                           static_cast<double>(rep.failures));
    if (rep.estimates.size() < 2) throw NumericError("bootstrap: fewer than 2 successful replicates", 0.0);

    const double alpha = 1.0 - options.level;
    rep.ci_percentile = {quantile(rep.estimates, alpha / 2.0), quantile(rep.estimates, 1.0 - alpha / 2.0)};
    const double mean = kahan_mean(rep.estimates);
    KahanSum ss;
    for (double v : rep.estimates) ss.add((v - mean) * (v - mean));
    rep.boot_se = std::sqrt(ss.value() / static_cast<double>(rep.estimates.size() - 1));
    const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
    rep.ci_wald = {rep.estimate - z * rep.boot_se, rep.estimate + z * rep.boot_se};
    return rep;
}

std::optional<std::size_t> plateau_index(const std::vector<double>& widths, int window,
                                         double threshold) {
    if (window < 2) throw ConfigError("plateau: window must be >= 2");
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t k = w - 1; k < widths.size(); ++k) {
        bool flat = true;
        for (std::size_t i = k + 2 - w; i <= k; ++i) {
            const double prev = widths[i - 1];
            const double change = prev > 0.0 ? std::abs(widths[i] - prev) / prev
                                             : (widths[i] == prev ? 0.0 : INFINITY);
            if (!(change < threshold)) {
                flat = false;
                break;
            }
        }
        if (flat) return k;
    }
    return std::nullopt;
}

PlateauReport plateau_select(const BasisCatalog& catalog, const Eigen::VectorXd& y,
                             const LassoPath& path, std::size_t cv_index,
                             const PluginFeature& feature, const BootstrapOptions& options,
                             int window, double threshold, bool stop_at_plateau) {
    if (cv_index >= path.fits.size()) throw ConfigError("plateau: cv index outside the path");
    PlateauReport out;
    std::vector<BootstrapReport> reports;
    const double cv_norm = path.fits[cv_index].l1_norm;
    for (std::size_t k = cv_index; k < path.fits.size(); ++k) {
        const HalFit& f = path.fits[k];
        if (f.l1_norm < cv_norm) continue;
        BootstrapReport b = bootstrap_plugin(catalog, f, y, feature, options);
        PlateauRow row;
        row.path_index = k;
        row.lambda = f.lambda;
        row.l1_norm = f.l1_norm;
        row.estimate = b.estimate;
        row.ci = b.ci_percentile;
        row.width = b.ci_percentile[1] - b.ci_percentile[0];
        out.scan.push_back(row);
        reports.push_back(std::move(b));
        if (stop_at_plateau) {
            std::vector<double> w;
            for (const auto& r : out.scan) w.push_back(r.width);
            if (plateau_index(w, window, threshold)) break;
        }
    }
    std::vector<double> widths;
    for (const auto& r : out.scan) widths.push_back(r.width);
    const auto pick = plateau_index(widths, window, threshold);
    out.flagged = !pick.has_value();
    out.selected = pick.value_or(out.scan.size() - 1);
    out.selected_norm = out.scan[out.selected].l1_norm;
    out.selected_report = reports[out.selected];
    return out;
}

} // namespace hal
