#include "hal/sim.hpp"

#include "hal/quadrature.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace hal {

namespace {

double at(std::span<const double> w, int k) { return w[static_cast<std::size_t>(k)]; }

Dgp dgp_a() {
    Dgp d;
    d.id = "A";
    d.dimension = 2;
    d.gbar0 = [](std::span<const double> w) { return expit(0.4 * at(w, 0) - 0.5 * at(w, 1) + 0.2); };
    d.qbar0 = [](double a, std::span<const double> w) { return expit(a + at(w, 0) * at(w, 1) - 0.5); };
    d.q_dims = {0, 1};
    return d;
}

Dgp dgp_b() {
    Dgp d;
    d.id = "B";
    d.dimension = 3;
    d.gbar0 = [](std::span<const double> w) {
        return expit(0.4 * at(w, 0) - 0.5 * at(w, 1) - 2.8 + 3.0 * at(w, 2));
    };
    d.qbar0 = [](double a, std::span<const double> w) {
        return expit(a + at(w, 0) * at(w, 1) - 0.5);
    };
    d.q_dims = {0, 1};
    return d;
}

Dgp dgp_c() {
    Dgp d;
    d.id = "C";
    d.dimension = 2;
    d.has_treatment = false;
    d.kind = OutcomeKind::continuous;
    d.noise_sd = 1.0;
    d.qbar0 = [](double, std::span<const double> w) {
        const double w1 = at(w, 0), w2 = at(w, 1);
        return (w1 >= 0.3 ? 1.0 : 0.0) + (w2 >= 0.6 ? 0.5 : 0.0) + (w1 >= 0.5 && w2 >= 0.4 ? 1.0 : 0.0);
    };
    d.q_dims = {0, 1};
    d.breakpoints = {{0.3, 0.5}, {0.4, 0.6}};
    return d;
}

Dgp dgp_step() {
    Dgp d;
    d.id = "step";
    d.dimension = 1;
    d.has_treatment = false;
    d.kind = OutcomeKind::continuous;
    d.noise_sd = 1.0;
    d.qbar0 = [](double, std::span<const double> w) { return at(w, 0) >= 0.5 ? 1.0 : 0.0; };
    d.q_dims = {0};
    d.breakpoints = {{0.5}};
    return d;
}

Dgp finish(Dgp d) {
    if (d.breakpoints.empty()) d.breakpoints.assign(static_cast<std::size_t>(d.dimension), {});
    d.psi0 = d.psi0_at(400);
    return d;
}

} // namespace

Dataset Dgp::sample(Index n, std::uint64_t seed) const {
    if (n < 1) throw ConfigError("dgp: n must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd w(n, dimension);
    Eigen::VectorXd a(n), y(n);
    std::vector<double> row(static_cast<std::size_t>(dimension));
    for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < dimension; ++k) {
            row[static_cast<std::size_t>(k)] = unif(rng);
            w(i, k) = row[static_cast<std::size_t>(k)];
        }
        double ai = 0.0;
        if (has_treatment) ai = unif(rng) < gbar0(row) ? 1.0 : 0.0;
        a(i) = ai;
        const double q = qbar0(ai, row);
        y(i) = kind == OutcomeKind::binary ? (unif(rng) < q ? 1.0 : 0.0) : q + noise_sd * normal(rng);
    }
    std::vector<std::string> names;
    for (int k = 0; k < dimension; ++k) names.push_back("w" + std::to_string(k + 1));
    return Dataset(std::move(w), has_treatment ? std::optional<Eigen::VectorXd>(std::move(a)) : std::nullopt,
                   std::move(y), kind, std::move(names));
}

double Dgp::psi0_at(int points_per_axis, Estimand estimand) const {
    std::vector<Axis> axes;
    for (int k : q_dims) {
        const auto& b = breakpoints.empty() ? std::vector<double>{} : breakpoints[static_cast<std::size_t>(k)];
        axes.push_back(unit_axis(points_per_axis, b));
    }
    std::vector<double> w(static_cast<std::size_t>(dimension), 0.5);
    auto mean_at = [&](double a) {
        return integrate_cube(
            [&](std::span<const double> x) {
                for (std::size_t k = 0; k < q_dims.size(); ++k) w[static_cast<std::size_t>(q_dims[k])] = x[k];
                return qbar0(a, w);
            },
            axes);
    };
    if (!has_treatment) return mean_at(0.0);
    switch (estimand) {
    case Estimand::tsm1: return mean_at(1.0);
    case Estimand::tsm0: return mean_at(0.0);
    case Estimand::ate: return mean_at(1.0) - mean_at(0.0);
    }
    return 0.0;
}

Truth Dgp::truth(Estimand estimand) const {
    Truth t;
    t.gbar0 = gbar0;
    t.qbar0 = qbar0;
    t.psi0 = estimand == Estimand::tsm1 ? psi0 : psi0_at(400, estimand);
    return t;
}

std::vector<Dgp> builtin_dgps() {
    std::vector<Dgp> out;
    out.push_back(finish(dgp_a()));
    out.push_back(finish(dgp_b()));
    out.push_back(finish(dgp_c()));
    out.push_back(finish(dgp_step()));

    Dgp r = dgp_a();
    r.id = "A-randomized";
    r.gbar0 = [](std::span<const double>) { return 0.5; };
    out.push_back(finish(r));

    Dgp null = dgp_a();
    null.id = "A-null";
    null.qbar0 = [](double, std::span<const double> w) { return expit(at(w, 0) * at(w, 1) - 0.5); };
    out.push_back(finish(null));

    Dgp shift = dgp_a();
    shift.id = "A-shift";
    shift.qbar0 = [](double a, std::span<const double> w) { return 0.2 + 0.3 * a + 0.3 * at(w, 0) * at(w, 1); };
    out.push_back(finish(shift));
    return out;
}

Dgp find_dgp(const std::string& id) {
    for (auto& d : builtin_dgps())
        if (d.id == id) return d;
    throw ConfigError("dgp: unknown id '" + id + "'");
}

SimEstimator pipeline_estimator(const PipelineConfig& config, const Truth& truth) {
    return [config, truth](const Dataset& data, std::uint64_t seed) {
        return run_pipeline(data, config, seed, &truth);
    };
}

SimResult run_mc(const Dgp& dgp, const SimEstimator& estimator, Index n, int replicates,
                 std::uint64_t seed, std::size_t threads, const std::string& name) {
    return run_mc(dgp, estimator, n, replicates, seed, threads, name, dgp.psi0);
}

SimResult run_mc(const Dgp& dgp, const SimEstimator& estimator, Index n, int replicates,
                 std::uint64_t seed, std::size_t threads, const std::string& name, double psi0) {
    if (replicates < 1) throw ConfigError("run_mc: replicates must be >= 1");
    SimResult res;
    res.dgp = dgp.id;
    res.estimator = name;
    res.n = n;
    res.replicates = replicates;
    res.seed = seed;
    res.psi0 = psi0;
    res.rows.resize(static_cast<std::size_t>(replicates));

    parallel_for(res.rows.size(), threads, [&](std::size_t r) {
        Replicate& row = res.rows[r];
        row.index = r;
        row.seed = mix_seed(seed, r);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Dataset data = dgp.sample(n, mix_seed(row.seed, 0));
            const PipelineResult out = estimator(data, mix_seed(row.seed, 1));
            row.psi = out.report.psi;
            row.se = out.report.se;
            row.ci_lo = out.report.ci[0];
            row.ci_hi = out.report.ci[1];
            row.covered = row.ci_lo <= psi0 && psi0 <= row.ci_hi;
            row.pn_dstar = out.report.pn_dstar;
            row.tol = out.report.tol;
            row.tol_met = out.report.tol_met;
            row.extras = out.extras;
            if (out.report.battery_max) row.extras["battery_max"] = *out.report.battery_max;
            row.extras["steps"] = out.report.steps;
        } catch (const Error& e) {
            row.failed = true;
            row.error = e.what();
        }
        row.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    KahanSum est, sq, cov, width, se, icv, tol;
    std::vector<double> psis;
    for (const auto& row : res.rows) {
        if (row.failed) {
            ++res.failures;
            continue;
        }
        psis.push_back(row.psi);
        est.add(row.psi);
        sq.add((row.psi - psi0) * (row.psi - psi0));
        cov.add(row.covered ? 1.0 : 0.0);
        width.add(row.ci_hi - row.ci_lo);
        se.add(row.se);
        icv.add(row.se * row.se * static_cast<double>(n));
        tol.add(row.tol_met ? 1.0 : 0.0);
    }
    if (res.failures > 0.05 * replicates)
        throw NumericError("run_mc: " + std::to_string(res.failures) + " of " + std::to_string(replicates) +
                               " replicates failed; first error: " +
                               std::find_if(res.rows.begin(), res.rows.end(), [](const Replicate& r) {
                                   return r.failed;
                               })->error,
                           static_cast<double>(res.failures));
    const double m = static_cast<double>(psis.size());
    if (m == 0) return res;
    res.mean_estimate = est.value() / m;
    res.bias = res.mean_estimate - psi0;
    KahanSum var;
    for (double p : psis) var.add((p - res.mean_estimate) * (p - res.mean_estimate));
    res.variance = m > 1 ? var.value() / (m - 1.0) : 0.0;
    res.mse = sq.value() / m;
    res.coverage = cov.value() / m;
    res.mean_ci_width = width.value() / m;
    res.mean_se = se.value() / m;
    res.mean_ic_variance = icv.value() / m;
    res.tol_met_rate = tol.value() / m;
    return res;
}

double l2_error(const Dgp& dgp, const BasisCatalog& catalog, const HalFit& fit) {
    if (dgp.has_treatment) throw ConfigError("l2_error: only for DGPs without treatment");
    if (catalog.dimension != dgp.dimension) throw ConfigError("l2_error: catalog dimension differs from the DGP");
    const int d = dgp.dimension;
    std::vector<std::vector<double>> cuts(static_cast<std::size_t>(d));
    int order = 0;
    for (Index j : fit.active_set) {
        const auto& f = catalog.functions[static_cast<std::size_t>(j)];
        order = std::max(order, f.order);
        for (std::size_t k = 0; k < f.subset.size(); ++k)
            cuts[static_cast<std::size_t>(f.subset[k])].push_back(f.knot[k]);
    }
    std::vector<Axis> axes;
    for (int k = 0; k < d; ++k) {
        auto& c = cuts[static_cast<std::size_t>(k)];
        const auto& b = dgp.breakpoints[static_cast<std::size_t>(k)];
        c.insert(c.end(), b.begin(), b.end());
        // Piecewise constant fits need one node per cell, linear ones two.
        axes.push_back(unit_axis(order == 0 ? 1 : 2, c));
    }

    // All tensor nodes, evaluated in one pass through the active columns.
    Index total = 1;
    for (const auto& a : axes) total *= static_cast<Index>(a.nodes.size());
    Eigen::MatrixXd x(total, d);
    Eigen::VectorXd wts(total);
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    for (Index r = 0; r < total; ++r) {
        double w = 1.0;
        for (int k = 0; k < d; ++k) {
            x(r, k) = axes[static_cast<std::size_t>(k)].nodes[idx[static_cast<std::size_t>(k)]];
            w *= axes[static_cast<std::size_t>(k)].weights[idx[static_cast<std::size_t>(k)]];
        }
        wts(r) = w;
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == axes[k].nodes.size()) idx[k++] = 0;
    }
    const BasisCatalog active = select_columns(catalog, fit.active_set);
    Eigen::VectorXd coef(static_cast<Index>(fit.active_set.size()) + 1);
    coef(0) = fit.intercept;
    for (std::size_t k = 0; k < fit.active_set.size(); ++k)
        coef(static_cast<Index>(k) + 1) = fit.beta(fit.active_set[k]);
    const Eigen::VectorXd pred = predict(active, coef, x);
    KahanSum s;
    std::vector<double> w(static_cast<std::size_t>(d));
    for (Index r = 0; r < total; ++r) {
        for (int k = 0; k < d; ++k) w[static_cast<std::size_t>(k)] = x(r, k);
        const double diff = pred(r) - dgp.qbar0(0.0, w);
        s.add(wts(r) * diff * diff);
    }
    return std::sqrt(s.value());
}

BasisSpec rate_spec(const RateOptions& options, Index n) {
    BasisSpec spec = options.spec;
    if (options.knot_scale > 0.0) {
        const double q = std::ceil(options.knot_scale * std::pow(static_cast<double>(n), options.knot_exponent));
        spec.knots = KnotStrategy::quantiles;
        spec.quantile_count = static_cast<int>(std::clamp(q, 2.0, static_cast<double>(n)));
    }
    return spec;
}

RateResult rate_experiment(const Dgp& dgp, const std::vector<Index>& n_grid, int replicates,
                           std::uint64_t seed, const RateOptions& options) {
    if (n_grid.size() < 3) throw ConfigError("rate experiment: need at least 3 sample sizes");
    for (std::size_t k = 1; k < n_grid.size(); ++k)
        if (n_grid[k] <= n_grid[k - 1]) throw ConfigError("rate experiment: sample sizes must increase");
    if (replicates < 1) throw ConfigError("rate experiment: replicates must be >= 1");
    RateResult res;
    res.dgp = dgp.id;
    res.seed = seed;
    const LossFamily loss = dgp.kind == OutcomeKind::binary ? LossFamily::binomial : LossFamily::gaussian;
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        const Index n = n_grid[g];
        RateRow row;
        row.n = n;
        const BasisSpec spec = rate_spec(options, n);
        row.errors.assign(static_cast<std::size_t>(replicates), 0.0);
        parallel_for(row.errors.size(), options.threads, [&](std::size_t r) {
            const std::uint64_t s = mix_seed(mix_seed(seed, static_cast<std::uint64_t>(n)), r);
            const Dataset data = dgp.sample(n, mix_seed(s, 0));
            const FoldPlan folds = make_folds(n, options.folds, mix_seed(s, 1));
            CvOptions cv = options.cv;
            cv.threads = 1;
            const CvFit fit = cv_select_lambda(data, spec, loss, folds, cv);
            row.errors[r] = l2_error(dgp, fit.catalog, fit.selection.fit);
        });
        row.mean_error = kahan_mean(row.errors);
        KahanSum v;
        for (double e : row.errors) v.add((e - row.mean_error) * (e - row.mean_error));
        row.sd_error = replicates > 1 ? std::sqrt(v.value() / (replicates - 1.0)) : 0.0;
        res.rows.push_back(std::move(row));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(res.rows.size());
    for (const auto& r : res.rows) {
        const double lx = std::log(static_cast<double>(r.n)), ly = std::log(r.mean_error);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    res.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    return res;
}

} // namespace hal
