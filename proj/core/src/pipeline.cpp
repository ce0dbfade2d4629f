#include "hal/pipeline.hpp"

#include <cmath>

namespace hal {

namespace {

Eigen::MatrixXd covariate_columns(const Dataset& data, const std::vector<int>& columns) {
    if (columns.empty()) return data.covariates();
    Eigen::MatrixXd w(data.rows(), static_cast<Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const int c = columns[k];
        if (c < 0 || c >= data.covariate_count())
            throw ConfigError("propensity covariate index " + std::to_string(c) + " out of range");
        w.col(static_cast<Index>(k)) = data.covariates().col(c);
    }
    return w;
}

Eigen::VectorXd fitted_values(const BasisCatalog& catalog, const HalFit& fit) {
    Eigen::VectorXd eta = catalog.design * fit.beta;
    eta.array() += fit.intercept;
    for (Index i = 0; i < eta.size(); ++i) eta(i) = inverse_link(fit.loss, eta(i));
    return eta;
}

PropensityModel propensity_for(const Dataset& data, const PipelineConfig& cfg, const FoldPlan& folds,
                               const Truth* truth, const std::vector<int>& columns, NuisanceKind kind,
                               NuisanceFit* fit_out) {
    const Eigen::VectorXd& a = data.treatment();
    const Index n = data.rows();
    switch (kind) {
    case NuisanceKind::intercept:
        return make_propensity(Eigen::VectorXd::Constant(n, a.mean()), cfg.g_lo, cfg.g_hi, "intercept");
    case NuisanceKind::truth: {
        if (!truth || !truth->gbar0) throw ConfigError("true propensity requested without a known truth");
        Eigen::VectorXd g(n);
        for (Index i = 0; i < n; ++i) {
            const Eigen::VectorXd w = data.covariates().row(i).transpose();
            g(i) = truth->gbar0(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
        }
        return make_propensity(std::move(g), cfg.g_lo, cfg.g_hi, "truth");
    }
    case NuisanceKind::arm_means:
        throw ConfigError("arm_means applies to the outcome model only");
    case NuisanceKind::hal:
        break;
    }
    NuisanceFit fit = fit_propensity_hal(data, cfg.g_spec, folds, cfg.cv, columns);
    std::string label = "hal(";
    for (std::size_t k = 0; k < columns.size(); ++k) label += (k ? "," : "") + std::to_string(columns[k]);
    label += ")";
    PropensityModel g = make_propensity(propensity_predictions(fit), cfg.g_lo, cfg.g_hi, label);
    g.fit = fit.cv->fit;
    if (fit_out) *fit_out = std::move(fit);
    return g;
}

double treated_mean(const Dataset& data, TargetReport& r) {
    const Eigen::VectorXd& a = data.treatment();
    const Eigen::VectorXd& y = data.outcome();
    std::vector<double> ys;
    for (Index i = 0; i < y.size(); ++i)
        if (a(i) == 1.0) ys.push_back(y(i));
    if (ys.size() < 2) throw DataError("treated mean: fewer than 2 treated rows");
    const double m = kahan_mean(ys);
    double ss = 0.0;
    for (double v : ys) ss += (v - m) * (v - m);
    r.psi = m;
    r.se = std::sqrt(ss / static_cast<double>(ys.size() - 1) / static_cast<double>(ys.size()));
    r.ci = {m - 1.959963984540054 * r.se, m + 1.959963984540054 * r.se};
    r.ic = Eigen::VectorXd::Zero(y.size());
    return m;
}

} // namespace

std::string to_string(NuisanceKind k) {
    switch (k) {
    case NuisanceKind::hal: return "hal";
    case NuisanceKind::intercept: return "intercept";
    case NuisanceKind::truth: return "truth";
    case NuisanceKind::arm_means: return "arm_means";
    }
    return "?";
}

NuisanceKind parse_nuisance(const std::string& text) {
    if (text == "hal") return NuisanceKind::hal;
    if (text == "intercept") return NuisanceKind::intercept;
    if (text == "truth") return NuisanceKind::truth;
    if (text == "arm_means") return NuisanceKind::arm_means;
    throw ConfigError("nuisance model: unknown value '" + text + "' (hal, intercept, truth, arm_means)");
}

LossFamily outcome_loss(const Dataset& data) {
    return data.outcome_kind() == OutcomeKind::binary ? LossFamily::binomial : LossFamily::gaussian;
}

NuisanceFit fit_outcome_hal(const Dataset& data, const BasisSpec& spec, LossFamily loss,
                            const FoldPlan& folds, const CvOptions& cv) {
    NuisanceFit out;
    auto catalog = std::make_shared<BasisCatalog>(enumerate_basis(data, spec));
    out.cv = cv_select_lambda(*catalog, data.outcome(), loss, folds, cv);
    out.catalog = std::move(catalog);
    return out;
}

NuisanceFit fit_propensity_hal(const Dataset& data, const BasisSpec& spec, const FoldPlan& folds,
                               const CvOptions& cv, const std::vector<int>& columns) {
    NuisanceFit out;
    const Eigen::MatrixXd sub = covariate_columns(data, columns);
    // Candidates on fewer covariates than the interaction depth use full depth.
    BasisSpec s = spec;
    s.max_degree = std::min<int>(s.max_degree, static_cast<int>(sub.cols()));
    auto catalog = std::make_shared<BasisCatalog>(enumerate_basis(sub, s));
    out.cv = cv_select_lambda(*catalog, data.treatment(), LossFamily::binomial, folds, cv);
    out.catalog = std::move(catalog);
    return out;
}

Eigen::VectorXd propensity_predictions(const NuisanceFit& fit) {
    if (!fit.catalog || !fit.cv) throw ConfigError("propensity: no fitted model");
    return fitted_values(*fit.catalog, fit.cv->fit);
}

PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& cfg, std::uint64_t seed,
                            const Truth* truth) {
    PipelineResult res;
    const std::string& m = cfg.method;
    TargetReport& r = res.report;
    r.estimand = cfg.estimand;
    r.method = m;

    if (m == "oracle") {
        if (!truth) throw ConfigError("oracle estimator needs a known truth");
        r.psi = truth->psi0;
        r.ci = {truth->psi0, truth->psi0};
        r.ic = Eigen::VectorXd::Zero(data.rows());
        return res;
    }
    if (m == "treated_mean") {
        treated_mean(data, r);
        return res;
    }

    const Index n = data.rows();
    const FoldPlan folds = make_folds(n, cfg.folds, mix_seed(seed, 1));
    const LossFamily loss = outcome_loss(data);
    const int arm = cfg.estimand == Estimand::tsm0 ? 0 : 1;

    // Outcome model.
    switch (cfg.q_kind) {
    case NuisanceKind::intercept:
        res.q = constant_outcome_model(data, data.outcome().mean());
        break;
    case NuisanceKind::truth: {
        if (!truth || !truth->qbar0) throw ConfigError("true outcome model requested without a known truth");
        const Eigen::VectorXd& a = data.treatment();
        Eigen::VectorXd qo(n), q1(n), q0(n);
        for (Index i = 0; i < n; ++i) {
            const Eigen::VectorXd w = data.covariates().row(i).transpose();
            const std::span<const double> ws(w.data(), static_cast<std::size_t>(w.size()));
            q1(i) = truth->qbar0(1.0, ws);
            q0(i) = truth->qbar0(0.0, ws);
            qo(i) = a(i) == 1.0 ? q1(i) : q0(i);
        }
        res.q = outcome_from_predictions(data, std::move(qo), std::move(q1), std::move(q0));
        break;
    }
    case NuisanceKind::arm_means: {
        const Eigen::VectorXd& a = data.treatment();
        const Eigen::VectorXd& y = data.outcome();
        double s1 = 0.0, s0 = 0.0, n1 = 0.0, n0 = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (a(i) == 1.0) {
                s1 += y(i);
                n1 += 1.0;
            } else {
                s0 += y(i);
                n0 += 1.0;
            }
        }
        if (n1 == 0.0 || n0 == 0.0) throw DataError("arm_means: one treatment arm is empty");
        Eigen::VectorXd q1 = Eigen::VectorXd::Constant(n, s1 / n1), q0 = Eigen::VectorXd::Constant(n, s0 / n0);
        Eigen::VectorXd qo(n);
        for (Index i = 0; i < n; ++i) qo(i) = a(i) == 1.0 ? q1(i) : q0(i);
        res.q = outcome_from_predictions(data, std::move(qo), std::move(q1), std::move(q0));
        break;
    }
    case NuisanceKind::hal:
        res.q_fit = fit_outcome_hal(data, cfg.q_spec, loss, folds, cfg.cv);
        res.q = make_outcome_model(data, res.q_fit.catalog, res.q_fit.cv->fit);
        break;
    }

    // The bootstrap needs G only to undersmooth toward the plug-in's score equation.
    const bool needs_g = data.has_treatment() && (m != "bootstrap" || cfg.undersmooth);
    if (needs_g && m != "ctmle")
        res.g = propensity_for(data, cfg, folds, truth, {}, cfg.g_kind, &res.g_fit);

    if (cfg.undersmooth && m == "ipw" && cfg.g_kind == NuisanceKind::hal) {
        // IPW is linear once the propensity fit solves the score
        // P_n (1{A=a} - P(A=a|W)) / P(A=a|W) * Qbar(a, W).
        const auto& cv = *res.g_fit.cv;
        const auto catalog = res.g_fit.catalog;
        const Eigen::VectorXd& a = data.treatment();
        const Eigen::VectorXd& qa = res.q.arm(arm);
        FitOptions fo = cfg.cv.fit;
        fo.signs = catalog->signs;
        LassoSolver solver(catalog->design, a, LossFamily::binomial, fo, catalog->fingerprint);
        auto terms = [&](const HalFit& f) {
            const PropensityModel g = make_propensity(fitted_values(*catalog, f), cfg.g_lo, cfg.g_hi);
            Eigen::VectorXd t(n);
            for (Index i = 0; i < n; ++i) {
                const double ga = g.arm(arm, i);
                t(i) = ((a(i) == arm ? 1.0 : 0.0) - ga) / ga * qa(i);
            }
            return t;
        };
        const Eigen::VectorXd at_cv = terms(cv.fit);
        const double sigma = std::sqrt((at_cv.array() - at_cv.mean()).square().mean());
        ScoreCriterion crit = [&](const HalFit& f) { return std::abs(terms(f).mean()); };
        res.undersmoothing = undersmooth_select(solver, cv.path, cv.selected_index, crit, sigma, cfg.undersmoothing);
        res.g = make_propensity(fitted_values(*catalog, res.undersmoothing->fit), cfg.g_lo, cfg.g_hi, res.g.label);
        res.g.fit = res.undersmoothing->fit;
    } else if (cfg.undersmooth && cfg.q_kind == NuisanceKind::hal && needs_g && m != "ctmle") {
        const auto& cv = *res.q_fit.cv;
        FitOptions fo = cfg.cv.fit;
        fo.signs = res.q_fit.catalog->signs;
        LassoSolver solver(res.q_fit.catalog->design, data.outcome(), loss, fo, res.q_fit.catalog->fingerprint);
        const TargetReport at_cv = plugin_tsm(res.q, res.g, data, arm);
        const double sigma = std::sqrt(at_cv.se * at_cv.se * static_cast<double>(n));
        const auto catalog = res.q_fit.catalog;
        const PropensityModel& g = res.g;
        ScoreCriterion crit = [&](const HalFit& f) {
            const OutcomeModel qm = make_outcome_model(data, catalog, f);
            return std::abs(plugin_tsm(qm, g, data, arm).pn_dstar);
        };
        res.undersmoothing = undersmooth_select(solver, cv.path, cv.selected_index, crit, sigma, cfg.undersmoothing);
        res.q = make_outcome_model(data, catalog, res.undersmoothing->fit);
    }

    if (m == "plugin" || m == "ipw" || m == "tmle" || m == "tmle_preserving") {
        TmleResult t = estimate(cfg.estimand, res.q, res.g, data, parse_method(m), cfg.tmle);
        res.report = std::move(t.report);
        res.q = std::move(t.q);
    } else if (m == "ctmle") {
        if (cfg.estimand == Estimand::ate) throw ConfigError("ctmle supports tsm1 and tsm0 only");
        std::vector<std::vector<int>> ladder = cfg.g_ladder;
        if (ladder.empty()) {
            ladder.push_back({});
            std::vector<int> all;
            for (int c = 0; c < data.covariate_count(); ++c) all.push_back(c);
            ladder.push_back(all);
        }
        std::vector<PropensityModel> gs;
        for (const auto& cols : ladder) {
            if (cols.empty()) gs.push_back(propensity_for(data, cfg, folds, truth, {}, NuisanceKind::intercept, nullptr));
            else gs.push_back(propensity_for(data, cfg, folds, truth, cols, NuisanceKind::hal, nullptr));
        }
        CtmleResult c = ctmle_select(res.q, gs, data, folds, cfg.tmle, arm);
        const TmleResult plain = tmle_update_tsm(res.q, gs.back(), data, cfg.tmle, arm);
        res.extras["plain_tmle_psi"] = plain.report.psi;
        res.extras["plain_tmle_se"] = plain.report.se;
        res.extras["uses_last_candidate"] = c.uses(gs.size() - 1) ? 1.0 : 0.0;
        res.extras["selected_steps"] = static_cast<double>(c.selected_steps);
        res.g = gs[c.trace[c.selected_steps - 1].candidate];
        res.q = c.q;
        res.report = c.report;
        res.ctmle = std::move(c);
    } else if (m == "bootstrap") {
        if (cfg.q_kind != NuisanceKind::hal) throw ConfigError("bootstrap needs a HAL outcome model");
        const auto catalog = res.q_fit.catalog;
        const SparseColumns& at_arm =
            data.has_treatment() ? (arm == 1 ? *res.q.design1 : *res.q.design0) : catalog->design;
        PluginFeature feature = [&at_arm](const HalFit& f, const Eigen::VectorXd& w) {
            Eigen::VectorXd eta = at_arm * f.beta;
            KahanSum s;
            for (Index i = 0; i < eta.size(); ++i)
                if (w(i) != 0.0) s.add(w(i) * inverse_link(f.loss, eta(i) + f.intercept));
            return s.value();
        };
        BootstrapOptions bo = cfg.bootstrap;
        bo.seed = mix_seed(seed, 2);
        const HalFit& base = res.undersmoothing ? res.undersmoothing->fit : res.q_fit.cv->fit;
        if (cfg.plateau) {
            res.plateau = plateau_select(*catalog, data.outcome(), res.q_fit.cv->path,
                                         res.q_fit.cv->selected_index, feature, bo, 3, 0.05,
                                         cfg.plateau_stop_early);
            res.bootstrap = res.plateau->selected_report;
        } else {
            res.bootstrap = bootstrap_plugin(*catalog, base, data.outcome(), feature, bo);
        }
        r.estimand = cfg.estimand;
        r.method = "bootstrap";
        r.psi = res.bootstrap->estimate;
        r.se = res.bootstrap->boot_se;
        r.ci = res.bootstrap->ci_percentile;
        r.ic = Eigen::VectorXd::Zero(n);
        res.extras["columns_identical"] = res.bootstrap->columns_identical ? 1.0 : 0.0;
        res.extras["ci_wald_lo"] = res.bootstrap->ci_wald[0];
        res.extras["ci_wald_hi"] = res.bootstrap->ci_wald[1];
        res.extras["failures"] = res.bootstrap->failures;
    } else {
        throw ConfigError("method: unknown value '" + m +
                          "' (plugin, ipw, tmle, tmle_preserving, ctmle, bootstrap, oracle, treated_mean)");
    }
    return res;
}

} // namespace hal
