#include "hal/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace hal {

namespace {

double held_out_risk(const SparseColumns& design, const Eigen::VectorXd& y, LossFamily loss,
                     const HalFit& fit, const std::vector<Index>& rows) {
    Eigen::VectorXd eta = design * fit.beta;
    KahanSum s;
    for (Index i : rows) s.add(pointwise_loss(loss, y(i), eta(i) + fit.intercept));
    return s.value() / static_cast<double>(rows.size());
}

std::string lambda_id(std::size_t k, double lambda) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "lambda[%zu]=%.6g", k, lambda);
    return buf;
}

int knot_rank(const BasisSpec& s) {
    return s.knots == KnotStrategy::all_observations ? std::numeric_limits<int>::max()
                                                     : s.quantile_count;
}

} // namespace

std::size_t select_candidate(const std::vector<double>& mean_risk,
                             const std::vector<double>& l1_norms) {
    if (mean_risk.empty()) throw ConfigError("cv: no candidates");
    std::size_t best = 0;
    for (std::size_t c = 1; c < mean_risk.size(); ++c) {
        if (mean_risk[c] < mean_risk[best]) {
            best = c;
        } else if (mean_risk[c] == mean_risk[best] && c < l1_norms.size() &&
                   l1_norms[c] < l1_norms[best]) {
            best = c;
        }
    }
    return best;
}

CvSelection cv_select_lambda(const BasisCatalog& catalog, const Eigen::VectorXd& y, LossFamily loss,
                             const FoldPlan& folds, const CvOptions& options) {
    const Index n = catalog.rows();
    if (static_cast<Index>(folds.assignment.size()) != n)
        throw DataError("cv: fold plan covers " + std::to_string(folds.assignment.size()) +
                        " rows, data has " + std::to_string(n));
    if (folds.folds < 2) throw ConfigError("cv: need at least 2 folds");

    FitOptions base = options.fit;
    if (base.signs.empty()) base.signs = catalog.signs;
    LassoSolver full(catalog.design, y, loss, base, catalog.fingerprint);
    const auto grid = lambda_grid(full.lambda_max(), options.grid_size, options.min_ratio);

    const auto v_count = static_cast<std::size_t>(folds.folds);
    std::vector<std::vector<double>> risks(v_count);
    parallel_for(v_count, options.threads, [&](std::size_t v) {
        const int fold = static_cast<int>(v) + 1;
        const auto held = folds.validation_rows(fold);
        FitOptions fo = base;
        Eigen::VectorXd w = options.fit.weights.size() ? options.fit.weights
                                                       : Eigen::VectorXd::Ones(n);
        for (Index i : held) w(i) = 0.0;
        fo.weights = w;
        try {
            LassoSolver solver(catalog.design, y, loss, fo, catalog.fingerprint);
            const LassoPath path = fit_path(solver, grid);
            auto& out = risks[v];
            for (const auto& f : path.fits) out.push_back(held_out_risk(catalog.design, y, loss, f, held));
        } catch (const NumericError& e) {
            throw NumericError("cv fold " + std::to_string(fold) + ": " + e.what(), e.residual());
        } catch (const DataError& e) {
            throw DataError("cv fold " + std::to_string(fold) + ": " + e.what());
        }
    });

    CvSelection sel;
    sel.path = fit_path(full, grid);
    CvReport& rep = sel.report;
    rep.seed = folds.seed;
    const std::size_t c_count = grid.size();
    rep.fold_risks.assign(c_count, std::vector<double>(v_count));
    for (std::size_t c = 0; c < c_count; ++c) {
        rep.candidate_ids.push_back(lambda_id(c, grid[c]));
        KahanSum s;
        for (std::size_t v = 0; v < v_count; ++v) {
            rep.fold_risks[c][v] = risks[v][c];
            s.add(risks[v][c]);
        }
        rep.mean_risk.push_back(s.value() / static_cast<double>(v_count));
        rep.l1_norms.push_back(sel.path.fits[c].l1_norm);
    }
    rep.selected = select_candidate(rep.mean_risk, rep.l1_norms);
    sel.selected_index = rep.selected;
    sel.fit = sel.path.fits[rep.selected];
    return sel;
}

CvFit cv_select_lambda(const Dataset& data, const BasisSpec& spec, LossFamily loss,
                       const FoldPlan& folds, const CvOptions& options) {
    CvFit out;
    out.catalog = enumerate_basis(data, spec);
    out.selection = cv_select_lambda(out.catalog, data.outcome(), loss, folds, options);
    return out;
}

void HalSpecLadder::validate() const {
    if (specs.empty()) throw ConfigError("ladder: no specifications");
    for (std::size_t k = 1; k < specs.size(); ++k) {
        const auto prev = std::make_pair(specs[k - 1].max_degree, knot_rank(specs[k - 1]));
        const auto cur = std::make_pair(specs[k].max_degree, knot_rank(specs[k]));
        if (!(prev < cur))
            throw ConfigError("ladder: spec " + std::to_string(k + 1) +
                              " is not more complex than spec " + std::to_string(k));
    }
}

SuperLearnerResult discrete_super_learner(const Dataset& data, const HalSpecLadder& ladder,
                                          LossFamily loss, const FoldPlan& folds,
                                          const CvOptions& options) {
    ladder.validate();
    SuperLearnerResult out;
    out.report.seed = folds.seed;
    double best_risk = std::numeric_limits<double>::infinity();
    double prev_risk = best_risk;
    for (std::size_t k = 0; k < ladder.specs.size(); ++k) {
        CvFit cand = cv_select_lambda(data, ladder.specs[k], loss, folds, options);
        const auto& r = cand.selection.report;
        const double risk = r.mean_risk[r.selected];
        out.report.candidate_ids.push_back("spec[" + std::to_string(k) + "]");
        out.report.fold_risks.push_back(r.fold_risks[r.selected]);
        out.report.mean_risk.push_back(risk);
        out.report.l1_norms.push_back(cand.selection.fit.l1_norm);
        ++out.evaluated;

        const double reference = ladder.stop == LadderStop::worse_than_best ? best_risk : prev_risk;
        if (k > 0 && risk > reference) break;
        prev_risk = risk;
        if (risk < best_risk) {
            best_risk = risk;
            out.report.selected = k;
            out.best = std::move(cand);
        }
    }
    return out;
}

double undersmooth_threshold(double sigma_n, Index n, double constant) {
    if (n < 2) throw ConfigError("undersmoothing threshold needs n >= 2");
    const double nn = static_cast<double>(n);
    return constant * sigma_n / (std::sqrt(nn) * std::log(nn));
}

UndersmoothResult undersmooth_select(LassoSolver& solver, const LassoPath& path,
                                     std::size_t cv_index, const ScoreCriterion& criterion,
                                     double sigma_n, const UndersmoothOptions& options) {
    if (cv_index >= path.fits.size()) throw ConfigError("undersmoothing: cv index outside the path");
    if (!criterion) throw ConfigError("undersmoothing: missing criterion");
    UndersmoothResult out;
    const HalFit& cv = path.fits[cv_index];
    out.threshold = undersmooth_threshold(sigma_n, solver.weights().size(), options.threshold_constant);
    out.fit = cv;
    if (std::isinf(out.threshold)) {
        out.criterion_met = true;
        out.vacuous = true;
        return out;
    }

    auto check = [&](const HalFit& f) {
        const double v = criterion(f);
        if (!std::isfinite(v)) throw NumericError("undersmoothing: criterion is not finite", v);
        out.trace.emplace_back(f.l1_norm, v);
        out.fit = f;
        out.criterion_value = v;
        return v <= out.threshold;
    };

    for (std::size_t k = cv_index; k < path.fits.size(); ++k) {
        if (path.fits[k].l1_norm < cv.l1_norm) continue;
        if (check(path.fits[k])) {
            out.criterion_met = true;
            return out;
        }
    }

    const double norm_cap = options.max_norm_factor * std::max(cv.l1_norm, 1e-12);
    const double floor = solver.lambda_max() * 1e-6;
    HalFit prev = path.fits.back();
    double lambda = prev.lambda;
    for (int e = 0; e < options.max_extensions; ++e) {
        lambda *= 0.5;
        if (lambda < floor) break;
        HalFit f = solver.solve(lambda, &prev);
        if (f.l1_norm > norm_cap) break;
        ++out.extensions;
        if (f.l1_norm >= cv.l1_norm && check(f)) {
            out.criterion_met = true;
            return out;
        }
        prev = std::move(f);
    }
    return out;
}

UndersmoothResult global_undersmooth_select(LassoSolver& solver, const LassoPath& path,
                                            std::size_t cv_index,
                                            const std::vector<ScoreCriterion>& family,
                                            double sigma_n, const UndersmoothOptions& options) {
    if (family.empty()) {
        if (cv_index >= path.fits.size())
            throw ConfigError("undersmoothing: cv index outside the path");
        UndersmoothResult out;
        out.fit = path.fits[cv_index];
        out.vacuous = true;
        out.criterion_met = true;
        out.threshold = undersmooth_threshold(sigma_n, solver.weights().size(),
                                              options.threshold_constant);
        return out;
    }
    ScoreCriterion sup = [&family](const HalFit& f) {
        double m = 0.0;
        for (const auto& c : family) m = std::max(m, std::abs(c(f)));
        return m;
    };
    return undersmooth_select(solver, path, cv_index, sup, sigma_n, options);
}

} // namespace hal
