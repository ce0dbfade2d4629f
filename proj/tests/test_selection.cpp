#include "support.hpp"

#include <hal/estimands.hpp>
#include <hal/selection.hpp>

#include <doctest.h>

#include <memory>
#include <random>

using namespace hal;

namespace {

BasisSpec quantile_spec(int degree, int knots) {
    BasisSpec s;
    s.max_degree = degree;
    s.knots = KnotStrategy::quantiles;
    s.quantile_count = knots;
    return s;
}

// Covariates uniform on [0,1]^d; outcome = f(w) + noise_sd * N(0,1).
Dataset regression_data(Index n, int d, const std::function<double(const Eigen::VectorXd&)>& f,
                        double noise_sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd w(n, d);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) w(i, k) = u(rng);
        y(i) = f(w.row(i).transpose()) + noise_sd * z(rng);
    }
    return Dataset(w, std::nullopt, y, OutcomeKind::continuous);
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<Index>& rows) {
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
    return out;
}

} // namespace

TEST_SUITE("selection") {

TEST_CASE("select_candidate: minimum, then smaller norm, then lower index") {
    CHECK(select_candidate({0.5, 0.3, 0.4}, {1, 2, 3}) == 1);
    CHECK(select_candidate({0.3, 0.3, 0.4}, {2, 1, 3}) == 1);
    CHECK(select_candidate({0.3, 0.3, 0.3}, {1, 1, 1}) == 0);
    CHECK_THROWS_AS(select_candidate({}, {}), ConfigError);
}

TEST_CASE("cv report: shared grid, selection by recomputation, refit on full data") {
    const Dataset d = regression_data(120, 2, [](const Eigen::VectorXd& w) { return w(0) > 0.5 ? 1.0 : 0.0; }, 0.5, 1);
    const FoldPlan folds = make_folds(d.rows(), 5, 2);
    CvOptions opts;
    opts.grid_size = 12;
    const CvFit cv = cv_select_lambda(d, quantile_spec(2, 8), LossFamily::gaussian, folds, opts);
    const CvReport& r = cv.selection.report;
    REQUIRE(r.mean_risk.size() == 12);
    CHECK(r.fold_risks.front().size() == 5);
    std::size_t best = 0;
    for (std::size_t c = 0; c < r.mean_risk.size(); ++c) {
        double m = 0.0;
        for (double v : r.fold_risks[c]) m += v / 5.0;
        CHECK(std::abs(m - r.mean_risk[c]) <= 1e-12);
        if (r.mean_risk[c] < r.mean_risk[best]) best = c;
    }
    CHECK(r.selected == best);
    CHECK(cv.selection.fit.lambda == cv.selection.path.lambda_grid[r.selected]);
    LassoSolver full(cv.catalog.design, d.outcome(), LossFamily::gaussian);
    CHECK(cv.selection.path.lambda_grid.front() == doctest::Approx(full.lambda_max()).epsilon(1e-12));
}

TEST_CASE("property: fold risks use held-out rows only") {
    // Poison the outcomes of fold 1. Its risks must equal the held-out loss of
    // fits trained on the other rows alone (an independent subset fit).
    Dataset d = regression_data(90, 2, [](const Eigen::VectorXd& w) { return w(0) + w(1); }, 0.3, 3);
    const FoldPlan folds = make_folds(d.rows(), 3, 4);
    Eigen::VectorXd y = d.outcome();
    for (Index i : folds.validation_rows(1)) y(i) = 50.0;
    // Main effects only, so no two columns coincide on the training rows.
    const BasisCatalog catalog = enumerate_basis(d, quantile_spec(1, 6));
    CvOptions opts;
    opts.grid_size = 8;
    const CvSelection sel = cv_select_lambda(catalog, y, LossFamily::gaussian, folds, opts);

    const auto train = folds.training_rows(1), held = folds.validation_rows(1);
    const SparseColumns sub = Eigen::MatrixXd(rows_of(Eigen::MatrixXd(catalog.design), train)).sparseView();
    Eigen::VectorXd ysub(static_cast<Index>(train.size()));
    for (std::size_t k = 0; k < train.size(); ++k) ysub(static_cast<Index>(k)) = y(train[k]);
    LassoSolver solver(sub, ysub, LossFamily::gaussian);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(catalog.design);
    for (std::size_t c = 0; c < sel.path.lambda_grid.size(); ++c) {
        const HalFit f = solver.solve(sel.path.lambda_grid[c]);
        double risk = 0.0;
        for (Index i : held) {
            const double eta = f.intercept + dense.row(i).dot(f.beta);
            risk += (y(i) - eta) * (y(i) - eta);
        }
        risk /= static_cast<double>(held.size());
        INFO("c = " << c << " lambda = " << sel.path.lambda_grid[c]);
        CHECK(std::abs(risk - sel.report.fold_risks[c][0]) <= 1e-6 * std::max(1.0, risk));
    }
}

TEST_CASE("leave-one-out on twelve rows selects a grid member") {
    const Dataset d = regression_data(12, 1, [](const Eigen::VectorXd& w) { return w(0); }, 0.2, 5);
    const FoldPlan folds = make_folds(12, 12, 6);
    const CvFit cv = cv_select_lambda(d, BasisSpec{}, LossFamily::gaussian, folds);
    CHECK(cv.selection.report.selected < cv.selection.path.lambda_grid.size());
}

TEST_CASE("step-function truth: selected fit beats the null model by half") {
    const Dataset d = regression_data(200, 2, [](const Eigen::VectorXd& w) { return w(0) >= 0.5 ? 1.0 : 0.0; }, 0.2, 7);
    const CvFit cv = cv_select_lambda(d, quantile_spec(2, 10), LossFamily::gaussian, make_folds(200, 5, 8));
    const double null_mse = (d.outcome().array() - d.outcome().mean()).square().mean();
    CHECK(cv.selection.fit.train_risk <= 0.5 * null_mse);
}

TEST_CASE("single-spec ladder equals cv_select_lambda") {
    const Dataset d = regression_data(80, 2, [](const Eigen::VectorXd& w) { return w(0); }, 0.3, 9);
    const FoldPlan folds = make_folds(80, 4, 10);
    HalSpecLadder ladder;
    ladder.specs = {quantile_spec(1, 6)};
    const SuperLearnerResult sl = discrete_super_learner(d, ladder, LossFamily::gaussian, folds);
    const CvFit cv = cv_select_lambda(d, quantile_spec(1, 6), LossFamily::gaussian, folds);
    CHECK(sl.evaluated == 1);
    CHECK(sl.best.selection.fit.lambda == cv.selection.fit.lambda);
    CHECK((sl.best.selection.fit.beta - cv.selection.fit.beta).norm() == 0.0);
}

TEST_CASE("ladder must strictly increase in complexity") {
    HalSpecLadder ladder;
    ladder.specs = {quantile_spec(2, 5), quantile_spec(1, 5)};
    CHECK_THROWS_AS(ladder.validate(), ConfigError);
    ladder.specs = {quantile_spec(1, 5), quantile_spec(1, 5)};
    CHECK_THROWS_AS(ladder.validate(), ConfigError);
    ladder.specs = {quantile_spec(1, 5), quantile_spec(1, 10), quantile_spec(2, 5)};
    CHECK_NOTHROW(ladder.validate());
    ladder.specs.clear();
    CHECK_THROWS_AS(ladder.validate(), ConfigError);
}

TEST_CASE("undersmoothing: short-circuit, vacuous threshold, never below the cv norm") {
    const Dataset d = regression_data(100, 2, [](const Eigen::VectorXd& w) { return w(0) * w(1); }, 0.3, 11);
    const BasisCatalog c = enumerate_basis(d, quantile_spec(2, 8));
    const CvSelection cv = cv_select_lambda(c, d.outcome(), LossFamily::gaussian, make_folds(100, 5, 12));
    LassoSolver solver(c.design, d.outcome(), LossFamily::gaussian);

    const auto met = undersmooth_select(solver, cv.path, cv.selected_index, [](const HalFit&) { return 0.0; }, 1.0);
    CHECK(met.criterion_met);
    CHECK(met.fit.lambda == cv.fit.lambda);

    const auto vacuous = undersmooth_select(solver, cv.path, cv.selected_index, [](const HalFit&) { return 1e9; },
                                            std::numeric_limits<double>::infinity());
    CHECK(vacuous.fit.lambda == cv.fit.lambda);

    // Criterion met only at small lambda: the chosen fit is past the cv fit.
    const double target = cv.fit.lambda / 8.0;
    const auto later = undersmooth_select(
        solver, cv.path, cv.selected_index, [&](const HalFit& f) { return f.lambda <= target ? 0.0 : 1.0; }, 1.0);
    CHECK(later.criterion_met);
    CHECK(later.fit.lambda <= target);
    CHECK(later.fit.slope_l1_norm >= cv.fit.slope_l1_norm);

    const auto never = undersmooth_select(solver, cv.path, cv.selected_index, [](const HalFit&) { return 1.0; }, 1.0);
    CHECK_FALSE(never.criterion_met);
    CHECK(never.fit.slope_l1_norm >= cv.fit.slope_l1_norm);
    for (const auto& [norm, value] : never.trace) CHECK(norm >= cv.fit.l1_norm - 1e-12);
}

TEST_CASE("undersmoothing the plug-in on DGP-A-like data solves the efficient score") {
    const Dataset d = testing::random_dataset(500, 2, true, true, 13);
    auto catalog = std::make_shared<const BasisCatalog>(enumerate_basis(d, quantile_spec(2, 10)));
    const CvSelection cv = cv_select_lambda(*catalog, d.outcome(), LossFamily::binomial, make_folds(500, 5, 14));
    Eigen::VectorXd graw(500);
    for (Index i = 0; i < 500; ++i) graw(i) = expit(0.3 * d.covariates()(i, 0) - 0.2);
    const PropensityModel g = make_propensity(graw);
    auto pn_dstar = [&](const HalFit& f) {
        return std::abs(plugin_tsm(make_outcome_model(d, catalog, f), g, d).pn_dstar);
    };
    const TargetReport at_cv = plugin_tsm(make_outcome_model(d, catalog, cv.fit), g, d);
    const double sigma = at_cv.se * std::sqrt(500.0);
    LassoSolver solver(catalog->design, d.outcome(), LossFamily::binomial);
    const UndersmoothResult us = undersmooth_select(solver, cv.path, cv.selected_index, pn_dstar, sigma);
    CHECK(us.criterion_met);
    CHECK(pn_dstar(us.fit) <= undersmooth_threshold(sigma, 500));
    CHECK(us.threshold == doctest::Approx(sigma / (std::sqrt(500.0) * std::log(500.0))));
}

TEST_CASE("global undersmoothing: singleton, kernel features, empty family") {
    const Dataset d = regression_data(300, 1, [](const Eigen::VectorXd& w) { return std::sin(6.0 * w(0)); }, 0.3, 15);
    const BasisCatalog c = enumerate_basis(d, BasisSpec{});
    const CvSelection cv = cv_select_lambda(c, d.outcome(), LossFamily::gaussian, make_folds(300, 5, 16));
    LassoSolver solver(c.design, d.outcome(), LossFamily::gaussian);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(c.design);
    const Eigen::VectorXd& y = d.outcome();

    // Kernel-smoothed point features E[K_h(W - t) Qbar(W)]; the score of the
    // fit for feature t is P_n K_h(W - t)(Y - Qbar_n(W)).
    const double bw = 0.1;
    std::vector<ScoreCriterion> family;
    std::vector<Eigen::VectorXd> kernels;
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        Eigen::VectorXd k(d.rows());
        for (Index i = 0; i < d.rows(); ++i) {
            const double u = (d.covariates()(i, 0) - t) / bw;
            k(i) = std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) / bw : 0.0;
        }
        kernels.push_back(k);
    }
    for (const auto& k : kernels)
        family.push_back([&, k](const HalFit& f) {
            const Eigen::VectorXd resid = y - ((dense * f.beta).array() + f.intercept).matrix();
            return std::abs(k.dot(resid) / static_cast<double>(y.size()));
        });
    double sigma = 0.0;
    for (const auto& k : kernels) {
        const Eigen::VectorXd resid = y - ((dense * cv.fit.beta).array() + cv.fit.intercept).matrix();
        const Eigen::ArrayXd ic = k.array() * resid.array();
        sigma = std::max(sigma, std::sqrt((ic - ic.mean()).square().mean()));
    }

    const auto single = global_undersmooth_select(solver, cv.path, cv.selected_index, {family[2]}, sigma);
    const auto direct = undersmooth_select(solver, cv.path, cv.selected_index, family[2], sigma);
    CHECK(single.fit.lambda == direct.fit.lambda);

    const auto all = global_undersmooth_select(solver, cv.path, cv.selected_index, family, sigma);
    CHECK(all.criterion_met);
    for (const auto& crit : family) CHECK(crit(all.fit) <= all.threshold);

    const auto empty = global_undersmooth_select(solver, cv.path, cv.selected_index, {}, sigma);
    CHECK(empty.vacuous);
    CHECK(empty.fit.lambda == cv.fit.lambda);
}

} // TEST_SUITE

TEST_SUITE("monte_carlo") {

TEST_CASE("pure noise selects a near-null model in at least 90% of 50 replicates") {
    int near_null = 0;
    for (std::uint64_t r = 0; r < 50; ++r) {
        const Dataset d = regression_data(100, 2, [](const Eigen::VectorXd&) { return 0.0; }, 1.0, mix_seed(100, r));
        const CvFit cv = cv_select_lambda(d, quantile_spec(2, 8), LossFamily::gaussian, make_folds(100, 5, mix_seed(101, r)));
        // The first quarter of the 20-point grid: lambda >= 0.3 lambda_max.
        if (cv.selection.report.selected <= 4) ++near_null;
    }
    CHECK(near_null >= 45);
}

TEST_CASE("super learner picks degree 1 for additive and degree 2 for interaction truths") {
    HalSpecLadder ladder;
    ladder.specs = {quantile_spec(1, 10), quantile_spec(2, 10)};
    int additive_ok = 0, interaction_ok = 0;
    for (std::uint64_t r = 0; r < 50; ++r) {
        const auto folds = make_folds(500, 5, mix_seed(201, r));
        const Dataset add = regression_data(500, 2, [](const Eigen::VectorXd& w) {
            return (w(0) >= 0.5 ? 1.0 : 0.0) + (w(1) >= 0.3 ? 0.5 : 0.0);
        }, 0.5, mix_seed(200, r));
        if (discrete_super_learner(add, ladder, LossFamily::gaussian, folds).report.selected == 0) ++additive_ok;
        const Dataset inter = regression_data(500, 2, [](const Eigen::VectorXd& w) {
            return w(0) >= 0.5 && w(1) >= 0.5 ? 1.0 : 0.0;
        }, 0.5, mix_seed(202, r));
        if (discrete_super_learner(inter, ladder, LossFamily::gaussian, folds).report.selected == 1) ++interaction_ok;
    }
    CHECK(additive_ok >= 40);
    CHECK(interaction_ok >= 40);
}

} // TEST_SUITE
