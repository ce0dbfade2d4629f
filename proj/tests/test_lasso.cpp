#include "support.hpp"

#include <hal/lasso.hpp>

#include <doctest.h>

#include <random>

using namespace hal;

namespace {

// Catalog wrapping an arbitrary dense design (columns need not be 0/1).
BasisCatalog dense_catalog(const Eigen::MatrixXd& x) {
    BasisCatalog c;
    c.dimension = 1;
    c.design = x.sparseView();
    c.functions.assign(static_cast<std::size_t>(x.cols()), BasisFunction{{0}, {0.0}, 0});
    c.provenance.assign(static_cast<std::size_t>(x.cols()), {});
    c.signs.assign(static_cast<std::size_t>(x.cols()), SignConstraint::none);
    c.pre_dedup_count = static_cast<std::size_t>(x.cols());
    return c;
}

Eigen::MatrixXd random_binary(Index n, Index p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    Eigen::MatrixXd x(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = coin(rng) ? 1.0 : 0.0;
    return x;
}

Eigen::VectorXd response(const Eigen::MatrixXd& x, LossFamily loss, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd y(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        const double m = 0.3 + x.row(i).head(std::min<Index>(3, x.cols())).sum() * 0.6 - 0.5;
        y(i) = loss == LossFamily::gaussian ? m + z(rng) : (u(rng) < expit(m) ? 1.0 : 0.0);
    }
    return y;
}

double objective_of(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, LossFamily loss, const HalFit& f) {
    return testing::oracle_objective(x, y, loss, f.lambda, f.intercept, f.beta);
}

} // namespace

TEST_SUITE("lasso_solver") {

TEST_CASE("single centered column matches the soft-threshold formula") {
    // Loss (y - eta)^2 carries no 1/2, so the threshold is lambda / 2.
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    const Index n = 40;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = z(rng);
        y(i) = 0.8 * x(i, 0) + z(rng);
    }
    x.array() -= x.mean();
    for (double lambda : {0.0, 0.1, 0.5, 1.0}) {
        const HalFit f = fit_lasso(dense_catalog(x), y, LossFamily::gaussian, lambda);
        const double c = (x.col(0).array() * (y.array() - y.mean())).mean();
        const double a = x.col(0).squaredNorm() / static_cast<double>(n);
        const double t = lambda / 2.0;
        const double expected = (c > t ? c - t : (c < -t ? c + t : 0.0)) / a;
        CHECK(std::abs(f.beta(0) - expected) <= 1e-8);
        CHECK(std::abs(f.intercept - y.mean()) <= 1e-8);
    }
}

TEST_CASE("lambda at or above lambda_max gives the null model") {
    std::mt19937_64 rng(2);
    for (LossFamily loss : {LossFamily::gaussian, LossFamily::binomial}) {
        const Eigen::MatrixXd x = random_binary(30, 6, rng);
        const Eigen::VectorXd y = response(x, loss, rng);
        const SparseColumns xs = x.sparseView();
        LassoSolver solver(xs, y, loss);
        for (double scale : {1.0, 2.0}) {
            const HalFit f = solver.solve(solver.lambda_max() * scale);
            CHECK(f.active_set.empty());
            const double expected = loss == LossFamily::gaussian ? y.mean() : logit(y.mean());
            CHECK(f.intercept == doctest::Approx(expected).epsilon(1e-10));
        }
        // lambda_max is the largest null-model score.
        const Eigen::VectorXd g = solver.gradient(solver.null_fit().intercept, Eigen::VectorXd::Zero(6));
        CHECK(solver.lambda_max() == doctest::Approx(g.tail(6).cwiseAbs().maxCoeff()).epsilon(1e-12));
    }
}

TEST_CASE("n = 15, p = 8 binary design matches the proximal-gradient oracle") {
    std::mt19937_64 rng(3);
    for (LossFamily loss : {LossFamily::gaussian, LossFamily::binomial}) {
        const Eigen::MatrixXd x = random_binary(15, 8, rng);
        const Eigen::VectorXd y = response(x, loss, rng);
        const SparseColumns xs = x.sparseView();
        LassoSolver solver(xs, y, loss);
        for (double frac : {0.5, 0.1, 0.02}) {
            const double lambda = frac * solver.lambda_max();
            const HalFit f = solver.solve(lambda);
            const auto oracle = testing::proximal_gradient_oracle(x, y, loss, lambda);
            CHECK(std::abs(objective_of(x, y, loss, f) - oracle.objective) <= 1e-6);
            CHECK(f.kkt_residual <= 1e-6);
        }
    }
}

TEST_CASE("property: fit fields are recomputable") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd x = random_binary(25, 10, rng);
    const Eigen::VectorXd y = response(x, LossFamily::binomial, rng);
    const SparseColumns xs = x.sparseView();
    LassoSolver solver(xs, y, LossFamily::binomial);
    const HalFit f = solver.solve(0.05 * solver.lambda_max());
    CHECK(f.l1_norm == doctest::Approx(std::abs(f.intercept) + f.beta.lpNorm<1>()).epsilon(1e-14));
    CHECK(f.slope_l1_norm == doctest::Approx(f.beta.lpNorm<1>()).epsilon(1e-14));
    const double risk = testing::oracle_objective(x, y, LossFamily::binomial, 0.0, f.intercept, f.beta);
    CHECK(std::abs(f.train_risk - risk) <= 1e-10);
    for (Index j = 0; j < f.beta.size(); ++j) {
        const bool listed = std::find(f.active_set.begin(), f.active_set.end(), j) != f.active_set.end();
        CHECK(listed == (f.beta(j) != 0.0));
    }
}

TEST_CASE("path: null start, monotone norm, nonincreasing risk, KKT everywhere") {
    const Dataset d = testing::random_dataset(120, 2, false, false, 5);
    BasisSpec spec;
    spec.max_degree = 2;
    const BasisCatalog c = enumerate_basis(d, spec);
    for (LossFamily loss : {LossFamily::gaussian, LossFamily::binomial}) {
        const Eigen::VectorXd y = loss == LossFamily::gaussian
                                      ? d.outcome()
                                      : Eigen::VectorXd((d.outcome().array() > d.outcome().mean()).cast<double>());
        const LassoPath path = fit_path(c, y, loss, 15);
        REQUIRE(path.fits.size() == 15);
        CHECK(path.fits.front().active_set.empty());
        for (std::size_t k = 1; k < path.fits.size(); ++k) {
            CHECK(path.lambda_grid[k] < path.lambda_grid[k - 1]);
            CHECK(path.fits[k].slope_l1_norm >= path.fits[k - 1].slope_l1_norm - 1e-9);
            CHECK(path.fits[k].train_risk <= path.fits[k - 1].train_risk + 1e-12);
        }
        for (const auto& f : path.fits) CHECK(f.kkt_residual <= 1e-6);
    }
}

TEST_CASE("coordinate sweeps never increase the objective") {
    const Dataset d = testing::random_dataset(80, 2, false, true, 6);
    BasisSpec spec;
    spec.max_degree = 2;
    const BasisCatalog c = enumerate_basis(d, spec);
    FitOptions fo;
    fo.solver.check_monotone = true;
    for (LossFamily loss : {LossFamily::gaussian, LossFamily::binomial}) {
        PathOptions po;
        po.fit = fo;
        CHECK_NOTHROW(fit_path(c, d.outcome(), loss, 10, po));
    }
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z(0.0, 0.3);
    for (LossFamily loss : {LossFamily::gaussian, LossFamily::binomial}) {
        const Eigen::MatrixXd x = random_binary(20, 5, rng);
        const Eigen::VectorXd y = response(x, loss, rng);
        const SparseColumns xs = x.sparseView();
        LassoSolver solver(xs, y, loss);
        Eigen::VectorXd beta(5);
        for (Index j = 0; j < 5; ++j) beta(j) = z(rng);
        const double b0 = 0.2;
        const Eigen::VectorXd g = solver.gradient(b0, beta);
        const double h = 1e-6;
        const double d0 = (solver.risk(b0 + h, beta) - solver.risk(b0 - h, beta)) / (2 * h);
        CHECK(std::abs(d0 - g(0)) <= 1e-6 * std::max(1.0, std::abs(g(0))));
        for (Index j = 0; j < 5; ++j) {
            Eigen::VectorXd up = beta, dn = beta;
            up(j) += h;
            dn(j) -= h;
            const double fd = (solver.risk(b0, up) - solver.risk(b0, dn)) / (2 * h);
            CHECK(std::abs(fd - g(j + 1)) <= 1e-6 * std::max(1.0, std::abs(g(j + 1))));
        }
    }
}

TEST_CASE("sign constraints are honored exactly and match the projected oracle") {
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd x = random_binary(25, 6, rng);
    Eigen::VectorXd y = response(x, LossFamily::gaussian, rng);
    y -= 1.5 * x.col(0);
    std::vector<SignConstraint> signs(6, SignConstraint::nonnegative);
    signs[5] = SignConstraint::nonpositive;
    FitOptions fo;
    fo.signs = signs;
    const SparseColumns xs = x.sparseView();
    LassoSolver solver(xs, y, LossFamily::gaussian, fo);
    const double lambda = 0.05 * solver.lambda_max();
    const HalFit f = solver.solve(lambda);
    for (Index j = 0; j < 5; ++j) CHECK(f.beta(j) >= 0.0);
    CHECK(f.beta(5) <= 0.0);
    CHECK(f.beta(0) == 0.0); // would be negative without the constraint
    const auto oracle = testing::proximal_gradient_oracle(x, y, LossFamily::gaussian, lambda, signs);
    CHECK(std::abs(objective_of(x, y, LossFamily::gaussian, f) - oracle.objective) <= 1e-6);
}

TEST_CASE("binomial loss rejects outcomes outside {0,1}") {
    Eigen::MatrixXd x(3, 1);
    x << 1, 0, 1;
    Eigen::VectorXd y(3);
    y << 0, 0.5, 1;
    const SparseColumns xs = x.sparseView();
    CHECK_THROWS_AS(LassoSolver(xs, y, LossFamily::binomial), DataError);
}

TEST_CASE("an exhausted sweep budget raises NumericError with the residual") {
    std::mt19937_64 rng(9);
    const Eigen::MatrixXd x = random_binary(40, 12, rng);
    const Eigen::VectorXd y = response(x, LossFamily::binomial, rng);
    FitOptions fo;
    fo.solver.max_sweeps = 1;
    fo.solver.tolerance = 1e-15;
    fo.solver.kkt_tolerance = 1e-15;
    const SparseColumns xs = x.sparseView();
    LassoSolver solver(xs, y, LossFamily::binomial, fo);
    try {
        solver.solve(1e-4 * solver.lambda_max());
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.residual() > 0.0);
    }
}

TEST_CASE("constrained fit: zero, infinite and path-matched bounds") {
    const Dataset d = testing::random_dataset(100, 2, false, false, 10);
    BasisSpec spec;
    spec.max_degree = 2;
    const BasisCatalog c = enumerate_basis(d, spec);
    const Eigen::VectorXd& y = d.outcome();

    const HalFit zero = constrained_fit(c, y, LossFamily::gaussian, 0.0);
    CHECK(zero.active_set.empty());

    const HalFit inf = constrained_fit(c, y, LossFamily::gaussian, std::numeric_limits<double>::infinity());
    CHECK(inf.bound_slack);

    const LassoPath path = fit_path(c, y, LossFamily::gaussian, 20);
    for (std::size_t k : {5u, 10u, 15u}) {
        const double bound = path.fits[k].slope_l1_norm;
        const HalFit f = constrained_fit(c, y, LossFamily::gaussian, bound);
        CHECK(std::abs(f.slope_l1_norm - bound) <= 0.005 * bound);
        CHECK(f.slope_l1_norm <= bound * 1.005);
    }
}

TEST_CASE("property: penalized and constrained forms agree at matched norms") {
    const Dataset d = testing::random_dataset(60, 2, false, true, 11);
    BasisSpec spec;
    spec.max_degree = 2;
    const BasisCatalog c = enumerate_basis(d, spec);
    const LassoPath path = fit_path(c, d.outcome(), LossFamily::binomial, 12);
    ConstrainedOptions co;
    co.relative_tolerance = 1e-9;
    for (std::size_t k = 2; k < path.fits.size(); k += 3) {
        const HalFit& pen = path.fits[k];
        const HalFit con = constrained_fit(c, d.outcome(), LossFamily::binomial, pen.slope_l1_norm, co);
        CHECK(std::abs(con.train_risk - pen.train_risk) <= 1e-6);
    }
}

} // TEST_SUITE
