#include "support.hpp"

#include <hal/basis.hpp>

#include <doctest.h>

#include <random>
#include <set>

using namespace hal;

namespace {

Eigen::MatrixXd uniform_matrix(Index n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd x(n, d);
    for (Index i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) x(i, k) = u(rng);
    return x;
}

} // namespace

TEST_SUITE("hal_basis") {

TEST_CASE("three distinct rows in two dimensions give nine candidate columns") {
    Eigen::MatrixXd x(3, 2);
    x << 0.1, 0.7, 0.4, 0.2, 0.9, 0.5;
    BasisSpec spec;
    spec.max_degree = 2;
    const BasisCatalog c = enumerate_basis(x, spec);
    CHECK(c.pre_dedup_count == 9);
    CHECK(candidate_count(3, 2, spec) == 9);
}

TEST_CASE("quantile knots: 5 per coordinate, d = 3, two-way products") {
    const Eigen::MatrixXd x = uniform_matrix(200, 3, 1);
    BasisSpec spec;
    spec.max_degree = 2;
    spec.knots = KnotStrategy::quantiles;
    spec.quantile_count = 5;
    CHECK(candidate_count(200, 3, spec) == 5 * 3 + 25 * 3);
    CHECK(enumerate_basis(x, spec).pre_dedup_count == 90);
}

TEST_CASE("property: all-observation candidates number n(2^d - 1)") {
    for (int d = 1; d <= 4; ++d) {
        const Index n = 7;
        const Eigen::MatrixXd x = uniform_matrix(n, d, static_cast<std::uint64_t>(d));
        BasisSpec spec;
        spec.max_degree = d;
        CHECK(enumerate_basis(x, spec).pre_dedup_count == static_cast<std::size_t>(n * ((1 << d) - 1)));
    }
}

TEST_CASE("a constant covariate collapses its main-effect columns") {
    Eigen::MatrixXd x = uniform_matrix(30, 2, 4);
    x.col(0).setConstant(0.5);
    BasisSpec spec;
    spec.max_degree = 1;
    const BasisCatalog c = enumerate_basis(x, spec);
    int main_effects_of_first = 0;
    for (const auto& f : c.functions)
        if (f.subset == std::vector<int>{0}) ++main_effects_of_first;
    CHECK(main_effects_of_first <= 1);
}

TEST_CASE("evaluate_basis: boundary, below-knot and hinge cases") {
    const BasisFunction both{{0, 1}, {0.5, 0.5}, 0};
    const std::vector<double> on_knot{0.5, 0.7}, below{0.4, 0.9};
    CHECK(evaluate_basis(both, on_knot) == 1.0);
    CHECK(evaluate_basis(both, below) == 0.0);
    const BasisFunction hinge{{0}, {0.25}, 1};
    const std::vector<double> x{0.75, 0.1};
    CHECK(evaluate_basis(hinge, x) == doctest::Approx(0.5));
}

TEST_CASE("property: order-0 evaluation is 0/1 and monotone in each coordinate") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        const BasisFunction f{{0, 2}, {u(rng), u(rng)}, static_cast<int>(t % 2)};
        std::vector<double> x{u(rng), u(rng), u(rng)};
        const double v = evaluate_basis(f, x);
        if (f.order == 0) CHECK((v == 0.0 || v == 1.0));
        const int k = static_cast<int>(t % 3);
        x[static_cast<std::size_t>(k)] += 0.1;
        CHECK(evaluate_basis(f, x) >= v);
    }
}

TEST_CASE("property: the design equals pointwise evaluation and has no duplicate columns") {
    for (int order = 0; order <= 1; ++order) {
        const Eigen::MatrixXd x = uniform_matrix(25, 3, 10 + static_cast<std::uint64_t>(order));
        BasisSpec spec;
        spec.max_degree = 3;
        spec.spline_order = order;
        const BasisCatalog c = enumerate_basis(x, spec);
        const Eigen::MatrixXd dense = Eigen::MatrixXd(c.design);
        for (Index j = 0; j < c.size(); ++j)
            for (Index i = 0; i < x.rows(); ++i) {
                const Eigen::VectorXd row = x.row(i).transpose();
                const double v = evaluate_basis(c.functions[static_cast<std::size_t>(j)],
                                                std::span<const double>(row.data(), 3));
                CHECK(dense(i, j) == v);
            }
        if (order == 0)
            for (int k = 0; k < c.design.outerSize(); ++k)
                for (SparseColumns::InnerIterator it(c.design, k); it; ++it) CHECK(it.value() == 1.0);
        std::set<std::vector<double>> distinct;
        for (Index j = 0; j < c.size(); ++j) {
            const Eigen::VectorXd col = dense.col(j);
            distinct.insert(std::vector<double>(col.data(), col.data() + col.size()));
        }
        CHECK(distinct.size() == static_cast<std::size_t>(c.size()));
    }
}

TEST_CASE("every training point activates its own knot") {
    const Eigen::MatrixXd x = uniform_matrix(12, 2, 2);
    BasisSpec spec;
    spec.max_degree = 2;
    const BasisCatalog c = enumerate_basis(x, spec);
    for (std::size_t j = 0; j < c.functions.size(); ++j)
        for (Index row : c.provenance[j]) {
            const Eigen::VectorXd xi = x.row(row).transpose();
            CHECK(evaluate_basis(c.functions[j], std::span<const double>(xi.data(), 2)) == 1.0);
        }
}

TEST_CASE("predict: zero coefficients, a single step, and a direct-sum oracle") {
    const Eigen::MatrixXd x = uniform_matrix(15, 2, 3);
    BasisSpec spec;
    spec.max_degree = 2;
    const BasisCatalog c = enumerate_basis(x, spec);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(c.size() + 1);
    coef(0) = 0.7;
    const Eigen::MatrixXd xnew = uniform_matrix(9, 2, 4);
    CHECK((predict(c, coef, xnew).array() == 0.7).all());

    BasisCatalog one;
    one.dimension = 1;
    one.functions = {BasisFunction{{0}, {0.5}, 0}};
    Eigen::MatrixXd pts(2, 1);
    pts << 0.2, 0.8;
    one.design = evaluate_design(one, pts);
    Eigen::VectorXd b(2);
    b << 0.0, 2.0;
    const Eigen::VectorXd step = predict(one, b, pts);
    CHECK(step(0) == 0.0);
    CHECK(step(1) == 2.0);

    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0.0, 1.0);
    for (Index j = 0; j <= c.size(); ++j) coef(j) = z(rng);
    const Eigen::VectorXd got = predict(c, coef, xnew);
    for (Index i = 0; i < xnew.rows(); ++i) {
        double direct = coef(0);
        for (std::size_t j = 0; j < c.functions.size(); ++j) {
            const auto& f = c.functions[j];
            double v = 1.0;
            for (std::size_t k = 0; k < f.subset.size(); ++k)
                v *= f.knot[k] <= xnew(i, f.subset[k]) ? 1.0 : 0.0;
            direct += coef(static_cast<Index>(j) + 1) * v;
        }
        CHECK(std::abs(got(i) - direct) <= 1e-12);
    }
    CHECK_THROWS_AS(predict(c, Eigen::VectorXd::Zero(3), xnew), ConfigError);
}

TEST_CASE("property: predict is linear in the coefficients") {
    const Eigen::MatrixXd x = uniform_matrix(20, 2, 6);
    BasisSpec spec;
    spec.max_degree = 2;
    spec.spline_order = 1;
    const BasisCatalog c = enumerate_basis(x, spec);
    const Eigen::VectorXd b1 = Eigen::VectorXd::Random(c.size() + 1), b2 = Eigen::VectorXd::Random(c.size() + 1);
    const Eigen::MatrixXd xnew = uniform_matrix(10, 2, 7);
    const Eigen::VectorXd lhs = predict(c, b1 + b2, xnew);
    const Eigen::VectorXd rhs = predict(c, b1, xnew) + predict(c, b2, xnew);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("sectional variation norm") {
    CHECK(sectional_variation_norm(Eigen::VectorXd::Zero(5)) == 0.0);
    Eigen::VectorXd b(3);
    b << 1, -2, 3;
    CHECK(sectional_variation_norm(b) == 6.0);
    Eigen::VectorXd perm(3);
    perm << 3, 1, -2;
    CHECK(sectional_variation_norm(perm) == sectional_variation_norm(b));
}

TEST_CASE("rank_by_sparsity keeps the densest columns with stable ties") {
    BasisCatalog c;
    c.dimension = 1;
    c.functions = {BasisFunction{{0}, {0.1}, 0}, BasisFunction{{0}, {0.5}, 0}, BasisFunction{{0}, {0.9}, 0}};
    Eigen::MatrixXd x(10, 1);
    for (Index i = 0; i < 10; ++i) x(i, 0) = (static_cast<double>(i) + 0.5) / 10.0;
    c.design = evaluate_design(c, x);
    c.provenance.assign(3, {});
    c.signs.assign(3, SignConstraint::none);
    const auto frac = c.support_fraction();
    CHECK(frac[0] == doctest::Approx(0.9));
    CHECK(frac[1] == doctest::Approx(0.5));
    CHECK(frac[2] == doctest::Approx(0.1));
    const BasisCatalog top = rank_by_sparsity(c, 2);
    REQUIRE(top.size() == 2);
    CHECK(top.functions[0].knot[0] == 0.1);
    CHECK(top.functions[1].knot[0] == 0.5);
    CHECK(rank_by_sparsity(c, 3).size() == 3);

    BasisCatalog tied = c;
    tied.functions = {BasisFunction{{0}, {0.5}, 0}, BasisFunction{{0}, {0.52}, 0}, BasisFunction{{0}, {0.9}, 0}};
    tied.design = evaluate_design(tied, x);
    const BasisCatalog kept = rank_by_sparsity(tied, 1);
    CHECK(kept.functions[0].knot[0] == 0.5);
}

TEST_CASE("memory budget stops enumeration before it starts") {
    const Eigen::MatrixXd x = uniform_matrix(50, 4, 1);
    BasisSpec spec;
    spec.max_degree = 4;
    spec.memory_budget_entries = 1000.0;
    CHECK_THROWS_AS(enumerate_basis(x, spec), BudgetError);
}

TEST_CASE("spec validation") {
    BasisSpec spec;
    spec.max_degree = 3;
    CHECK_THROWS_AS(spec.validate(2), ConfigError);
    spec.max_degree = 1;
    spec.knots = KnotStrategy::quantiles;
    spec.quantile_count = 1;
    CHECK_THROWS_AS(spec.validate(2), ConfigError);
}

TEST_CASE("max_basis caps the catalog") {
    const Eigen::MatrixXd x = uniform_matrix(40, 2, 3);
    BasisSpec spec;
    spec.max_degree = 2;
    spec.max_basis = 10;
    CHECK(enumerate_basis(x, spec).size() == 10);
}

TEST_CASE("additive groups restrict the subsets") {
    const Eigen::MatrixXd x = uniform_matrix(20, 3, 9);
    BasisSpec spec;
    spec.max_degree = 2;
    spec.additive_groups = {{0, 1}, {2}};
    for (const auto& f : enumerate_basis(x, spec).functions)
        CHECK((f.subset == std::vector<int>{0} || f.subset == std::vector<int>{1} ||
               f.subset == std::vector<int>{2} || f.subset == std::vector<int>{0, 1}));
}

} // TEST_SUITE
