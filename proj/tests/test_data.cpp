#include "support.hpp"

#include <hal/data.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace hal;

TEST_SUITE("tabular_data") {

TEST_CASE("three-row file parses with declared roles") {
    const auto path = testing::write_text("three.csv", "w1,w2,a,y\n0.1,0.2,1,0.5\n0.3,0.4,0,1.5\n0.5,0.6,1,2.5\n");
    const Dataset d = load_csv(path, parse_roles("W=w1,w2;A=a;Y=y"));
    CHECK(d.rows() == 3);
    CHECK(d.covariate_count() == 2);
    CHECK(d.has_treatment());
    CHECK(d.outcome()(2) == doctest::Approx(2.5));
    CHECK(d.covariates()(1, 0) == doctest::Approx(0.3));
    CHECK(d.column_names() == std::vector<std::string>{"w1", "w2", "a", "y"});
}

TEST_CASE("treatment outside {0,1} names the file row (header is row 1)") {
    const auto path = testing::write_text("bad_a.csv", "w1,a,y\n0.1,1,0\n0.2,2,1\n");
    try {
        load_csv(path, parse_roles("W=w1;A=a;Y=y"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 3") != std::string::npos);
    }
}

TEST_CASE("binary outcome outside {0,1} is rejected") {
    const auto path = testing::write_text("bad_y.csv", "w1,y\n0.1,1\n0.2,0.5\n");
    CHECK_THROWS_AS(load_csv(path, parse_roles("W=w1;Y=y;kind=binary")), DataError);
}

TEST_CASE("missing and unparseable cells are load errors") {
    const auto empty_cell = testing::write_text("missing.csv", "w1,y\n0.1,1\n,0\n");
    CHECK_THROWS_AS(load_csv(empty_cell, parse_roles("W=w1;Y=y")), DataError);
    const auto text_cell = testing::write_text("text.csv", "w1,y\n0.1,1\nabc,0\n");
    CHECK_THROWS_AS(load_csv(text_cell, parse_roles("W=w1;Y=y")), DataError);
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", parse_roles("W=w1;Y=y")), DataError);
}

TEST_CASE("file without a treatment role loads for pure regression") {
    const auto path = testing::write_text("noa.csv", "w1,y\n0.1,1\n0.2,0\n");
    const Dataset d = load_csv(path, parse_roles("W=w1;Y=y"));
    CHECK_FALSE(d.has_treatment());
    CHECK_THROWS_AS(d.treatment(), DataError);
}

TEST_CASE("roles must name an outcome and existing columns") {
    CHECK_THROWS_AS(parse_roles("W=w1;A=a"), ConfigError);
    const auto path = testing::write_text("cols.csv", "w1,y\n0.1,1\n");
    CHECK_THROWS_AS(load_csv(path, parse_roles("W=w9;Y=y")), DataError);
}

TEST_CASE("write then load round-trips to 15 significant digits") {
    Eigen::MatrixXd w(4, 2);
    w << 0.123456789012345, 1e-7, 3.0, -2.5, 1.0 / 3.0, 2.0 / 7.0, 1e10, 0.5;
    Eigen::VectorXd a(4), y(4);
    a << 1, 0, 1, 0;
    y << 0.1, 1.0 / 9.0, -3.25, 7.0;
    const Dataset d(w, a, y, OutcomeKind::continuous, {"w1", "w2"});
    const auto path = testing::temp_path("roundtrip.csv");
    write_csv(d, path);
    const Dataset back = load_csv(path, parse_roles("W=w1,w2;A=a;Y=y"));
    for (Index i = 0; i < 4; ++i) {
        for (Index j = 0; j < 2; ++j)
            CHECK(std::abs(back.covariates()(i, j) - w(i, j)) <= 1e-14 * std::max(1.0, std::abs(w(i, j))));
        CHECK(back.treatment()(i) == a(i));
        CHECK(std::abs(back.outcome()(i) - y(i)) <= 1e-14 * std::max(1.0, std::abs(y(i))));
    }
}

TEST_CASE("folds: exact division and balance") {
    const FoldPlan five = make_folds(10, 5, 3);
    CHECK(five.fold_sizes() == std::vector<Index>{2, 2, 2, 2, 2});
    const FoldPlan three = make_folds(10, 3, 3);
    auto sizes = three.fold_sizes();
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<Index>{3, 3, 4});
}

TEST_CASE("folds are deterministic given the seed") {
    CHECK(make_folds(100, 10, 7).assignment == make_folds(100, 10, 7).assignment);
    CHECK(make_folds(100, 10, 7).assignment != make_folds(100, 10, 8).assignment);
}

TEST_CASE("folds out of range") {
    CHECK_THROWS_AS(make_folds(10, 1, 1), ConfigError);
    CHECK_THROWS_AS(make_folds(10, 11, 1), ConfigError);
}

TEST_CASE("property: folds partition the rows and differ in size by at most one") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Index n = 2 + static_cast<Index>(mix_seed(seed, 0) % 200);
        const int v = 2 + static_cast<int>(mix_seed(seed, 1) % static_cast<std::uint64_t>(std::min<Index>(n - 1, 20)));
        const FoldPlan f = make_folds(n, v, seed);
        std::vector<int> seen(static_cast<std::size_t>(n), 0);
        for (int k = 1; k <= v; ++k) {
            const auto val = f.validation_rows(k);
            const auto train = f.training_rows(k);
            CHECK(val.size() + train.size() == static_cast<std::size_t>(n));
            CHECK_FALSE(val.empty());
            for (Index i : val) ++seen[static_cast<std::size_t>(i)];
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
        const auto sizes = f.fold_sizes();
        CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
    }
}

TEST_CASE("resample of one row repeats it") {
    Eigen::MatrixXd w(1, 1);
    w << 0.4;
    Eigen::VectorXd y(1);
    y << 2.0;
    const Dataset d(w, std::nullopt, y, OutcomeKind::continuous);
    const Dataset r = resample(d, 11);
    CHECK(r.rows() == 1);
    CHECK(r.outcome()(0) == 2.0);
}

TEST_CASE("resample is deterministic given the seed") {
    CHECK(resample_indices(5, 9) == resample_indices(5, 9));
}

TEST_CASE("resample multiplicities match multinomial moments") {
    // Each count is Binomial(4, 1/4): mean 1, variance 3/4.
    const int draws = 10000;
    std::vector<double> total(4, 0.0);
    for (int b = 0; b < draws; ++b)
        for (Index i : resample_indices(4, mix_seed(123, static_cast<std::uint64_t>(b)))) total[static_cast<std::size_t>(i)] += 1.0;
    const double se = std::sqrt(0.75 / draws);
    for (double t : total) CHECK(std::abs(t / draws - 1.0) <= 3.0 * se);
}

TEST_CASE("multiplicity weights sum to one") {
    const auto draws = resample_indices(50, 4);
    const Eigen::VectorXd w = multiplicity_weights(draws, 50);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(w.minCoeff() >= 0.0);
}

} // TEST_SUITE
