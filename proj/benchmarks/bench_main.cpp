#include <hal/basis.hpp>
#include <hal/bootstrap.hpp>
#include <hal/estimands.hpp>
#include <hal/lasso.hpp>
#include <hal/sim.hpp>

#include <benchmark/benchmark.h>

using namespace hal;

namespace {

BasisSpec quantile_spec(int q) {
    BasisSpec spec;
    spec.max_degree = 2;
    spec.knots = KnotStrategy::quantiles;
    spec.quantile_count = q;
    return spec;
}

void BM_EnumerateBasis(benchmark::State& state) {
    const Dataset d = find_dgp("A").sample(state.range(0), 1);
    BasisSpec spec;
    spec.max_degree = 2;
    for (auto _ : state) benchmark::DoNotOptimize(enumerate_basis(d, spec));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EnumerateBasis)->RangeMultiplier(2)->Range(125, 1000)->Unit(benchmark::kMillisecond);

void BM_LassoPath(benchmark::State& state) {
    const Dataset d = find_dgp("A").sample(state.range(0), 2);
    const BasisCatalog c = enumerate_basis(d, quantile_spec(static_cast<int>(state.range(1))));
    for (auto _ : state) benchmark::DoNotOptimize(fit_path(c, d.outcome(), LossFamily::binomial, 20));
    state.counters["columns"] = static_cast<double>(c.size());
}
BENCHMARK(BM_LassoPath)->Args({500, 10})->Args({500, 40})->Args({2000, 10})->Unit(benchmark::kMillisecond);

void BM_TmleUpdate(benchmark::State& state) {
    const Dgp dgp = find_dgp("A");
    const Dataset d = dgp.sample(state.range(0), 3);
    const Index n = d.rows();
    Eigen::VectorXd q1(n), q0(n), qo(n), g(n);
    for (Index i = 0; i < n; ++i) {
        const double w[2] = {d.covariates()(i, 0), d.covariates()(i, 1)};
        // Deliberately biased initial fit so the update has work to do.
        q1(i) = std::clamp(dgp.qbar0(1.0, w) - 0.1, 0.01, 0.99);
        q0(i) = dgp.qbar0(0.0, w);
        qo(i) = d.treatment()(i) == 1.0 ? q1(i) : q0(i);
        g(i) = dgp.gbar0(w);
    }
    const OutcomeModel q = outcome_from_predictions(d, qo, q1, q0);
    const PropensityModel gm = make_propensity(g);
    for (auto _ : state) benchmark::DoNotOptimize(tmle_update_tsm(q, gm, d));
}
BENCHMARK(BM_TmleUpdate)->Arg(500)->Arg(5000)->Unit(benchmark::kMicrosecond);

void BM_BootstrapRefits(benchmark::State& state) {
    const Dataset d = find_dgp("A").sample(500, 4);
    const BasisCatalog c = enumerate_basis(d, quantile_spec(10));
    const LassoPath path = fit_path(c, d.outcome(), LossFamily::binomial, 20);
    const HalFit& fit = path.fits[10];
    const PluginFeature mean = [&c](const HalFit& f, const Eigen::VectorXd& w) {
        const Eigen::VectorXd eta = (c.design * f.beta).array() + f.intercept;
        double s = 0.0;
        for (Index i = 0; i < eta.size(); ++i) s += w(i) * expit(eta(i));
        return s;
    };
    BootstrapOptions opts;
    opts.B = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(bootstrap_plugin(c, fit, d.outcome(), mean, opts));
}
BENCHMARK(BM_BootstrapRefits)->Arg(50)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
