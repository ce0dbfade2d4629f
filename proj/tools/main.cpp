#include "commands.hpp"
#include "config.hpp"

#include <hal/common.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Flags {
    std::optional<std::string> config, data, roles, out_dir, method, knots, truncate, estimand, dgp, n_grid,
        q_model, g_model, g_ladder;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<int> B, V, max_degree, replicates;
    std::optional<long> n;
    std::optional<double> tol_const, knot_scale;
    bool undersmooth = false, plateau = false;
    std::vector<std::string> settings;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "INI config file; flags override its values");
    sub->add_option("--data", f.data, "CSV file with a header row");
    sub->add_option("--roles", f.roles, "Column roles, e.g. 'W=w1,w2;A=a;Y=y;kind=binary'");
    sub->add_option("--seed", f.seed, "Root random seed");
    sub->add_option("--threads", f.threads, "Worker threads (default: HALMLE_THREADS or all cores)");
    sub->add_option("--out-dir", f.out_dir, "Directory for reports");
    sub->add_option("--method", f.method, "plugin | ipw | tmle | tmle_preserving | ctmle | bootstrap");
    sub->add_option("--estimand", f.estimand, "tsm1 | tsm0 | ate");
    sub->add_option("--B", f.B, "Bootstrap replicates");
    sub->add_option("--V", f.V, "Cross-validation folds");
    sub->add_option("--max-degree", f.max_degree, "Largest interaction order of the basis");
    sub->add_option("--knots", f.knots, "all | quantiles:<q> | <q>");
    sub->add_option("--truncate", f.truncate, "Propensity bounds 'lo,hi' or 'lo'");
    sub->add_flag("--undersmooth", f.undersmooth, "Undersmooth the outcome fit for the target");
    sub->add_option("--tol-const", f.tol_const, "Multiplier of the TMLE tolerance (inf: no update)");
    sub->add_option("--q-model", f.q_model, "Outcome model: hal | intercept | arm_means");
    sub->add_option("--g-model", f.g_model, "Propensity model: hal | intercept");
    sub->add_option("--g-ladder", f.g_ladder, "ctmle candidates, e.g. '|w1,w2|w1,w2,w3'");
    sub->add_flag("--plateau", f.plateau, "Choose the bootstrap L1 norm by the CI-width plateau");
    sub->add_option("--dgp", f.dgp, "Simulation design: A | B | C | step | A-randomized | A-null | A-shift");
    sub->add_option("--n", f.n, "Simulation sample size");
    sub->add_option("--replicates", f.replicates, "Monte Carlo replicates");
    sub->add_option("--n-grid", f.n_grid, "Rate experiment sample sizes, e.g. '200,500,1250'");
    sub->add_option("--knot-scale", f.knot_scale, "Rate experiment: quantile knots ceil(c*sqrt(n))");
    sub->add_option("--set", f.settings, "Any config key, e.g. --set cv.grid_size=30");
}

void apply_flags(halcli::RunConfig& cfg, const Flags& f) {
    if (f.config) halcli::load_config_file(cfg, *f.config);
    for (const auto& s : f.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw hal::ConfigError("--set: expected key=value, got '" + s + "'");
        halcli::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (f.data) cfg.data = *f.data;
    if (f.roles) cfg.roles = *f.roles;
    if (f.seed) cfg.seed = *f.seed;
    if (f.threads) cfg.threads = *f.threads;
    if (f.out_dir) cfg.out_dir = *f.out_dir;
    if (f.method) cfg.method = *f.method;
    if (f.estimand) cfg.estimand = *f.estimand;
    if (f.B) cfg.B = *f.B;
    if (f.V) cfg.folds = *f.V;
    if (f.max_degree) cfg.max_degree = *f.max_degree;
    if (f.knots) halcli::set_knots(cfg, *f.knots);
    if (f.truncate) halcli::set_truncation(cfg, *f.truncate);
    if (f.undersmooth) cfg.undersmooth = true;
    if (f.tol_const) cfg.tol_constant = *f.tol_const;
    if (f.q_model) cfg.q_model = *f.q_model;
    if (f.g_model) cfg.g_model = *f.g_model;
    if (f.g_ladder) cfg.g_ladder = *f.g_ladder;
    if (f.plateau) cfg.plateau = true;
    if (f.dgp) cfg.dgp = *f.dgp;
    if (f.n) cfg.n = *f.n;
    if (f.replicates) cfg.replicates = *f.replicates;
    if (f.n_grid) cfg.n_grid = *f.n_grid;
    if (f.knot_scale) cfg.knot_scale = *f.knot_scale;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Highly adaptive lasso estimation and targeted inference"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"fit", "Cross-validated HAL fit of the outcome with score diagnostics"},
        {"cv", "Discrete super learner over interaction depths"},
        {"estimate", "Plug-in, IPW or targeted estimate of a treatment-specific mean or ATE"},
        {"bootstrap", "Model-fixed bootstrap of the plug-in estimate"},
        {"ctmle", "Collaborative TMLE over a propensity ladder"},
        {"simulate", "Monte Carlo study on a built-in design"},
        {"rate", "L2 convergence-rate experiment on a built-in design"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : halcli::kConfigError;
    }

    halcli::RunConfig cfg;
    cfg.command = app.get_subcommands().front()->get_name();
    try {
        apply_flags(cfg, flags);
        cfg.validate();
        return halcli::run_command(cfg);
    } catch (const hal::ConfigError& e) {
        std::fprintf(stderr, "halmle: config error: %s\n", e.what());
        return halcli::kConfigError;
    } catch (const hal::DataError& e) {
        std::fprintf(stderr, "halmle: data error: %s\n", e.what());
        return halcli::kConfigError;
    } catch (const hal::NumericError& e) {
        std::fprintf(stderr, "halmle: numeric failure: %s (residual %g)\n", e.what(), e.residual());
        return halcli::kNumericError;
    } catch (const hal::BudgetError& e) {
        std::fprintf(stderr, "halmle: %s\n", e.what());
        return halcli::kNumericError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "halmle: %s\n", e.what());
        return halcli::kNumericError;
    }
}
