#include "commands.hpp"

#include "report.hpp"

#include <hal/data.hpp>
#include <hal/pipeline.hpp>
#include <hal/scores.hpp>
#include <hal/selection.hpp>
#include <hal/sim.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace halcli {

namespace {

hal::Dataset load(const RunConfig& cfg) { return hal::load_csv(cfg.data, hal::parse_roles(cfg.roles)); }

std::vector<std::string> regressor_names(const hal::Dataset& data) {
    std::vector<std::string> names;
    if (data.has_treatment()) names.push_back(data.treatment_name());
    for (const auto& n : data.covariate_names()) names.push_back(n);
    return names;
}

std::vector<std::vector<int>> resolve_ladder(const std::string& text, const std::vector<std::string>& names) {
    std::vector<std::vector<int>> ladder;
    if (text.empty()) return ladder;
    std::istringstream in(text);
    std::string candidate;
    auto take = [&](const std::string& c) {
        std::vector<int> cols;
        std::istringstream items(c);
        std::string name;
        while (std::getline(items, name, ',')) {
            name.erase(0, name.find_first_not_of(' '));
            name.erase(name.find_last_not_of(' ') + 1);
            if (name.empty()) continue;
            const auto it = std::find(names.begin(), names.end(), name);
            if (it == names.end()) throw hal::ConfigError("estimate.g_ladder: unknown covariate '" + name + "'");
            cols.push_back(static_cast<int>(it - names.begin()));
        }
        ladder.push_back(cols);
    };
    while (std::getline(in, candidate, '|')) take(candidate);
    if (text.back() == '|') take("");
    return ladder;
}

void print_target_table(const hal::TargetReport& r) {
    std::printf("%-8s %-16s %12s %12s %12s %12s %12s\n", "estimand", "method", "estimate", "se", "ci_lo",
                "ci_hi", "|P_n D*|");
    std::printf("%-8s %-16s %12.6g %12.6g %12.6g %12.6g %12.4g\n", hal::to_string(r.estimand).c_str(),
                r.method.c_str(), r.psi, r.se, r.ci[0], r.ci[1], std::abs(r.pn_dstar));
}

json nuisance_json(const hal::NuisanceFit& f) {
    json j;
    if (!f.cv) return j;
    j["columns"] = f.catalog->size();
    j["fit"] = fit_summary(f.cv->fit);
    j["cv"] = to_json(f.cv->report, f.cv->path.lambda_grid);
    return j;
}

int run_pipeline_command(const RunConfig& cfg, const std::string& method, const std::string& file) {
    const hal::Dataset data = load(cfg);
    if (!data.has_treatment())
        throw hal::ConfigError("data.roles: " + method + " needs a treatment column (A=...)");
    hal::PipelineConfig pc = cfg.pipeline();
    pc.method = method;
    pc.g_ladder = resolve_ladder(cfg.g_ladder, data.covariate_names());
    const hal::PipelineResult res = hal::run_pipeline(data, pc, cfg.seed);

    json doc = report_header(cfg);
    doc["n"] = data.rows();
    doc["report"] = to_json(res.report);
    if (res.q_fit.cv) doc["outcome_model"] = nuisance_json(res.q_fit);
    if (res.g_fit.cv) doc["propensity_model"] = nuisance_json(res.g_fit);
    if (!res.g.label.empty()) doc["propensity_label"] = res.g.label;
    if (res.undersmoothing) doc["undersmoothing"] = to_json(*res.undersmoothing);
    if (res.ctmle) doc["ctmle"] = to_json(*res.ctmle);
    if (res.bootstrap) doc["bootstrap"] = to_json(*res.bootstrap);
    if (res.plateau) doc["plateau"] = to_json(*res.plateau);
    if (!res.extras.empty()) {
        json e = json::object();
        for (const auto& [k, v] : res.extras) e[k] = v;
        doc["extras"] = e;
    }
    bool unmet = false;
    std::string why;
    if (res.undersmoothing && !res.undersmoothing->criterion_met) {
        unmet = true;
        why = "undersmoothing criterion not met";
    }
    if (res.plateau && res.plateau->flagged) {
        unmet = true;
        why = "bootstrap CI widths never reached a plateau";
    }
    if (method != "plugin" && method != "ipw" && method != "bootstrap" && !res.report.tol_met) {
        unmet = true;
        why = "|P_n D*| above tolerance after the update";
    }
    doc["criterion_unmet"] = unmet;
    write_json(cfg.out_dir / file, doc);
    print_target_table(res.report);
    if (unmet) {
        std::fprintf(stderr, "halmle: %s (report written)\n", why.c_str());
        return kCriterionUnmet;
    }
    return kOk;
}

} // namespace

int cmd_fit(const RunConfig& cfg) {
    const hal::Dataset data = load(cfg);
    const hal::LossFamily loss = hal::outcome_loss(data);
    const hal::FoldPlan folds = hal::make_folds(data, cfg.folds, hal::mix_seed(cfg.seed, 1));
    const hal::CvFit cv = hal::cv_select_lambda(data, cfg.basis_spec(), loss, folds, cfg.cv_options());
    const hal::HalFit& fit = cv.selection.fit;
    const hal::ScoreDiagnostics diag = hal::score_diagnostics(fit, cv.catalog, data.outcome(), 50, cfg.seed);

    json doc = report_header(cfg);
    doc["n"] = data.rows();
    doc["regressors"] = regressor_names(data);
    doc["basis"] = {{"pre_dedup", cv.catalog.pre_dedup_count}, {"columns", cv.catalog.size()}};
    doc["cv"] = to_json(cv.selection.report, cv.selection.path.lambda_grid);
    doc["fit"] = fit_summary(fit);
    doc["coefficients"] = coefficients_json(cv.catalog, fit, regressor_names(data));
    doc["score_diagnostics"] = to_json(diag);
    write_json(cfg.out_dir / "fit.json", doc);

    const double risk = cv.selection.report.mean_risk[cv.selection.report.selected];
    std::printf("n=%ld p=%ld lambda=%.6g l1_norm=%.6g cv_risk=%.6g\n", static_cast<long>(data.rows()),
                static_cast<long>(cv.catalog.size()), fit.lambda, fit.l1_norm, risk);
    return kOk;
}

int cmd_cv(const RunConfig& cfg) {
    const hal::Dataset data = load(cfg);
    const hal::LossFamily loss = hal::outcome_loss(data);
    const hal::FoldPlan folds = hal::make_folds(data, cfg.folds, hal::mix_seed(cfg.seed, 1));
    hal::HalSpecLadder ladder;
    const int top = std::min<int>(cfg.max_degree, static_cast<int>(data.covariate_count() + (data.has_treatment() ? 1 : 0)));
    for (int deg = 1; deg <= top; ++deg) {
        hal::BasisSpec s = cfg.basis_spec();
        s.max_degree = deg;
        ladder.specs.push_back(s);
    }
    const hal::SuperLearnerResult sl = hal::discrete_super_learner(data, ladder, loss, folds, cfg.cv_options());

    json doc = report_header(cfg);
    doc["n"] = data.rows();
    doc["ladder"] = to_json(sl.report, {});
    doc["evaluated"] = sl.evaluated;
    doc["selected_max_degree"] = ladder.specs[sl.report.selected].max_degree;
    doc["cv"] = to_json(sl.best.selection.report, sl.best.selection.path.lambda_grid);
    doc["fit"] = fit_summary(sl.best.selection.fit);
    doc["coefficients"] = coefficients_json(sl.best.catalog, sl.best.selection.fit, regressor_names(data));
    write_json(cfg.out_dir / "cv.json", doc);

    std::printf("%-12s %14s\n", "max_degree", "cv_risk");
    for (std::size_t c = 0; c < sl.report.mean_risk.size(); ++c)
        std::printf("%-12d %14.6g%s\n", ladder.specs[c].max_degree, sl.report.mean_risk[c],
                    c == sl.report.selected ? "  *" : "");
    return kOk;
}

int cmd_estimate(const RunConfig& cfg) { return run_pipeline_command(cfg, cfg.method, "estimate.json"); }

int cmd_bootstrap(const RunConfig& cfg) { return run_pipeline_command(cfg, "bootstrap", "bootstrap.json"); }

int cmd_ctmle(const RunConfig& cfg) { return run_pipeline_command(cfg, "ctmle", "ctmle.json"); }

int cmd_simulate(const RunConfig& cfg) {
    const hal::Dgp dgp = hal::find_dgp(cfg.dgp);
    hal::PipelineConfig pc = cfg.pipeline();
    // Replicates run in parallel; each pipeline stays single-threaded.
    pc.cv.threads = 1;
    pc.bootstrap.threads = 1;
    std::vector<std::string> names;
    for (int k = 0; k < dgp.dimension; ++k) names.push_back("w" + std::to_string(k + 1));
    pc.g_ladder = resolve_ladder(cfg.g_ladder, names);
    const hal::Truth truth = dgp.truth(pc.estimand);
    const hal::SimResult res = hal::run_mc(dgp, hal::pipeline_estimator(pc, truth), cfg.n, cfg.replicates,
                                           cfg.seed, cfg.thread_count(), cfg.method, truth.psi0);

    json doc = report_header(cfg);
    doc["summary"] = to_json(res);
    write_json(cfg.out_dir / "simulate.json", doc);
    write_sim_csv(cfg.out_dir / "simulate.csv", res);

    std::printf("%-8s %-16s %6s %10s %10s %10s %10s %10s\n", "dgp", "estimator", "n", "psi0", "bias", "mse",
                "coverage", "ci_width");
    std::printf("%-8s %-16s %6ld %10.5g %10.4g %10.4g %10.3f %10.4g\n", res.dgp.c_str(), res.estimator.c_str(),
                static_cast<long>(res.n), res.psi0, res.bias, res.mse, res.coverage, res.mean_ci_width);
    return kOk;
}

int cmd_rate(const RunConfig& cfg) {
    const hal::Dgp dgp = hal::find_dgp(cfg.dgp);
    hal::RateOptions opts = cfg.rate_options();
    const hal::RateResult res = hal::rate_experiment(dgp, cfg.sample_sizes(), cfg.replicates, cfg.seed, opts);

    json doc = report_header(cfg);
    doc["result"] = to_json(res);
    write_json(cfg.out_dir / "rate.json", doc);
    write_rate_csv(cfg.out_dir / "rate.csv", res);

    std::printf("%8s %14s %14s\n", "n", "mean_l2_error", "sd");
    for (const auto& row : res.rows)
        std::printf("%8ld %14.6g %14.6g\n", static_cast<long>(row.n), row.mean_error, row.sd_error);
    std::printf("log-log slope %.4f\n", res.slope);
    return kOk;
}

int run_command(const RunConfig& cfg) {
    if (cfg.command == "fit") return cmd_fit(cfg);
    if (cfg.command == "cv") return cmd_cv(cfg);
    if (cfg.command == "estimate") return cmd_estimate(cfg);
    if (cfg.command == "bootstrap") return cmd_bootstrap(cfg);
    if (cfg.command == "ctmle") return cmd_ctmle(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "rate") return cmd_rate(cfg);
    throw hal::ConfigError("unknown command '" + cfg.command + "'");
}

} // namespace halcli
