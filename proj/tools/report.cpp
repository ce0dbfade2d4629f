#include "report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace halcli {

namespace {

json interval(const std::array<double, 2>& ci) { return json::array({ci[0], ci[1]}); }

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw hal::ConfigError("cannot write " + path.string());
    return out;
}

} // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

json report_header(const RunConfig& cfg) {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["command"] = cfg.command;
    json c = json::object();
    for (const auto& [k, v] : cfg.echo()) c[k] = v;
    doc["config"] = c;
    return doc;
}

json to_json(const hal::TargetReport& r) {
    json j;
    j["estimand"] = hal::to_string(r.estimand);
    j["method"] = r.method;
    j["psi"] = r.psi;
    j["se"] = r.se;
    j["ci"] = interval(r.ci);
    j["pn_dstar"] = r.pn_dstar;
    j["abs_pn_dstar"] = std::abs(r.pn_dstar);
    j["tol"] = std::isfinite(r.tol) ? json(r.tol) : json(format_number(r.tol));
    j["tol_met"] = r.tol_met;
    j["steps"] = r.steps;
    j["halvings"] = r.halvings;
    j["loglik_gain"] = r.loglik_gain;
    j["truncation_hits"] = r.truncation_hits;
    if (r.battery_max) j["battery_max"] = *r.battery_max;
    j["projection_ridged"] = r.projection_ridged;
    if (r.weight_summary) {
        const auto& w = *r.weight_summary;
        j["weights"] = {{"min", w[0]}, {"max", w[1]}, {"mean", w[2]}};
    }
    j["n"] = r.ic.size();
    return j;
}

json to_json(const hal::CvReport& r, const std::vector<double>& lambdas) {
    json rows = json::array();
    for (std::size_t c = 0; c < r.mean_risk.size(); ++c) {
        json row;
        row["id"] = c < r.candidate_ids.size() ? r.candidate_ids[c] : std::to_string(c);
        if (c < lambdas.size()) row["lambda"] = lambdas[c];
        row["mean_risk"] = r.mean_risk[c];
        row["l1_norm"] = c < r.l1_norms.size() ? r.l1_norms[c] : 0.0;
        row["fold_risks"] = r.fold_risks[c];
        rows.push_back(row);
    }
    json j;
    j["selected"] = r.selected;
    j["seed"] = r.seed;
    j["candidates"] = rows;
    return j;
}

json to_json(const hal::ScoreDiagnostics& d) {
    json j;
    j["lambda"] = d.lambda;
    j["intercept_residual"] = d.intercept_residual;
    j["max_abs_active_residual"] = d.max_abs_active_residual;
    j["battery_size"] = d.battery.size();
    j["battery_empty"] = d.battery_empty;
    j["max_abs_path_residual"] = d.max_abs_path_residual;
    j["max_identity_error"] = d.max_identity_error;
    if (d.eif_residual) j["eif_residual"] = *d.eif_residual;
    return j;
}

json to_json(const hal::UndersmoothResult& u) {
    json j;
    j["lambda"] = u.fit.lambda;
    j["l1_norm"] = u.fit.l1_norm;
    j["criterion_value"] = u.criterion_value;
    j["threshold"] = u.threshold;
    j["criterion_met"] = u.criterion_met;
    j["vacuous"] = u.vacuous;
    j["extensions"] = u.extensions;
    json trace = json::array();
    for (const auto& [norm, value] : u.trace) trace.push_back({{"l1_norm", norm}, {"criterion", value}});
    j["trace"] = trace;
    return j;
}

json to_json(const hal::BootstrapReport& b) {
    json j;
    j["B"] = b.B;
    j["estimate"] = b.estimate;
    j["failures"] = b.failures;
    j["boot_se"] = b.boot_se;
    j["ci_percentile"] = interval(b.ci_percentile);
    j["ci_wald"] = interval(b.ci_wald);
    j["l1_bound"] = b.l1_bound;
    j["columns"] = b.columns;
    j["columns_identical"] = b.columns_identical;
    j["estimates"] = b.estimates;
    return j;
}

json to_json(const hal::PlateauReport& p) {
    json scan = json::array();
    for (const auto& r : p.scan)
        scan.push_back({{"path_index", r.path_index},
                        {"lambda", r.lambda},
                        {"l1_norm", r.l1_norm},
                        {"estimate", r.estimate},
                        {"ci", interval(r.ci)},
                        {"width", r.width}});
    json j;
    j["scan"] = scan;
    j["selected"] = p.selected;
    j["selected_norm"] = p.selected_norm;
    j["flagged"] = p.flagged;
    return j;
}

json to_json(const hal::CtmleResult& c) {
    json trace = json::array();
    for (const auto& s : c.trace)
        trace.push_back({{"candidate", s.candidate},
                         {"label", s.label},
                         {"loglik_gain", s.loglik_gain},
                         {"epsilon", s.epsilon}});
    json j;
    j["trace"] = trace;
    j["selected_steps"] = c.selected_steps;
    j["cv_loss"] = c.cv_loss;
    return j;
}

json to_json(const hal::SimResult& s) {
    json j;
    j["dgp"] = s.dgp;
    j["estimator"] = s.estimator;
    j["n"] = s.n;
    j["replicates"] = s.replicates;
    j["seed"] = s.seed;
    j["psi0"] = s.psi0;
    j["failures"] = s.failures;
    j["mean_estimate"] = s.mean_estimate;
    j["bias"] = s.bias;
    j["variance"] = s.variance;
    j["mse"] = s.mse;
    j["coverage"] = s.coverage;
    j["mean_ci_width"] = s.mean_ci_width;
    j["mean_se"] = s.mean_se;
    j["mean_ic_variance"] = s.mean_ic_variance;
    j["tol_met_rate"] = s.tol_met_rate;
    return j;
}

json to_json(const hal::RateResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n}, {"mean_error", row.mean_error}, {"sd_error", row.sd_error}});
    json j;
    j["dgp"] = r.dgp;
    j["seed"] = r.seed;
    j["rows"] = rows;
    j["slope"] = r.slope;
    return j;
}

json coefficients_json(const hal::BasisCatalog& catalog, const hal::HalFit& fit,
                       const std::vector<std::string>& names) {
    json out = json::array();
    for (hal::Index j : fit.active_set) {
        const auto& f = catalog.functions[static_cast<std::size_t>(j)];
        json vars = json::array();
        for (int s : f.subset)
            vars.push_back(static_cast<std::size_t>(s) < names.size() ? names[static_cast<std::size_t>(s)]
                                                                       : std::to_string(s));
        out.push_back({{"column", j}, {"variables", vars}, {"knot", f.knot}, {"order", f.order}, {"beta", fit.beta(j)}});
    }
    return out;
}

json fit_summary(const hal::HalFit& fit) {
    json j;
    j["loss"] = hal::to_string(fit.loss);
    j["lambda"] = fit.lambda;
    j["intercept"] = fit.intercept;
    j["l1_norm"] = fit.l1_norm;
    j["slope_l1_norm"] = fit.slope_l1_norm;
    j["active"] = fit.active_set.size();
    j["train_risk"] = fit.train_risk;
    j["kkt_residual"] = fit.kkt_residual;
    j["converged"] = fit.converged;
    return j;
}

void write_json(const std::filesystem::path& path, const json& doc) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

void write_sim_csv(const std::filesystem::path& path, const hal::SimResult& s) {
    std::vector<std::string> extra_keys;
    for (const auto& row : s.rows)
        for (const auto& [k, v] : row.extras)
            if (std::find(extra_keys.begin(), extra_keys.end(), k) == extra_keys.end()) extra_keys.push_back(k);
    std::sort(extra_keys.begin(), extra_keys.end());

    auto out = open_out(path);
    out << "replicate,seed,failed,psi,se,ci_lo,ci_hi,covered,pn_dstar,tol,tol_met";
    for (const auto& k : extra_keys) out << ',' << k;
    out << '\n';
    for (const auto& r : s.rows) {
        out << r.index << ',' << r.seed << ',' << (r.failed ? 1 : 0) << ',' << format_number(r.psi) << ','
            << format_number(r.se) << ',' << format_number(r.ci_lo) << ',' << format_number(r.ci_hi) << ','
            << (r.covered ? 1 : 0) << ',' << format_number(r.pn_dstar) << ',' << format_number(r.tol) << ','
            << (r.tol_met ? 1 : 0);
        for (const auto& k : extra_keys) {
            const auto it = r.extras.find(k);
            out << ',' << (it == r.extras.end() ? std::string() : format_number(it->second));
        }
        out << '\n';
    }
}

void write_rate_csv(const std::filesystem::path& path, const hal::RateResult& r) {
    auto out = open_out(path);
    out << "n,replicate,l2_error\n";
    for (const auto& row : r.rows)
        for (std::size_t k = 0; k < row.errors.size(); ++k)
            out << row.n << ',' << k << ',' << format_number(row.errors[k]) << '\n';
}

} // namespace halcli
