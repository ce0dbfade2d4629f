#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace halcli {

using hal::ConfigError;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used == trim(v).size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + v + "'");
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used == trim(v).size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::string fmt(double x) {
    std::ostringstream o;
    o.precision(17);
    o << x;
    return o.str();
}

} // namespace

void set_knots(RunConfig& cfg, const std::string& text) {
    const std::string t = trim(text);
    if (t == "all" || t == "all_observations") {
        cfg.knots = "all";
        return;
    }
    if (t == "quantiles") {
        cfg.knots = "quantiles";
        return;
    }
    const std::string prefix = "quantiles:";
    const std::string count = t.rfind(prefix, 0) == 0 ? t.substr(prefix.size()) : t;
    cfg.knots = "quantiles";
    cfg.quantile_count = static_cast<int>(to_int("knots", count));
}

void set_truncation(RunConfig& cfg, const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() == 1) {
        cfg.g_lo = to_double("truncate", parts[0]);
        cfg.g_hi = 1.0 - cfg.g_lo;
    } else if (parts.size() == 2) {
        cfg.g_lo = to_double("truncate", parts[0]);
        cfg.g_hi = to_double("truncate", parts[1]);
    } else {
        throw ConfigError("truncate: expected 'lo' or 'lo,hi', got '" + text + "'");
    }
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "data.path") cfg.data = v;
    else if (key == "data.roles") cfg.roles = v;
    else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "run.threads") {
        const long long t = to_int(key, v);
        if (t < 0) throw ConfigError("run.threads: must be >= 0");
        cfg.threads = static_cast<std::size_t>(t);
    } else if (key == "run.out_dir") cfg.out_dir = v;
    else if (key == "basis.max_degree") cfg.max_degree = static_cast<int>(to_int(key, v));
    else if (key == "basis.knots") set_knots(cfg, v);
    else if (key == "basis.quantile_count") cfg.quantile_count = static_cast<int>(to_int(key, v));
    else if (key == "basis.spline_order") cfg.spline_order = static_cast<int>(to_int(key, v));
    else if (key == "basis.max_basis") {
        const long long m = to_int(key, v);
        if (m < 1) throw ConfigError("basis.max_basis: must be >= 1");
        cfg.max_basis = static_cast<std::size_t>(m);
    } else if (key == "cv.folds") cfg.folds = static_cast<int>(to_int(key, v));
    else if (key == "cv.grid_size") cfg.grid_size = static_cast<int>(to_int(key, v));
    else if (key == "cv.min_ratio") cfg.min_ratio = to_double(key, v);
    else if (key == "estimate.estimand") cfg.estimand = v;
    else if (key == "estimate.method") cfg.method = v;
    else if (key == "estimate.truncate") set_truncation(cfg, v);
    else if (key == "estimate.g_lo") cfg.g_lo = to_double(key, v);
    else if (key == "estimate.g_hi") cfg.g_hi = to_double(key, v);
    else if (key == "estimate.undersmooth") cfg.undersmooth = to_bool(key, v);
    else if (key == "estimate.undersmooth_constant") cfg.undersmooth_constant = to_double(key, v);
    else if (key == "estimate.tol_constant") cfg.tol_constant = to_double(key, v);
    else if (key == "estimate.q_model") cfg.q_model = v;
    else if (key == "estimate.g_model") cfg.g_model = v;
    else if (key == "estimate.g_ladder") cfg.g_ladder = v;
    else if (key == "bootstrap.B") cfg.B = static_cast<int>(to_int(key, v));
    else if (key == "bootstrap.plateau") cfg.plateau = to_bool(key, v);
    else if (key == "simulate.dgp" || key == "rate.dgp") cfg.dgp = v;
    else if (key == "simulate.n") cfg.n = static_cast<hal::Index>(to_int(key, v));
    else if (key == "simulate.replicates" || key == "rate.replicates") cfg.replicates = static_cast<int>(to_int(key, v));
    else if (key == "rate.n_grid") cfg.n_grid = v;
    else if (key == "rate.knot_scale") cfg.knot_scale = to_double(key, v);
    else throw ConfigError("config: unknown key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config: file not found: " + path.string());
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + section + "' outside a [section]");
        for (const auto& [key, value] : body) apply_setting(cfg, section + "." + key, value.data());
    }
}

hal::BasisSpec RunConfig::basis_spec() const {
    hal::BasisSpec s;
    s.max_degree = max_degree;
    s.knots = knots == "all" ? hal::KnotStrategy::all_observations : hal::KnotStrategy::quantiles;
    s.quantile_count = quantile_count;
    s.spline_order = spline_order;
    s.max_basis = max_basis;
    return s;
}

hal::CvOptions RunConfig::cv_options() const {
    hal::CvOptions o;
    o.grid_size = grid_size;
    o.min_ratio = min_ratio;
    o.threads = thread_count();
    return o;
}

hal::PipelineConfig RunConfig::pipeline() const {
    hal::PipelineConfig p;
    p.method = method;
    p.estimand = hal::parse_estimand(estimand);
    p.q_spec = basis_spec();
    p.g_spec = basis_spec();
    p.folds = folds;
    p.cv = cv_options();
    p.q_kind = hal::parse_nuisance(q_model);
    p.g_kind = hal::parse_nuisance(g_model);
    p.g_lo = g_lo;
    p.g_hi = g_hi;
    p.undersmooth = undersmooth;
    p.undersmoothing.threshold_constant = undersmooth_constant;
    p.tmle.tol_constant = tol_constant;
    p.bootstrap.B = B;
    p.bootstrap.threads = thread_count();
    p.plateau = plateau;
    return p;
}

hal::RateOptions RunConfig::rate_options() const {
    hal::RateOptions o;
    o.spec = basis_spec();
    o.cv = cv_options();
    o.folds = folds;
    o.threads = thread_count();
    o.knot_scale = knot_scale;
    return o;
}

std::vector<hal::Index> RunConfig::sample_sizes() const {
    std::vector<hal::Index> out;
    for (const auto& s : split(n_grid, ',')) out.push_back(static_cast<hal::Index>(to_int("rate.n_grid", s)));
    return out;
}

std::size_t RunConfig::thread_count() const { return threads > 0 ? threads : hal::default_thread_count(); }

std::map<std::string, std::string> RunConfig::echo() const {
    // Threads and output location do not change results and stay out of reports.
    std::map<std::string, std::string> e;
    e["command"] = command;
    e["data.path"] = data.empty() ? "" : data.filename().string();
    e["data.roles"] = roles;
    e["run.seed"] = std::to_string(seed);
    e["basis.max_degree"] = std::to_string(max_degree);
    e["basis.knots"] = knots;
    e["basis.quantile_count"] = std::to_string(quantile_count);
    e["basis.spline_order"] = std::to_string(spline_order);
    e["basis.max_basis"] = max_basis ? std::to_string(*max_basis) : "";
    e["cv.folds"] = std::to_string(folds);
    e["cv.grid_size"] = std::to_string(grid_size);
    e["cv.min_ratio"] = fmt(min_ratio);
    e["estimate.estimand"] = estimand;
    e["estimate.method"] = method;
    e["estimate.g_lo"] = fmt(g_lo);
    e["estimate.g_hi"] = fmt(g_hi);
    e["estimate.undersmooth"] = undersmooth ? "true" : "false";
    e["estimate.undersmooth_constant"] = fmt(undersmooth_constant);
    e["estimate.tol_constant"] = fmt(tol_constant);
    e["estimate.q_model"] = q_model;
    e["estimate.g_model"] = g_model;
    e["estimate.g_ladder"] = g_ladder;
    e["bootstrap.B"] = std::to_string(B);
    e["bootstrap.plateau"] = plateau ? "true" : "false";
    e["simulate.dgp"] = dgp;
    e["simulate.n"] = std::to_string(n);
    e["simulate.replicates"] = std::to_string(replicates);
    e["rate.n_grid"] = n_grid;
    e["rate.knot_scale"] = fmt(knot_scale);
    return e;
}

void RunConfig::validate() const {
    const bool needs_data = command != "simulate" && command != "rate";
    if (needs_data) {
        if (data.empty()) throw ConfigError("data.path: no dataset given (--data)");
        if (!std::filesystem::exists(data)) throw ConfigError("data.path: file not found: " + data.string());
        if (roles.empty()) throw ConfigError("data.roles: no column roles given (--roles)");
    }
    if (max_degree < 1) throw ConfigError("basis.max_degree: must be >= 1");
    if (knots == "quantiles" && quantile_count < 2) throw ConfigError("basis.quantile_count: must be >= 2");
    if (spline_order != 0 && spline_order != 1) throw ConfigError("basis.spline_order: must be 0 or 1");
    if (folds < 2) throw ConfigError("cv.folds: must be >= 2");
    if (grid_size < 1) throw ConfigError("cv.grid_size: must be >= 1");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw ConfigError("cv.min_ratio: must lie in (0,1)");
    hal::parse_estimand(estimand);
    hal::parse_nuisance(q_model);
    hal::parse_nuisance(g_model);
    if (!(g_lo > 0.0 && g_lo <= g_hi && g_hi <= 1.0))
        throw ConfigError("estimate.truncate: need 0 < g_lo <= g_hi <= 1");
    if (!(tol_constant >= 0.0)) throw ConfigError("estimate.tol_constant: must be >= 0");
    if (!(undersmooth_constant > 0.0)) throw ConfigError("estimate.undersmooth_constant: must be > 0");
    if (B < 2) throw ConfigError("bootstrap.B: must be >= 2");
    if (command == "simulate" || command == "rate") {
        if (replicates < 1) throw ConfigError("simulate.replicates: must be >= 1");
        hal::find_dgp(dgp);
    }
    if (command == "simulate" && n < 2) throw ConfigError("simulate.n: must be >= 2");
    if (command == "rate") {
        const auto ns = sample_sizes();
        if (ns.size() < 3) throw ConfigError("rate.n_grid: need at least 3 sample sizes");
        for (std::size_t k = 1; k < ns.size(); ++k)
            if (ns[k] <= ns[k - 1]) throw ConfigError("rate.n_grid: sample sizes must increase");
    }
    if (!(knot_scale >= 0.0)) throw ConfigError("rate.knot_scale: must be >= 0");
}

} // namespace halcli
