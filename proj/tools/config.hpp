#pragma once

#include <hal/pipeline.hpp>
#include <hal/sim.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace halcli {

/// Everything a command needs. Every field has a default; a config file and
/// then command-line flags override it.
struct RunConfig {
    std::string command;

    // [data]
    std::filesystem::path data;
    std::string roles;

    // [run]
    std::uint64_t seed = 1;
    std::size_t threads = 0; // 0: HALMLE_THREADS or hardware concurrency
    std::filesystem::path out_dir = "halmle-out";

    // [basis]
    int max_degree = 2;
    std::string knots = "all"; // all | quantiles
    int quantile_count = 5;
    int spline_order = 0;
    std::optional<std::size_t> max_basis;

    // [cv]
    int folds = 5;
    int grid_size = 20;
    double min_ratio = 0.01;

    // [estimate]
    std::string estimand = "tsm1";
    std::string method = "tmle";
    double g_lo = 0.01;
    double g_hi = 0.99;
    bool undersmooth = false;
    double undersmooth_constant = 1.0;
    double tol_constant = 1.0;
    std::string q_model = "hal";
    std::string g_model = "hal";
    // ctmle candidates by covariate name, "|w1,w2|w1,w2,w3": intercept only,
    // then w1 and w2, then all three. Empty: intercept only, then all covariates.
    std::string g_ladder;

    // [bootstrap]
    int B = 500;
    bool plateau = false;

    // [simulate] / [rate]
    std::string dgp = "A";
    hal::Index n = 500;
    int replicates = 100;
    std::string n_grid = "200,500,1250,3000";
    double knot_scale = 0.0;

    hal::BasisSpec basis_spec() const;
    hal::CvOptions cv_options() const;
    hal::PipelineConfig pipeline() const;
    hal::RateOptions rate_options() const;
    std::vector<hal::Index> sample_sizes() const;
    std::size_t thread_count() const;

    // Ordered key/value echo for reports.
    std::map<std::string, std::string> echo() const;
    // Throws ConfigError naming the first invalid field.
    void validate() const;
};

// Applies "section.key = value" settings; unknown keys are a ConfigError.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Reads an INI file ([section] headers, key = value lines, ';' comments).
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

// "all", "quantiles", "quantiles:10" or a bare count of quantile knots.
void set_knots(RunConfig& cfg, const std::string& text);
// "lo,hi" or a single lo (hi = 1 - lo).
void set_truncation(RunConfig& cfg, const std::string& text);

} // namespace halcli
