#pragma once

#include "config.hpp"

#include <hal/bootstrap.hpp>
#include <hal/ctmle.hpp>
#include <hal/estimands.hpp>
#include <hal/scores.hpp>
#include <hal/selection.hpp>
#include <hal/sim.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>

namespace halcli {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Report skeleton: schema_version, command, config echo.
json report_header(const RunConfig& cfg);

json to_json(const hal::TargetReport& r);
json to_json(const hal::CvReport& r, const std::vector<double>& lambdas);
json to_json(const hal::ScoreDiagnostics& d);
json to_json(const hal::UndersmoothResult& u);
json to_json(const hal::BootstrapReport& b);
json to_json(const hal::PlateauReport& p);
json to_json(const hal::CtmleResult& c);
json to_json(const hal::SimResult& s);
json to_json(const hal::RateResult& r);
// Nonzero coefficients with their basis functions; covariate indices are
// mapped to `names` (regressor order).
json coefficients_json(const hal::BasisCatalog& catalog, const hal::HalFit& fit,
                       const std::vector<std::string>& names);
json fit_summary(const hal::HalFit& fit);

void write_json(const std::filesystem::path& path, const json& doc);
void write_sim_csv(const std::filesystem::path& path, const hal::SimResult& s);
void write_rate_csv(const std::filesystem::path& path, const hal::RateResult& r);

// Shortest round-trip decimal form.
std::string format_number(double x);

} // namespace halcli
