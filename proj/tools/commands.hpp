#pragma once

#include "config.hpp"

namespace halcli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericError = 3, kCriterionUnmet = 4 };

// Each command writes its report under cfg.out_dir and returns an exit code.
int cmd_fit(const RunConfig& cfg);
int cmd_cv(const RunConfig& cfg);
int cmd_estimate(const RunConfig& cfg);
int cmd_bootstrap(const RunConfig& cfg);
int cmd_ctmle(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);
int cmd_rate(const RunConfig& cfg);

int run_command(const RunConfig& cfg);

} // namespace halcli
