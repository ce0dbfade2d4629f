#pragma once

#include "hal/data.hpp"
#include "hal/estimands.hpp"

#include <string>
#include <vector>

namespace hal {

struct CtmleStep {
    std::size_t candidate = 0;
    std::string label;
    double loglik_gain = 0.0;
    double epsilon = 0.0;
};

struct CtmleResult {
    // Greedy sequence on the full data.
    std::vector<CtmleStep> trace;
    // Number of trace steps kept (1-based), chosen by cross-validated loss.
    std::size_t selected_steps = 0;
    // Mean held-out loss after k steps, k = 1..trace.size().
    std::vector<double> cv_loss;
    OutcomeModel q;
    TargetReport report;

    // True when any kept step used the given candidate.
    bool uses(std::size_t candidate) const;
};

// Collaborative TMLE of the arm-specific mean. Each step fluctuates the
// current Q with the candidate (beyond the last accepted one) whose TMLE
// update gains the most log-likelihood; the number of steps is chosen by
// V-fold cross-validation with the candidate predictions held fixed.
CtmleResult ctmle_select(const OutcomeModel& q0, const std::vector<PropensityModel>& ladder,
                         const Dataset& data, const FoldPlan& folds,
                         const TmleOptions& options = {}, int arm = 1);

} // namespace hal
