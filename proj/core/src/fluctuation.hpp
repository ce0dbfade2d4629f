#pragma once

#include "hal/estimands.hpp"

#include <Eigen/Core>

#include <vector>

namespace hal::detail {

// Working state of an iterated logistic fluctuation on the [0, 1] scale.
struct Fluctuation {
    double lo = 0.0, span = 1.0;
    Eigen::VectorXd y;                 // rescaled outcome
    Eigen::VectorXd eta_obs, eta1, eta0;
};

// Basis of the preserved score span: the intercept plus the active-column
// contrasts phi_j - s_j s_p phi_p, which keep sum_j h_j |beta_j| = 0.
struct PreservedSpan {
    Eigen::MatrixXd obs, at1, at0;
    bool empty() const { return obs.cols() == 0; }
};

struct Target {
    int arm;
    double tol;
    Eigen::VectorXd h_obs, h1, h0;
};

struct FluctuationOutcome {
    int steps = 0;
    int halvings = 0;
    bool converged = false;
    double loglik_gain = 0.0;
    bool ridged = false;
    std::vector<double> epsilon;
};

const Eigen::VectorXd& require_treatment(const Dataset& data);
Eigen::VectorXd arm_ic(int arm, const Eigen::VectorXd& a, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& q_obs, const Eigen::VectorXd& q_arm,
                       const PropensityModel& g, double psi);
double quasi_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta);
Eigen::VectorXd expit_vec(const Eigen::VectorXd& eta);
Fluctuation start_fluctuation(const OutcomeModel& q, const Dataset& data, double clip);
PreservedSpan preserved_span(const OutcomeModel& q, Index n);
Target make_target(int arm, const Eigen::VectorXd& a, const PropensityModel& g);
FluctuationOutcome fluctuate(Fluctuation& f, const std::vector<Target>& targets,
                             const PreservedSpan* span, const TmleOptions& opts);
OutcomeModel updated_model(const OutcomeModel& q, const Fluctuation& f);
double default_tol(const Eigen::VectorXd& ic, Index n, double constant);

} // namespace hal::detail
