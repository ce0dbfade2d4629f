#pragma once

#include "hal/bootstrap.hpp"
#include "hal/ctmle.hpp"
#include "hal/estimands.hpp"
#include "hal/selection.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hal {

/// Known nuisance functions, available in simulations.
struct Truth {
    std::function<double(std::span<const double>)> gbar0;          // P(A = 1 | W = w)
    std::function<double(double, std::span<const double>)> qbar0;  // E(Y | A = a, W = w)
    double psi0 = 0.0;
};

// arm_means: Qbar(a, W) = mean of Y among rows with A = a.
enum class NuisanceKind { hal, intercept, truth, arm_means };
std::string to_string(NuisanceKind k);
NuisanceKind parse_nuisance(const std::string& text);

struct PipelineConfig {
    // plugin | ipw | tmle | tmle_preserving | ctmle | bootstrap | oracle | treated_mean
    std::string method = "tmle";
    Estimand estimand = Estimand::tsm1;
    BasisSpec q_spec;
    BasisSpec g_spec;
    int folds = 5;
    CvOptions cv;
    NuisanceKind q_kind = NuisanceKind::hal;
    NuisanceKind g_kind = NuisanceKind::hal;
    double g_lo = 0.01;
    double g_hi = 0.99;
    bool undersmooth = false;
    UndersmoothOptions undersmoothing;
    TmleOptions tmle;
    BootstrapOptions bootstrap;
    bool plateau = false;
    // Stop the plateau scan at the selected norm instead of scanning the whole path.
    bool plateau_stop_early = false;
    // Covariate subsets (0-based) of the propensity candidates for ctmle,
    // ordered by complexity. Empty subset means intercept only.
    std::vector<std::vector<int>> g_ladder;
};

struct NuisanceFit {
    std::shared_ptr<const BasisCatalog> catalog;
    std::optional<CvSelection> cv;
};

struct PipelineResult {
    TargetReport report;
    OutcomeModel q;
    PropensityModel g;
    NuisanceFit q_fit;
    NuisanceFit g_fit;
    std::optional<UndersmoothResult> undersmoothing;
    std::optional<CtmleResult> ctmle;
    std::optional<BootstrapReport> bootstrap;
    std::optional<PlateauReport> plateau;
    // Secondary numbers for simulations (e.g. the plain TMLE next to ctmle).
    std::map<std::string, double> extras;
};

// HAL fit of Y on (A, W) with lambda by cross-validation.
NuisanceFit fit_outcome_hal(const Dataset& data, const BasisSpec& spec, LossFamily loss,
                            const FoldPlan& folds, const CvOptions& cv);
// HAL logistic fit of A on the listed covariates (all when `columns` is empty).
NuisanceFit fit_propensity_hal(const Dataset& data, const BasisSpec& spec, const FoldPlan& folds,
                               const CvOptions& cv, const std::vector<int>& columns = {});
// In-sample predictions of a propensity fit.
Eigen::VectorXd propensity_predictions(const NuisanceFit& fit);

LossFamily outcome_loss(const Dataset& data);

PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& config, std::uint64_t seed,
                            const Truth* truth = nullptr);

} // namespace hal
