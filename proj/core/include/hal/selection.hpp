#pragma once

#include "hal/basis.hpp"
#include "hal/data.hpp"
#include "hal/lasso.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hal {

/// Cross-validated risks of a list of candidates.
struct CvReport {
    std::vector<std::string> candidate_ids;
    // fold_risks[c][v]: mean held-out loss of candidate c trained without fold v.
    std::vector<std::vector<double>> fold_risks;
    std::vector<double> mean_risk;
    // Full-data l1 norms, used to break ties toward simpler candidates.
    std::vector<double> l1_norms;
    std::size_t selected = 0;
    std::uint64_t seed = 0;
};

// Index of the minimum mean risk; ties go to the smaller l1 norm, then the
// lower index.
std::size_t select_candidate(const std::vector<double>& mean_risk,
                             const std::vector<double>& l1_norms);

struct CvOptions {
    int grid_size = 20;
    double min_ratio = 0.01;
    FitOptions fit;
    std::size_t threads = 1;
};

struct CvSelection {
    CvReport report;
    LassoPath path; // full-data path on the shared grid
    HalFit fit;     // path.fits[report.selected]
    std::size_t selected_index = 0;
};

// lambda tuned by V-fold cross-validation. All folds use the full-data grid;
// held-out rows get zero weight in the training fits.
CvSelection cv_select_lambda(const BasisCatalog& catalog, const Eigen::VectorXd& y, LossFamily loss,
                             const FoldPlan& folds, const CvOptions& options = {});

struct CvFit {
    BasisCatalog catalog;
    CvSelection selection;
};

CvFit cv_select_lambda(const Dataset& data, const BasisSpec& spec, LossFamily loss,
                       const FoldPlan& folds, const CvOptions& options = {});

enum class LadderStop {
    worse_than_best,     // stop once a candidate's cv risk exceeds the best so far
    worse_than_previous, // stop once it exceeds the immediately preceding candidate
};

/// Basis specifications in strictly increasing complexity.
struct HalSpecLadder {
    std::vector<BasisSpec> specs;
    LadderStop stop = LadderStop::worse_than_best;

    // Throws ConfigError unless (max_degree, knot rank) strictly increases.
    void validate() const;
};

struct SuperLearnerResult {
    CvReport report; // one entry per evaluated spec
    std::size_t evaluated = 0;
    CvFit best;
};

SuperLearnerResult discrete_super_learner(const Dataset& data, const HalSpecLadder& ladder,
                                          LossFamily loss, const FoldPlan& folds,
                                          const CvOptions& options = {});

// Criterion value of a fit, e.g. |P_n D*| of the plug-in at that fit.
using ScoreCriterion = std::function<double(const HalFit&)>;

struct UndersmoothOptions {
    double threshold_constant = 1.0;
    // Path extension stops once the l1 norm exceeds this multiple of the cv norm.
    double max_norm_factor = 10.0;
    int max_extensions = 60;
};

struct UndersmoothResult {
    HalFit fit;
    double criterion_value = 0.0;
    double threshold = 0.0;
    bool criterion_met = false;
    bool vacuous = false;
    int extensions = 0;
    // (l1_norm, criterion value) for every fit examined.
    std::vector<std::pair<double, double>> trace;
};

// threshold_constant * sigma_n / (sqrt(n) log n).
double undersmooth_threshold(double sigma_n, Index n, double constant = 1.0);

// Smallest-norm fit at or beyond the cv fit whose criterion is within the
// threshold, extending the path by halving lambda when the grid runs out.
UndersmoothResult undersmooth_select(LassoSolver& solver, const LassoPath& path,
                                     std::size_t cv_index, const ScoreCriterion& criterion,
                                     double sigma_n, const UndersmoothOptions& options = {});

// Same with the criterion sup_t |criterion_t|. An empty family returns the cv
// fit flagged vacuous.
UndersmoothResult global_undersmooth_select(LassoSolver& solver, const LassoPath& path,
                                            std::size_t cv_index,
                                            const std::vector<ScoreCriterion>& family,
                                            double sigma_n,
                                            const UndersmoothOptions& options = {});

} // namespace hal
