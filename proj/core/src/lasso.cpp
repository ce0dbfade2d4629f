#include "hal/lasso.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hal {

std::string to_string(LossFamily loss) {
    return loss == LossFamily::binomial ? "binomial" : "gaussian";
}

LossFamily parse_loss(const std::string& text) {
    if (text == "gaussian" || text == "squared") return LossFamily::gaussian;
    if (text == "binomial" || text == "logistic") return LossFamily::binomial;
    throw ConfigError("loss must be 'gaussian' or 'binomial', got '" + text + "'");
}

double pointwise_loss(LossFamily loss, double y, double eta) {
    if (loss == LossFamily::gaussian) {
        const double r = y - eta;
        return r * r;
    }
    // log(1 + e^eta) - y * eta, stable for large |eta|.
    const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    return softplus - y * eta;
}

double pointwise_loss_derivative(LossFamily loss, double y, double eta) {
    if (loss == LossFamily::gaussian) return -2.0 * (y - eta);
    return expit(eta) - y;
}

double inverse_link(LossFamily loss, double eta) {
    return loss == LossFamily::binomial ? expit(eta) : eta;
}

Eigen::VectorXd HalFit::coefficients() const {
    Eigen::VectorXd c(beta.size() + 1);
    c(0) = intercept;
    c.tail(beta.size()) = beta;
    return c;
}

struct LassoSolver::State {
    Eigen::VectorXd beta;
    double b0 = 0.0;
    Eigen::VectorXd eta;
    int sweeps = 0;
};

LassoSolver::LassoSolver(const SparseColumns& design, const Eigen::VectorXd& y, LossFamily loss,
                         FitOptions options, std::uint64_t catalog_ref)
    : x_(design), y_(y), loss_(loss), opts_(options.solver), catalog_ref_(catalog_ref) {
    const Index n = x_.rows();
    const Index p = x_.cols();
    if (!x_.isCompressed()) throw ConfigError("lasso: design matrix must be compressed");
    if (y_.size() != n)
        throw ConfigError("lasso: outcome length " + std::to_string(y_.size()) +
                          " does not match design rows " + std::to_string(n));
    if (loss_ == LossFamily::binomial) {
        for (Index i = 0; i < n; ++i)
            if (y_(i) != 0.0 && y_(i) != 1.0)
                throw DataError("lasso: binomial loss requires outcomes in {0,1} (row " +
                                std::to_string(i + 1) + ")");
    }

    if (options.weights.size() == 0) {
        w_ = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    } else {
        if (options.weights.size() != n) throw ConfigError("lasso: weight vector length mismatch");
        if ((options.weights.array() < 0.0).any() || !options.weights.allFinite())
            throw ConfigError("lasso: weights must be finite and nonnegative");
        const double total = options.weights.sum();
        if (total <= 0.0) throw ConfigError("lasso: weights sum to zero");
        w_ = options.weights / total;
    }

    if (!options.signs.empty()) {
        if (static_cast<Index>(options.signs.size()) != p)
            throw ConfigError("lasso: sign constraint vector length mismatch");
        signs_ = options.signs;
    } else {
        signs_.assign(static_cast<std::size_t>(p), SignConstraint::none);
    }

    if (options.columns.empty()) {
        allowed_.resize(static_cast<std::size_t>(p));
        std::iota(allowed_.begin(), allowed_.end(), Index{0});
    } else {
        allowed_ = options.columns;
        std::sort(allowed_.begin(), allowed_.end());
        allowed_.erase(std::unique(allowed_.begin(), allowed_.end()), allowed_.end());
        for (Index j : allowed_)
            if (j < 0 || j >= p) throw ConfigError("lasso: allowed column out of range");
    }

    gauss_curv_ = Eigen::VectorXd::Zero(p);
    const auto* outer = x_.outerIndexPtr();
    const auto* inner = x_.innerIndexPtr();
    const auto* vals = x_.valuePtr();
    for (Index j : allowed_) {
        double a = 0.0;
        for (auto k = outer[j]; k < outer[j + 1]; ++k) a += w_(inner[k]) * vals[k] * vals[k];
        gauss_curv_(j) = a;
    }

    const double ybar = w_.dot(y_);
    if (loss_ == LossFamily::gaussian) {
        null_intercept_ = ybar;
    } else {
        if (ybar <= 0.0 || ybar >= 1.0)
            throw DataError("lasso: binomial outcome has no variation over the weighted rows");
        null_intercept_ = logit(ybar);
    }
    const Eigen::VectorXd g = gradient(null_intercept_, Eigen::VectorXd::Zero(p));
    lambda_max_ = 0.0;
    for (Index j : allowed_) {
        const double gj = g(j + 1);
        double m = std::abs(gj);
        const auto s = signs_[static_cast<std::size_t>(j)];
        if (s == SignConstraint::nonnegative) m = std::max(-gj, 0.0);
        if (s == SignConstraint::nonpositive) m = std::max(gj, 0.0);
        lambda_max_ = std::max(lambda_max_, m);
    }
}

Eigen::VectorXd LassoSolver::linear_predictor(double intercept, const Eigen::VectorXd& beta) const {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(x_.rows(), intercept);
    const auto* outer = x_.outerIndexPtr();
    const auto* inner = x_.innerIndexPtr();
    const auto* vals = x_.valuePtr();
    for (Index j = 0; j < x_.cols(); ++j) {
        const double b = beta(j);
        if (b == 0.0) continue;
        for (auto k = outer[j]; k < outer[j + 1]; ++k) eta(inner[k]) += b * vals[k];
    }
    return eta;
}

double LassoSolver::column_dot(Index j, const Eigen::VectorXd& v) const {
    const auto* outer = x_.outerIndexPtr();
    const auto* inner = x_.innerIndexPtr();
    const auto* vals = x_.valuePtr();
    double s = 0.0;
    for (auto k = outer[j]; k < outer[j + 1]; ++k) s += vals[k] * v(inner[k]);
    return s;
}

Eigen::VectorXd LassoSolver::gradient(double intercept, const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd eta = linear_predictor(intercept, beta);
    Eigen::VectorXd d(x_.rows());
    for (Index i = 0; i < x_.rows(); ++i)
        d(i) = w_(i) * pointwise_loss_derivative(loss_, y_(i), eta(i));
    Eigen::VectorXd g(x_.cols() + 1);
    g(0) = d.sum();
    for (Index j = 0; j < x_.cols(); ++j) g(j + 1) = column_dot(j, d);
    return g;
}

double LassoSolver::risk(double intercept, const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd eta = linear_predictor(intercept, beta);
    KahanSum s;
    for (Index i = 0; i < x_.rows(); ++i)
        if (w_(i) != 0.0) s.add(w_(i) * pointwise_loss(loss_, y_(i), eta(i)));
    return s.value();
}

double LassoSolver::objective(double lambda, double intercept, const Eigen::VectorXd& beta) const {
    return risk(intercept, beta) + lambda * beta.cwiseAbs().sum();
}

double LassoSolver::threshold(Index j, double c, double t) const {
    switch (signs_[static_cast<std::size_t>(j)]) {
    case SignConstraint::nonnegative: return std::max(c - t, 0.0);
    case SignConstraint::nonpositive: return std::min(c + t, 0.0);
    case SignConstraint::none: break;
    }
    if (c > t) return c - t;
    if (c < -t) return c + t;
    return 0.0;
}

double LassoSolver::violation(Index j, double g, double b, double lambda) const {
    if (b > 0.0) return std::abs(g + lambda);
    if (b < 0.0) return std::abs(g - lambda);
    switch (signs_[static_cast<std::size_t>(j)]) {
    case SignConstraint::nonnegative: return std::max(-g - lambda, 0.0);
    case SignConstraint::nonpositive: return std::max(g - lambda, 0.0);
    case SignConstraint::none: break;
    }
    return std::max(std::abs(g) - lambda, 0.0);
}

double LassoSolver::kkt_residual(double lambda, double intercept, const Eigen::VectorXd& beta) const {
    return kkt_from_gradient(gradient(intercept, beta), beta, lambda);
}

HalFit LassoSolver::null_fit() const {
    State s;
    s.beta = Eigen::VectorXd::Zero(x_.cols());
    s.b0 = null_intercept_;
    s.eta = Eigen::VectorXd::Constant(x_.rows(), null_intercept_);
    return finish(s, lambda_max_);
}

bool LassoSolver::solve_gaussian(State& s, const std::vector<Index>& working, double lambda,
                                 double tol, int budget) {
    const auto* outer = x_.outerIndexPtr();
    const auto* inner = x_.innerIndexPtr();
    const auto* vals = x_.valuePtr();
    Eigen::VectorXd r = y_ - s.eta;
    const double half = 0.5 * lambda;

    auto sweep = [&](const std::vector<Index>& set) {
        const double before = opts_.check_monotone ? objective(lambda, s.b0, s.beta) : 0.0;
        double change = 0.0;
        for (Index j : set) {
            const double a = gauss_curv_(j);
            if (a <= 0.0) continue;
            const double old = s.beta(j);
            double c = a * old;
            for (auto k = outer[j]; k < outer[j + 1]; ++k) c += w_(inner[k]) * vals[k] * r(inner[k]);
            const double nw = threshold(j, c, half) / a;
            if (nw != old) {
                const double d = nw - old;
                for (auto k = outer[j]; k < outer[j + 1]; ++k) r(inner[k]) -= vals[k] * d;
                s.beta(j) = nw;
                change = std::max(change, std::sqrt(a) * std::abs(d));
            }
        }
        const double shift = w_.dot(r);
        if (shift != 0.0) {
            s.b0 += shift;
            r.array() -= shift;
            change = std::max(change, std::abs(shift));
        }
        ++s.sweeps;
        if (opts_.check_monotone) {
            s.eta = y_ - r;
            const double after = objective(lambda, s.b0, s.beta);
            if (after > before + 1e-12 * (1.0 + std::abs(before)))
                throw NumericError("lasso: coordinate sweep increased the objective", after - before);
        }
        return change;
    };

    const int stop = s.sweeps + budget;
    bool converged = false;
    while (!converged && s.sweeps < stop) {
        if (sweep(working) < tol) {
            converged = true;
            break;
        }
        std::vector<Index> active;
        for (Index j : working)
            if (s.beta(j) != 0.0) active.push_back(j);
        while (s.sweeps < stop && sweep(active) >= tol) {
        }
    }
    s.eta = y_ - r;
    return converged;
}

bool LassoSolver::solve_binomial(State& s, const std::vector<Index>& working, double lambda,
                                 double tol, int budget) {
    const auto* outer = x_.outerIndexPtr();
    const auto* inner = x_.innerIndexPtr();
    const auto* vals = x_.valuePtr();
    const Index n = x_.rows();
    Eigen::VectorXd v(n), rz(n);
    Eigen::VectorXd curv = Eigen::VectorXd::Zero(x_.cols());
    const int stop = s.sweeps + budget;

    for (;;) {
        double sum_v = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double mu = expit(s.eta(i));
            const double h = std::max(mu * (1.0 - mu), opts_.weight_floor);
            v(i) = w_(i) * h;
            rz(i) = (y_(i) - mu) / h;
            sum_v += v(i);
        }
        for (Index j : working) {
            double a = 0.0;
            for (auto k = outer[j]; k < outer[j + 1]; ++k) a += v(inner[k]) * vals[k] * vals[k];
            curv(j) = a;
        }
        const Eigen::VectorXd beta_old = s.beta;
        const double b0_old = s.b0;
        const double f_old = objective(lambda, s.b0, s.beta);

        auto sweep = [&](const std::vector<Index>& set) {
            double change = 0.0;
            for (Index j : set) {
                const double a = curv(j);
                if (a <= 0.0) continue;
                const double old = s.beta(j);
                double c = a * old;
                for (auto k = outer[j]; k < outer[j + 1]; ++k) c += v(inner[k]) * vals[k] * rz(inner[k]);
                const double nw = threshold(j, c, lambda) / a;
                if (nw != old) {
                    const double d = nw - old;
                    for (auto k = outer[j]; k < outer[j + 1]; ++k) rz(inner[k]) -= vals[k] * d;
                    s.beta(j) = nw;
                    change = std::max(change, std::sqrt(a) * std::abs(d));
                }
            }
            const double shift = v.dot(rz) / sum_v;
            if (shift != 0.0) {
                s.b0 += shift;
                rz.array() -= shift;
                change = std::max(change, std::sqrt(sum_v) * std::abs(shift));
            }
            ++s.sweeps;
            return change;
        };

        for (;;) {
            if (sweep(working) < tol || s.sweeps >= stop) break;
            std::vector<Index> active;
            for (Index j : working)
                if (s.beta(j) != 0.0) active.push_back(j);
            while (s.sweeps < stop && sweep(active) >= tol) {
            }
        }

        // Backtrack along the proximal Newton step until the true objective
        // does not increase.
        const Eigen::VectorXd beta_new = s.beta;
        const double b0_new = s.b0;
        double step = 1.0;
        double f_new = objective(lambda, s.b0, s.beta);
        int halvings = 0;
        while (f_new > f_old + 1e-13 * (1.0 + std::abs(f_old)) && halvings < 60) {
            step *= 0.5;
            ++halvings;
            s.beta = beta_old + step * (beta_new - beta_old);
            s.b0 = b0_old + step * (b0_new - b0_old);
            f_new = objective(lambda, s.b0, s.beta);
        }
        if (f_new > f_old + 1e-13 * (1.0 + std::abs(f_old))) {
            s.beta = beta_old;
            s.b0 = b0_old;
            f_new = f_old;
        }
        if (opts_.check_monotone && f_new > f_old + 1e-12 * (1.0 + std::abs(f_old)))
            throw NumericError("lasso: IRLS step increased the objective", f_new - f_old);
        s.eta = linear_predictor(s.b0, s.beta);

        double change = std::sqrt(sum_v) * std::abs(s.b0 - b0_old);
        for (Index j : working)
            change = std::max(change, std::sqrt(curv(j)) * std::abs(s.beta(j) - beta_old(j)));
        if (change < tol) return true;
        if (s.sweeps >= stop) return false;
    }
}

double LassoSolver::kkt_from_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& beta,
                                      double lambda) const {
    double worst = std::abs(g(0));
    for (Index j : allowed_) worst = std::max(worst, violation(j, g(j + 1), beta(j), lambda));
    return worst;
}

void LassoSolver::polish(State& s, double lambda) const {
    const Index n = x_.rows();
    std::vector<Index> active;
    for (Index j = 0; j < s.beta.size(); ++j)
        if (s.beta(j) != 0.0) active.push_back(j);
    const double target = 1e-3 * opts_.kkt_tolerance;

    for (int iter = 0; iter < 30; ++iter) {
        const Index k = static_cast<Index>(active.size());
        Eigen::VectorXd d1(n), d2(n);
        for (Index i = 0; i < n; ++i) {
            d1(i) = w_(i) * pointwise_loss_derivative(loss_, y_(i), s.eta(i));
            if (loss_ == LossFamily::gaussian) {
                d2(i) = 2.0 * w_(i);
            } else {
                const double mu = expit(s.eta(i));
                d2(i) = w_(i) * std::max(mu * (1.0 - mu), opts_.weight_floor);
            }
        }
        Eigen::VectorXd sgn(k);
        Eigen::VectorXd grad(k + 1);
        grad(0) = d1.sum();
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, k + 1);
        z.col(0).setOnes();
        for (Index a = 0; a < k; ++a) {
            const Index j = active[static_cast<std::size_t>(a)];
            sgn(a) = s.beta(j) > 0.0 ? 1.0 : -1.0;
            for (SparseColumns::InnerIterator it(x_, j); it; ++it) z(it.row(), a + 1) = it.value();
            grad(a + 1) = z.col(a + 1).dot(d1) + lambda * sgn(a);
        }
        if (grad.cwiseAbs().maxCoeff() <= target) return;

        const Eigen::MatrixXd zw = z.array().colwise() * d2.array().sqrt();
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k + 1, k + 1);
        h.selfadjointView<Eigen::Lower>().rankUpdate(zw.transpose());
        h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
        h.diagonal().array() += 1e-12 * (1.0 + h.diagonal().maxCoeff());
        const Eigen::VectorXd step = -h.ldlt().solve(grad);
        if (!step.allFinite()) return;

        // Projected step: coordinates that would change sign are set to zero.
        const double f0 = objective(lambda, s.b0, s.beta);
        if (!(grad.dot(step) < 0.0)) return;
        double t = 1.0;
        Eigen::VectorXd beta_new = s.beta;
        double b0_new = s.b0;
        bool accepted = false;
        for (int half = 0; half < 40; ++half) {
            beta_new = s.beta;
            double descent = t * step(0) * grad(0);
            for (Index a = 0; a < k; ++a) {
                const Index j = active[static_cast<std::size_t>(a)];
                double nb = s.beta(j) + t * step(a + 1);
                if (nb * s.beta(j) <= 0.0) nb = 0.0;
                descent += (nb - s.beta(j)) * grad(a + 1);
                beta_new(j) = nb;
            }
            b0_new = s.b0 + t * step(0);
            if (objective(lambda, b0_new, beta_new) <= f0 + 1e-4 * std::min(descent, 0.0) + 1e-15 * std::abs(f0)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) return;
        s.beta = beta_new;
        s.b0 = b0_new;
        s.eta = linear_predictor(s.b0, s.beta);
        std::erase_if(active, [&](Index j) { return s.beta(j) == 0.0; });
    }
}

HalFit LassoSolver::solve(double lambda, const HalFit* warm_start) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError("lasso: lambda must be finite and >= 0");
    const Index p = x_.cols();
    State s;
    if (warm_start && warm_start->beta.size() == p) {
        s.beta = warm_start->beta;
        for (Index j = 0; j < p; ++j)
            if (!std::binary_search(allowed_.begin(), allowed_.end(), j)) s.beta(j) = 0.0;
        s.b0 = warm_start->intercept;
    } else {
        s.beta = Eigen::VectorXd::Zero(p);
        s.b0 = null_intercept_;
    }
    s.eta = linear_predictor(s.b0, s.beta);

    std::vector<char> in_working(static_cast<std::size_t>(p), 0);
    std::vector<Index> working;
    auto add = [&](Index j) {
        if (!in_working[static_cast<std::size_t>(j)]) {
            in_working[static_cast<std::size_t>(j)] = 1;
            working.push_back(j);
        }
    };
    const bool screen = last_gradient_ && lambda < last_lambda_;
    for (Index j : allowed_) {
        if (s.beta(j) != 0.0) {
            add(j);
            continue;
        }
        if (!screen) {
            add(j);
            continue;
        }
        const double g = (*last_gradient_)(j + 1);
        double m = std::abs(g);
        const auto sg = signs_[static_cast<std::size_t>(j)];
        if (sg == SignConstraint::nonnegative) m = std::max(-g, 0.0);
        if (sg == SignConstraint::nonpositive) m = std::max(g, 0.0);
        if (m >= 2.0 * lambda - last_lambda_) add(j);
    }
    std::sort(working.begin(), working.end());

    Eigen::VectorXd g;
    for (;;) {
        const bool cd_converged = loss_ == LossFamily::gaussian
                                      ? solve_gaussian(s, working, lambda, opts_.tolerance, kPhaseBudget)
                                      : solve_binomial(s, working, lambda, opts_.tolerance, kPhaseBudget);
        g = gradient(s.b0, s.beta);
        double worst = kkt_from_gradient(g, s.beta, lambda);
        if (worst > opts_.kkt_tolerance && !cd_converged) {
            polish(s, lambda);
            g = gradient(s.b0, s.beta);
            worst = kkt_from_gradient(g, s.beta, lambda);
        }
        bool grew = false;
        for (Index j : allowed_) {
            if (in_working[static_cast<std::size_t>(j)]) continue;
            if (violation(j, g(j + 1), s.beta(j), lambda) > 0.0) {
                add(j);
                grew = true;
            }
        }
        if (grew) {
            std::sort(working.begin(), working.end());
            continue;
        }
        if (worst <= opts_.kkt_tolerance) break;
        if (cd_converged) {
            // Converged coordinate-wise but KKT still off: finish with Newton.
            polish(s, lambda);
            g = gradient(s.b0, s.beta);
            if (kkt_from_gradient(g, s.beta, lambda) <= opts_.kkt_tolerance) break;
        }
        if (s.sweeps >= opts_.max_sweeps)
            throw NumericError("lasso: no convergence within " + std::to_string(opts_.max_sweeps) +
                               " sweeps at lambda=" + std::to_string(lambda) + " (KKT residual " +
                               std::to_string(worst) + ")",
                               worst);
    }
    last_gradient_ = g;
    last_lambda_ = lambda;
    HalFit fit = finish(s, lambda);
    return fit;
}

HalFit LassoSolver::finish(const State& s, double lambda) const {
    HalFit fit;
    fit.beta = s.beta;
    fit.intercept = s.b0;
    fit.lambda = lambda;
    fit.slope_l1_norm = s.beta.cwiseAbs().sum();
    fit.l1_norm = std::abs(s.b0) + fit.slope_l1_norm;
    fit.loss = loss_;
    for (Index j = 0; j < s.beta.size(); ++j)
        if (s.beta(j) != 0.0) fit.active_set.push_back(j);
    fit.train_risk = risk(s.b0, s.beta);
    fit.catalog_ref = catalog_ref_;
    fit.kkt_residual = kkt_residual(lambda, s.b0, s.beta);
    fit.sweeps = s.sweeps;
    fit.converged = true;
    return fit;
}

HalFit fit_lasso(const BasisCatalog& catalog, const Eigen::VectorXd& y, LossFamily loss,
                 double lambda, const FitOptions& options, const HalFit* warm_start) {
    FitOptions opts = options;
    if (opts.signs.empty()) opts.signs = catalog.signs;
    LassoSolver solver(catalog.design, y, loss, opts, catalog.fingerprint);
    if (lambda >= solver.lambda_max() && !warm_start) return solver.null_fit();
    return solver.solve(lambda, warm_start);
}

std::vector<double> lambda_grid(double lambda_max, int grid_size, double min_ratio) {
    if (grid_size < 2) throw ConfigError("lambda grid needs at least 2 points");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw ConfigError("lambda min_ratio must be in (0,1)");
    const double top = lambda_max > 0.0 ? lambda_max : 1e-12;
    std::vector<double> grid(static_cast<std::size_t>(grid_size));
    const double step = std::log(min_ratio) / static_cast<double>(grid_size - 1);
    for (int k = 0; k < grid_size; ++k)
        grid[static_cast<std::size_t>(k)] = top * std::exp(step * k);
    return grid;
}

LassoPath fit_path(LassoSolver& solver, const std::vector<double>& grid) {
    LassoPath path;
    path.lambda_grid = grid;
    const HalFit* warm = nullptr;
    for (double lambda : grid) {
        if (lambda >= solver.lambda_max() && path.fits.empty()) {
            HalFit f = solver.null_fit();
            f.lambda = lambda;
            path.fits.push_back(std::move(f));
        } else {
            path.fits.push_back(solver.solve(lambda, warm));
        }
        warm = &path.fits.back();
    }
    return path;
}

LassoPath fit_path(const BasisCatalog& catalog, const Eigen::VectorXd& y, LossFamily loss,
                   int grid_size, const PathOptions& options) {
    FitOptions opts = options.fit;
    if (opts.signs.empty()) opts.signs = catalog.signs;
    LassoSolver solver(catalog.design, y, loss, opts, catalog.fingerprint);
    const auto grid = options.grid.empty()
                          ? lambda_grid(solver.lambda_max(), grid_size, options.min_ratio)
                          : options.grid;
    return fit_path(solver, grid);
}

HalFit solve_for_norm(LassoSolver& solver, double l1_bound, double relative_tolerance,
                      double lambda_hint, const HalFit* warm_start, int max_bisections,
                      double unpenalized_ratio) {
    if (!(l1_bound >= 0.0)) throw ConfigError("constrained fit: l1_bound must be >= 0");
    const double lmax = solver.lambda_max();
    if (l1_bound == 0.0 || lmax <= 0.0) return solver.null_fit();
    const double lambda_floor = std::max(lmax * unpenalized_ratio, 1e-300);

    auto within = [&](const HalFit& f) {
        return std::abs(f.slope_l1_norm - l1_bound) <= relative_tolerance * l1_bound;
    };
    if (std::isinf(l1_bound)) {
        HalFit f = solver.solve(lambda_floor, warm_start);
        f.bound_slack = true;
        return f;
    }

    // Bracket: lo_lambda gives norm >= bound (or is the floor), hi_lambda gives norm < bound.
    double hi_lambda = lmax;
    double hi_norm = 0.0;
    double lo_lambda = std::clamp(lambda_hint > 0.0 ? lambda_hint : lmax * 0.5, lambda_floor, lmax);
    HalFit best = solver.solve(lo_lambda, warm_start);
    if (within(best)) return best;
    HalFit lo_fit;
    bool have_lo = false;
    if (best.slope_l1_norm < l1_bound) {
        hi_lambda = lo_lambda;
        hi_norm = best.slope_l1_norm;
        while (!have_lo) {
            if (lo_lambda <= lambda_floor) {
                best.bound_slack = true;
                return best;
            }
            lo_lambda = std::max(lo_lambda * 0.25, lambda_floor);
            HalFit f = solver.solve(lo_lambda, &best);
            if (within(f)) return f;
            if (f.slope_l1_norm >= l1_bound) {
                lo_fit = std::move(f);
                have_lo = true;
            } else {
                hi_lambda = lo_lambda;
                hi_norm = f.slope_l1_norm;
                best = std::move(f);
            }
        }
    } else {
        lo_fit = best;
        have_lo = true;
        for (;;) {
            const double up = std::min(hi_lambda, lo_lambda * 4.0);
            if (up >= lmax) {
                hi_lambda = lmax;
                hi_norm = 0.0;
                break;
            }
            HalFit f = solver.solve(up, &lo_fit);
            if (within(f)) return f;
            if (f.slope_l1_norm < l1_bound) {
                hi_lambda = up;
                hi_norm = f.slope_l1_norm;
                break;
            }
            lo_lambda = up;
            lo_fit = std::move(f);
        }
    }

    // Regula falsi on log lambda, with a geometric midpoint every third step
    // so a lopsided bracket still shrinks.
    HalFit current = lo_fit;
    for (int it = 0; it < max_bisections; ++it) {
        double mid = std::sqrt(lo_lambda * hi_lambda);
        const double span = lo_fit.slope_l1_norm - hi_norm;
        if (it % 3 != 2 && span > 0.0) {
            const double t = std::clamp((lo_fit.slope_l1_norm - l1_bound) / span, 0.05, 0.95);
            mid = std::exp(std::log(lo_lambda) + t * (std::log(hi_lambda) - std::log(lo_lambda)));
        }
        HalFit f = solver.solve(mid, &current);
        if (within(f)) return f;
        if (f.slope_l1_norm >= l1_bound) {
            lo_lambda = mid;
            lo_fit = f;
        } else {
            hi_lambda = mid;
            hi_norm = f.slope_l1_norm;
        }
        current = std::move(f);
        if (hi_lambda / lo_lambda - 1.0 < 1e-14) break;
    }
    return lo_fit;
}

HalFit constrained_fit(const BasisCatalog& catalog, const Eigen::VectorXd& y, LossFamily loss,
                       double l1_bound, const ConstrainedOptions& options) {
    FitOptions opts = options.path.fit;
    if (opts.signs.empty()) opts.signs = catalog.signs;
    LassoSolver solver(catalog.design, y, loss, opts, catalog.fingerprint);
    if (!(l1_bound >= 0.0)) throw ConfigError("constrained fit: l1_bound must be >= 0");
    if (l1_bound == 0.0) return solver.null_fit();
    if (std::isinf(l1_bound))
        return solve_for_norm(solver, l1_bound, options.relative_tolerance, 0.0, nullptr,
                              options.max_bisections, options.unpenalized_ratio);

    // Walk the path to bracket the bound, then bisect inside the bracket.
    const auto grid = options.path.grid.empty()
                          ? lambda_grid(solver.lambda_max(), options.grid_size, options.path.min_ratio)
                          : options.path.grid;
    HalFit prev = solver.null_fit();
    for (double lambda : grid) {
        if (lambda >= solver.lambda_max()) continue;
        HalFit f = solver.solve(lambda, &prev);
        if (f.slope_l1_norm >= l1_bound)
            return solve_for_norm(solver, l1_bound, options.relative_tolerance, lambda, &f,
                                  options.max_bisections, options.unpenalized_ratio);
        prev = std::move(f);
    }
    return solve_for_norm(solver, l1_bound, options.relative_tolerance, prev.lambda, &prev,
                          options.max_bisections, options.unpenalized_ratio);
}

} // namespace hal
