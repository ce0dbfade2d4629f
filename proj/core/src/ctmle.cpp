#include "hal/ctmle.hpp"

#include "fluctuation.hpp"

#include <cmath>
#include <limits>

namespace hal {

using namespace detail;

namespace {

Fluctuation subset(const Fluctuation& f, const std::vector<Index>& rows) {
    Fluctuation s;
    s.lo = f.lo;
    s.span = f.span;
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    s.y.resize(m);
    s.eta_obs.resize(m);
    s.eta1.resize(m);
    s.eta0.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const Index i = rows[static_cast<std::size_t>(k)];
        s.y(k) = f.y(i);
        s.eta_obs(k) = f.eta_obs(i);
        s.eta1(k) = f.eta1(i);
        s.eta0(k) = f.eta0(i);
    }
    return s;
}

Target subset(const Target& t, const std::vector<Index>& rows) {
    Target s;
    s.arm = t.arm;
    s.tol = t.tol;
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    s.h_obs.resize(m);
    s.h1.resize(m);
    s.h0.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const Index i = rows[static_cast<std::size_t>(k)];
        s.h_obs(k) = t.h_obs(i);
        s.h1(k) = t.h1(i);
        s.h0(k) = t.h0(i);
    }
    return s;
}

// Maximum-likelihood epsilon of the logistic fluctuation eta + eps * h by
// safeguarded Newton steps; the log-likelihood is concave in eps.
double mle_epsilon(const Fluctuation& f, const Target& t) {
    double eps = 0.0;
    double ll = quasi_loglik(f.y, f.eta_obs);
    for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd eta = f.eta_obs + eps * t.h_obs;
        const Eigen::VectorXd q = expit_vec(eta);
        const double grad = t.h_obs.dot(f.y - q);
        const double info = (t.h_obs.array().square() * q.array() * (1.0 - q.array())).sum();
        if (info <= 0.0 || std::abs(grad) <= 1e-12 * static_cast<double>(f.y.size())) break;
        double step = grad / info;
        for (int h = 0; h < 60; ++h) {
            const double ll_new = quasi_loglik(f.y, f.eta_obs + (eps + step) * t.h_obs);
            if (ll_new >= ll) {
                eps += step;
                ll = ll_new;
                break;
            }
            step *= 0.5;
        }
        if (std::abs(step) <= 1e-14 * (1.0 + std::abs(eps))) break;
    }
    return eps;
}

// Applies the fluctuation and returns its log-likelihood gain.
double apply_epsilon(Fluctuation& f, const Target& t, double eps) {
    const double before = quasi_loglik(f.y, f.eta_obs);
    f.eta_obs += eps * t.h_obs;
    f.eta1 += eps * t.h1;
    f.eta0 += eps * t.h0;
    return quasi_loglik(f.y, f.eta_obs) - before;
}

struct Greedy {
    std::vector<CtmleStep> steps;
    std::vector<Fluctuation> states; // state after each step
};

// Each step is the exact TMLE update of one candidate (epsilon at the
// likelihood maximum), so gains are comparable across candidates whatever
// their stopping tolerances.
Greedy run_greedy(const Fluctuation& start, const std::vector<Target>& candidates,
                  const std::vector<PropensityModel>& ladder) {
    Greedy g;
    Fluctuation cur = start;
    std::size_t next = 0;
    while (next < candidates.size()) {
        std::size_t best = next;
        double best_gain = -std::numeric_limits<double>::infinity();
        Fluctuation best_state;
        double best_eps = 0.0;
        for (std::size_t c = next; c < candidates.size(); ++c) {
            Fluctuation trial = cur;
            const double eps = mle_epsilon(trial, candidates[c]);
            const double gain = apply_epsilon(trial, candidates[c], eps);
            if (gain > best_gain) {
                best_gain = gain;
                best = c;
                best_state = std::move(trial);
                best_eps = eps;
            }
        }
        g.steps.push_back({best, ladder[best].label, best_gain, best_eps});
        g.states.push_back(best_state);
        cur = std::move(best_state);
        next = best + 1;
    }
    return g;
}

} // namespace

bool CtmleResult::uses(std::size_t candidate) const {
    for (std::size_t k = 0; k < selected_steps && k < trace.size(); ++k)
        if (trace[k].candidate == candidate) return true;
    return false;
}

CtmleResult ctmle_select(const OutcomeModel& q0, const std::vector<PropensityModel>& ladder,
                         const Dataset& data, const FoldPlan& folds, const TmleOptions& options,
                         int arm) {
    if (ladder.empty()) throw ConfigError("ctmle: empty propensity ladder");
    if (arm != 0 && arm != 1) throw ConfigError("treatment arm must be 0 or 1");
    const Eigen::VectorXd& a = require_treatment(data);
    const Index n = data.rows();
    for (const auto& g : ladder)
        if (g.g.size() != n) throw DataError("ctmle: propensity candidate length differs from data");

    const Fluctuation full = start_fluctuation(q0, data, options.clip);
    std::vector<Target> targets;
    for (const auto& g : ladder) targets.push_back(make_target(arm, a, g));

    CtmleResult res;
    const Greedy greedy = run_greedy(full, targets, ladder);
    res.trace = greedy.steps;
    const std::size_t k_max = greedy.steps.size();

    // Cross-validated loss of each step count. Steps learned on the training
    // rows are replayed on the held-out rows through their epsilons.
    std::vector<KahanSum> loss(k_max);
    if (k_max > 1) {
        for (int v = 1; v <= folds.folds; ++v) {
            const auto train = folds.training_rows(v);
            const auto held = folds.validation_rows(v);
            if (held.empty() || train.empty()) continue;
            std::vector<Target> train_targets;
            for (const auto& t : targets) train_targets.push_back(subset(t, train));
            const Greedy gv = run_greedy(subset(full, train), train_targets, ladder);
            Fluctuation val = subset(full, held);
            std::size_t step = 0;
            for (std::size_t k = 0; k < k_max; ++k) {
                if (step < gv.steps.size()) {
                    const Target t = subset(targets[gv.steps[step].candidate], held);
                    val.eta_obs += gv.steps[step].epsilon * t.h_obs;
                    ++step;
                }
                loss[k].add(-quasi_loglik(val.y, val.eta_obs) * static_cast<double>(held.size()));
            }
        }
    }
    res.selected_steps = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_max; ++k) {
        const double l = loss[k].value() / static_cast<double>(n);
        res.cv_loss.push_back(l);
        if (l < best) {
            best = l;
            res.selected_steps = k + 1;
        }
    }

    const Fluctuation& chosen = greedy.states[res.selected_steps - 1];
    const PropensityModel& g = ladder[res.trace[res.selected_steps - 1].candidate];
    res.q = updated_model(q0, chosen);
    TargetReport& r = res.report;
    r.estimand = arm == 1 ? Estimand::tsm1 : Estimand::tsm0;
    r.method = "ctmle";
    r.psi = res.q.arm(arm).mean();
    r.ic = arm_ic(arm, a, data.outcome(), res.q.q_obs, res.q.arm(arm), g, r.psi);
    r.truncation_hits = g.truncation_hits;
    for (std::size_t k = 0; k < res.selected_steps; ++k) r.loglik_gain += res.trace[k].loglik_gain;
    finalize_report(r);
    r.tol = std::isnan(options.tol) ? default_tol(r.ic, n, options.tol_constant) : options.tol;
    r.tol_met = std::abs(r.pn_dstar) <= r.tol;
    return res;
}

} // namespace hal
