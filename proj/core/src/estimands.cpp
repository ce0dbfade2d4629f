#include "hal/estimands.hpp"

#include "fluctuation.hpp"
#include "hal/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace hal {

namespace detail {

constexpr double kZ975 = 1.959963984540054;

Eigen::VectorXd linear_fit(const SparseColumns& design, const HalFit& fit) {
    Eigen::VectorXd eta = design * fit.beta;
    eta.array() += fit.intercept;
    return eta;
}

Eigen::VectorXd response(LossFamily loss, const Eigen::VectorXd& eta) {
    Eigen::VectorXd q(eta.size());
    for (Index i = 0; i < eta.size(); ++i) q(i) = inverse_link(loss, eta(i));
    return q;
}

const Eigen::VectorXd& require_treatment(const Dataset& data) {
    if (!data.has_treatment()) throw DataError("estimand needs a treatment column");
    return data.treatment();
}

double sample_sd(const Eigen::VectorXd& v) {
    const Index n = v.size();
    if (n < 2) return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(n - 1));
}

void check_arm(int arm) {
    if (arm != 0 && arm != 1) throw ConfigError("treatment arm must be 0 or 1");
}

// Plug-in influence curve for one arm on the original outcome scale.
Eigen::VectorXd arm_ic(int arm, const Eigen::VectorXd& a, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& q_obs, const Eigen::VectorXd& q_arm,
                       const PropensityModel& g, double psi) {
    Eigen::VectorXd ic(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        const double h = a(i) == arm ? 1.0 / g.arm(arm, i) : 0.0;
        ic(i) = h * (y(i) - q_obs(i)) + q_arm(i) - psi;
    }
    return ic;
}

double quasi_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    KahanSum s;
    for (Index i = 0; i < y.size(); ++i) s.add(-pointwise_loss(LossFamily::binomial, y(i), eta(i)));
    return s.value() / static_cast<double>(y.size());
}

Fluctuation start_fluctuation(const OutcomeModel& q, const Dataset& data, double clip) {
    Fluctuation f;
    const Eigen::VectorXd& y = data.outcome();
    const Index n = y.size();
    double bound = 1e-12;
    if (q.kind == OutcomeKind::continuous) {
        f.lo = y.minCoeff();
        f.span = y.maxCoeff() - f.lo;
        if (!(f.span > 0.0)) f.span = 1.0;
        bound = clip;
    }
    f.y = (y.array() - f.lo) / f.span;
    auto to_logit = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd e(n);
        for (Index i = 0; i < n; ++i)
            e(i) = logit(std::clamp((v(i) - f.lo) / f.span, bound, 1.0 - bound));
        return e;
    };
    f.eta_obs = to_logit(q.q_obs);
    f.eta1 = to_logit(q.q1);
    f.eta0 = to_logit(q.q0);
    return f;
}

Eigen::VectorXd expit_vec(const Eigen::VectorXd& eta) {
    Eigen::VectorXd q(eta.size());
    for (Index i = 0; i < eta.size(); ++i) q(i) = expit(eta(i));
    return q;
}

PreservedSpan preserved_span(const OutcomeModel& q, Index n) {
    PreservedSpan s;
    if (!q.fit || !q.catalog || q.fit->active_set.empty()) return s;
    const HalFit& fit = *q.fit;
    Index pivot = fit.active_set.front();
    for (Index j : fit.active_set)
        if (std::abs(fit.beta(j)) > std::abs(fit.beta(pivot))) pivot = j;
    const Index m = static_cast<Index>(fit.active_set.size());
    auto build = [&](const SparseColumns& x) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, m);
        b.col(0).setOnes();
        const Eigen::VectorXd xp = x.col(pivot);
        const double sp = fit.beta(pivot) > 0.0 ? 1.0 : -1.0;
        Index c = 1;
        for (Index j : fit.active_set) {
            if (j == pivot) continue;
            const double sj = fit.beta(j) > 0.0 ? 1.0 : -1.0;
            b.col(c++) = Eigen::VectorXd(x.col(j)) - sj * sp * xp;
        }
        return b;
    };
    s.obs = build(q.catalog->design);
    s.at1 = build(*q.design1);
    s.at0 = build(*q.design0);
    return s;
}

// P_n D*_t on the original scale: span * P_n H_t (y - q).
Eigen::VectorXd target_scores(const std::vector<Target>& targets, const Fluctuation& f,
                              const Eigen::VectorXd& q_obs) {
    Eigen::VectorXd s(static_cast<Index>(targets.size()));
    const Eigen::VectorXd resid = f.y - q_obs;
    for (std::size_t t = 0; t < targets.size(); ++t)
        s(static_cast<Index>(t)) = f.span * targets[t].h_obs.dot(resid) / static_cast<double>(resid.size());
    return s;
}

bool scores_within(const Eigen::VectorXd& s, const std::vector<Target>& targets) {
    for (std::size_t t = 0; t < targets.size(); ++t)
        if (!(std::abs(s(static_cast<Index>(t))) <= targets[t].tol)) return false;
    return true;
}

FluctuationOutcome fluctuate(Fluctuation& f, const std::vector<Target>& targets,
                             const PreservedSpan* span, const TmleOptions& opts) {
    FluctuationOutcome out;
    out.epsilon.assign(targets.size(), 0.0);
    const Index n = f.y.size();
    Eigen::VectorXd q_obs = expit_vec(f.eta_obs);
    Eigen::VectorXd score = target_scores(targets, f, q_obs);
    const double ll_start = quasi_loglik(f.y, f.eta_obs);
    double ll = ll_start;
    double delta = opts.step;
    const bool project = span && !span->empty();

    // Once started, keep stepping until the likelihood peaks along the path
    // (the score changes sign); stopping at the first entry into the
    // tolerance band would leave a residual of one sign in every run.
    bool crossed = false;
    while (!(scores_within(score, targets) && (crossed || out.steps == 0))) {
        if (out.steps >= opts.max_steps) break;
        const Eigen::VectorXd dir = score / score.norm();
        Eigen::VectorXd u_raw = Eigen::VectorXd::Zero(n), u1 = Eigen::VectorXd::Zero(n),
                        u0 = Eigen::VectorXd::Zero(n);
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const double d = dir(static_cast<Index>(t));
            u_raw += d * targets[t].h_obs;
            u1 += d * targets[t].h1;
            u0 += d * targets[t].h0;
        }

        bool accepted = false;
        while (!accepted) {
            Eigen::VectorXd u = u_raw, v1 = u1, v0 = u0;
            if (project) {
                // Secant weights make the preserved scores move by exactly zero
                // on the step actually taken.
                Eigen::VectorXd w = (q_obs.array() * (1.0 - q_obs.array())).matrix();
                Eigen::VectorXd coef;
                for (int it = 0; it < opts.secant_iterations; ++it) {
                    bool ridged = false;
                    u = weighted_residual(span->obs, w, u_raw, &coef, &ridged);
                    out.ridged = out.ridged || ridged;
                    for (Index i = 0; i < n; ++i) {
                        const double du = delta * u(i);
                        if (std::abs(du) > 1e-10) w(i) = (expit(f.eta_obs(i) + du) - q_obs(i)) / du;
                        else w(i) = q_obs(i) * (1.0 - q_obs(i));
                    }
                }
                v1 = u1 - span->at1 * coef;
                v0 = u0 - span->at0 * coef;
            }
            const Eigen::VectorXd eta_new = f.eta_obs + delta * u;
            const double ll_new = quasi_loglik(f.y, eta_new);
            if (ll_new >= ll) {
                f.eta_obs = eta_new;
                f.eta1 += delta * v1;
                f.eta0 += delta * v0;
                ll = ll_new;
                for (std::size_t t = 0; t < targets.size(); ++t)
                    out.epsilon[t] += delta * dir(static_cast<Index>(t));
                accepted = true;
            } else {
                delta *= 0.5;
                if (++out.halvings > opts.max_halvings) {
                    out.loglik_gain = ll - ll_start;
                    return out;
                }
            }
        }
        ++out.steps;
        q_obs = expit_vec(f.eta_obs);
        const Eigen::VectorXd next = target_scores(targets, f, q_obs);
        // Crossing the root: shrink the step so the iteration settles on it.
        if (next.dot(score) <= 0.0) {
            crossed = true;
            delta *= 0.5;
            if (++out.halvings > opts.max_halvings) {
                score = next;
                break;
            }
        }
        score = next;
    }
    out.converged = scores_within(score, targets);
    out.loglik_gain = ll - ll_start;
    return out;
}

Target make_target(int arm, const Eigen::VectorXd& a, const PropensityModel& g) {
    const Index n = a.size();
    Target t;
    t.arm = arm;
    t.h_obs.resize(n);
    t.h1.resize(n);
    t.h0.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double inv = 1.0 / g.arm(arm, i);
        t.h_obs(i) = a(i) == arm ? inv : 0.0;
        t.h1(i) = arm == 1 ? inv : 0.0;
        t.h0(i) = arm == 0 ? inv : 0.0;
    }
    return t;
}

OutcomeModel updated_model(const OutcomeModel& q, const Fluctuation& f) {
    OutcomeModel out = q;
    auto back = [&](const Eigen::VectorXd& eta) {
        Eigen::VectorXd v = expit_vec(eta);
        return Eigen::VectorXd((f.lo + f.span * v.array()).matrix());
    };
    out.q_obs = back(f.eta_obs);
    out.q1 = back(f.eta1);
    out.q0 = back(f.eta0);
    return out;
}

double default_tol(const Eigen::VectorXd& ic, Index n, double constant) {
    const double nn = static_cast<double>(n);
    return constant * sample_sd(ic) / (std::sqrt(nn) * std::log(nn));
}

TmleResult run_tmle(Estimand estimand, const OutcomeModel& q, const PropensityModel& g,
                    const Dataset& data, const TmleOptions& opts, bool preserve) {
    const Eigen::VectorXd& a = require_treatment(data);
    const Eigen::VectorXd& y = data.outcome();
    const Index n = y.size();
    std::vector<int> arms;
    if (estimand == Estimand::ate) arms = {1, 0};
    else arms = {estimand == Estimand::tsm1 ? 1 : 0};

    // Tolerances from the initial influence curves.
    std::vector<Eigen::VectorXd> ic0;
    for (int arm : arms) ic0.push_back(arm_ic(arm, a, y, q.q_obs, q.arm(arm), g, q.arm(arm).mean()));
    double report_tol;
    std::vector<Target> targets;
    if (estimand == Estimand::ate) {
        report_tol = std::isnan(opts.tol) ? default_tol(ic0[0] - ic0[1], n, opts.tol_constant) : opts.tol;
        for (std::size_t k = 0; k < arms.size(); ++k) {
            Target t = make_target(arms[k], a, g);
            const double own = std::isnan(opts.tol) ? default_tol(ic0[k], n, opts.tol_constant) : opts.tol;
            t.tol = std::min(own, 0.5 * report_tol);
            targets.push_back(std::move(t));
        }
    } else {
        report_tol = std::isnan(opts.tol) ? default_tol(ic0[0], n, opts.tol_constant) : opts.tol;
        Target t = make_target(arms[0], a, g);
        t.tol = report_tol;
        targets.push_back(std::move(t));
    }

    Fluctuation f = start_fluctuation(q, data, opts.clip);
    PreservedSpan span;
    if (preserve) span = preserved_span(q, n);
    const FluctuationOutcome fo = fluctuate(f, targets, preserve ? &span : nullptr, opts);

    TmleResult res;
    res.q = (fo.steps == 0) ? q : updated_model(q, f);
    res.epsilon = fo.epsilon;
    TargetReport& r = res.report;
    r.estimand = estimand;
    r.method = preserve ? "tmle_preserving" : "tmle";
    std::vector<double> psis;
    std::vector<Eigen::VectorXd> ics;
    for (int arm : arms) {
        const double psi = res.q.arm(arm).mean();
        psis.push_back(psi);
        ics.push_back(arm_ic(arm, a, y, res.q.q_obs, res.q.arm(arm), g, psi));
    }
    if (estimand == Estimand::ate) {
        r.psi = psis[0] - psis[1];
        r.ic = ics[0] - ics[1];
    } else {
        r.psi = psis[0];
        r.ic = ics[0];
    }
    r.tol = report_tol;
    r.steps = fo.steps;
    r.halvings = fo.halvings;
    r.loglik_gain = fo.loglik_gain;
    r.truncation_hits = g.truncation_hits;
    r.projection_ridged = fo.ridged;
    finalize_report(r);
    r.tol_met = std::abs(r.pn_dstar) <= r.tol;
    if (q.fit && q.catalog)
        r.battery_max = battery_max_at(q, res.q.q_obs, data, opts.battery_size, opts.battery_seed);
    return res;
}

} // namespace detail

using namespace detail;

OutcomeModel make_outcome_model(const Dataset& data, std::shared_ptr<const BasisCatalog> catalog,
                                const HalFit& fit) {
    if (!catalog) throw ConfigError("outcome model: missing catalog");
    if (catalog->rows() != data.rows()) throw DataError("outcome model: catalog rows differ from data");
    OutcomeModel m;
    m.kind = data.outcome_kind();
    m.q_obs = response(fit.loss, linear_fit(catalog->design, fit));
    if (data.has_treatment()) {
        auto d1 = std::make_shared<SparseColumns>(evaluate_design(*catalog, data.regression_design(1.0)));
        auto d0 = std::make_shared<SparseColumns>(evaluate_design(*catalog, data.regression_design(0.0)));
        m.q1 = response(fit.loss, linear_fit(*d1, fit));
        m.q0 = response(fit.loss, linear_fit(*d0, fit));
        m.design1 = std::move(d1);
        m.design0 = std::move(d0);
    } else {
        m.q1 = m.q_obs;
        m.q0 = m.q_obs;
    }
    m.catalog = std::move(catalog);
    m.fit = fit;
    return m;
}

OutcomeModel constant_outcome_model(const Dataset& data, double c) {
    const Index n = data.rows();
    return outcome_from_predictions(data, Eigen::VectorXd::Constant(n, c), Eigen::VectorXd::Constant(n, c),
                                    Eigen::VectorXd::Constant(n, c));
}

OutcomeModel outcome_from_predictions(const Dataset& data, Eigen::VectorXd q_obs, Eigen::VectorXd q1,
                                      Eigen::VectorXd q0) {
    const Index n = data.rows();
    if (q_obs.size() != n || q1.size() != n || q0.size() != n)
        throw DataError("outcome model: prediction length differs from data");
    OutcomeModel m;
    m.kind = data.outcome_kind();
    m.q_obs = std::move(q_obs);
    m.q1 = std::move(q1);
    m.q0 = std::move(q0);
    if (m.kind == OutcomeKind::binary)
        for (const auto* v : {&m.q_obs, &m.q1, &m.q0})
            if ((v->array() <= 0.0).any() || (v->array() >= 1.0).any())
                throw DataError("outcome model: binary predictions must lie in (0,1)");
    return m;
}

PropensityModel make_propensity(Eigen::VectorXd raw, double lo, double hi, std::string label) {
    if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
        throw ConfigError("propensity truncation bounds must satisfy 0 < lo <= hi <= 1");
    PropensityModel g;
    g.lo = lo;
    g.hi = hi;
    g.label = std::move(label);
    g.g.resize(raw.size());
    for (Index i = 0; i < raw.size(); ++i) {
        if (!std::isfinite(raw(i))) throw DataError("propensity: non-finite prediction at row " + std::to_string(i + 1));
        const double t = std::clamp(raw(i), lo, hi);
        if (t != raw(i)) ++g.truncation_hits;
        g.g(i) = t;
    }
    g.raw = std::move(raw);
    return g;
}

std::string to_string(Estimand e) {
    switch (e) {
    case Estimand::tsm1: return "tsm1";
    case Estimand::tsm0: return "tsm0";
    case Estimand::ate: return "ate";
    }
    return "?";
}

Estimand parse_estimand(const std::string& text) {
    if (text == "tsm1" || text == "tsm") return Estimand::tsm1;
    if (text == "tsm0") return Estimand::tsm0;
    if (text == "ate") return Estimand::ate;
    throw ConfigError("estimand: unknown value '" + text + "' (tsm1, tsm0, ate)");
}

std::string to_string(Method m) {
    switch (m) {
    case Method::plugin: return "plugin";
    case Method::ipw: return "ipw";
    case Method::tmle: return "tmle";
    case Method::tmle_preserving: return "tmle_preserving";
    }
    return "?";
}

Method parse_method(const std::string& text) {
    if (text == "plugin") return Method::plugin;
    if (text == "ipw") return Method::ipw;
    if (text == "tmle") return Method::tmle;
    if (text == "tmle_preserving") return Method::tmle_preserving;
    throw ConfigError("method: unknown value '" + text + "' (plugin, ipw, tmle, tmle_preserving, ctmle)");
}

void finalize_report(TargetReport& r) {
    const Index n = r.ic.size();
    if (n < 1) throw DataError("target report: empty influence curve");
    KahanSum s;
    for (Index i = 0; i < n; ++i) s.add(r.ic(i));
    r.pn_dstar = s.value() / static_cast<double>(n);
    r.se = std::sqrt(std::max(0.0, n > 1 ? (r.ic.array() - r.pn_dstar).square().sum() / static_cast<double>(n - 1) : 0.0) /
                     static_cast<double>(n));
    r.ci = {r.psi - kZ975 * r.se, r.psi + kZ975 * r.se};
}

double canonical_gradient_tsm(double a, double y, double qbar1, double gbar, double psi) {
    if (!(gbar > 0.0 && gbar < 1.0)) throw DataError("canonical gradient: Gbar must lie in (0,1)");
    return canonical_gradient_arm(1, a, y, qbar1, gbar, psi);
}

double canonical_gradient_arm(int arm, double a, double y, double qbar_arm, double g_arm, double psi) {
    check_arm(arm);
    if (!(g_arm > 0.0 && g_arm <= 1.0)) throw DataError("canonical gradient: P(A=a|W) must lie in (0,1]");
    const double h = a == arm ? 1.0 / g_arm : 0.0;
    return h * (y - qbar_arm) + qbar_arm - psi;
}

TargetReport plugin_tsm(const OutcomeModel& q, const PropensityModel& g, const Dataset& data, int arm) {
    check_arm(arm);
    const Eigen::VectorXd& a = require_treatment(data);
    TargetReport r;
    r.estimand = arm == 1 ? Estimand::tsm1 : Estimand::tsm0;
    r.method = "plugin";
    r.psi = kahan_mean(std::vector<double>(q.arm(arm).data(), q.arm(arm).data() + q.arm(arm).size()));
    r.ic = arm_ic(arm, a, data.outcome(), q.q_obs, q.arm(arm), g, r.psi);
    r.truncation_hits = g.truncation_hits;
    finalize_report(r);
    r.tol = default_tol(r.ic, data.rows(), 1.0);
    r.tol_met = std::abs(r.pn_dstar) <= r.tol;
    return r;
}

TargetReport ipw_tsm(const PropensityModel& g, const Dataset& data, int arm) {
    check_arm(arm);
    const Eigen::VectorXd& a = require_treatment(data);
    const Eigen::VectorXd& y = data.outcome();
    const Index n = y.size();
    TargetReport r;
    r.estimand = arm == 1 ? Estimand::tsm1 : Estimand::tsm0;
    r.method = "ipw";
    Eigen::VectorXd term(n);
    double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
    KahanSum wsum;
    for (Index i = 0; i < n; ++i) {
        const double w = a(i) == arm ? 1.0 / g.arm(arm, i) : 0.0;
        wmin = std::min(wmin, w);
        wmax = std::max(wmax, w);
        wsum.add(w);
        term(i) = w * y(i);
    }
    r.psi = kahan_mean(std::vector<double>(term.data(), term.data() + n));
    r.ic = term.array() - r.psi;
    r.truncation_hits = g.truncation_hits;
    r.weight_summary = std::array<double, 3>{wmin, wmax, wsum.value() / static_cast<double>(n)};
    finalize_report(r);
    return r;
}

RemainderResult exact_remainder_tsm(const CubeFunction& qbar, const CubeFunction& gbar,
                                    const CubeFunction& qbar0, const CubeFunction& gbar0,
                                    int dimension, int points_per_axis) {
    if (dimension < 1) throw ConfigError("remainder: dimension must be >= 1");
    if (points_per_axis < 4) throw ConfigError("remainder: need at least 4 points per axis");
    auto integrand = [&](std::span<const double> w) {
        const double g = gbar(w);
        if (!(g > 0.0)) throw DataError("remainder: Gbar must be positive");
        return (qbar(w) - qbar0(w)) * (gbar(w) - gbar0(w)) / g;
    };
    auto at = [&](int points) {
        std::vector<Axis> axes(static_cast<std::size_t>(dimension), unit_axis(points));
        return integrate_cube(integrand, axes);
    };
    RemainderResult r;
    r.value = at(points_per_axis);
    r.quadrature_error = std::abs(r.value - at(points_per_axis / 2));
    return r;
}

Eigen::VectorXd weighted_residual(const Eigen::MatrixXd& basis, const Eigen::VectorXd& weights,
                                  const Eigen::VectorXd& h, Eigen::VectorXd* coef, bool* ridged) {
    const Index m = basis.cols();
    if (m == 0) {
        if (coef) coef->resize(0);
        if (ridged) *ridged = false;
        return h;
    }
    const Eigen::MatrixXd bw = basis.array().colwise() * weights.array().sqrt();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(bw.transpose());
    const Eigen::VectorXd rhs = basis.transpose() * (weights.array() * h.array()).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram.selfadjointView<Eigen::Lower>());
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    const double scale = std::max(gram.diagonal().maxCoeff(), 1e-300);
    bool ridge = ldlt.info() != Eigen::Success || d.minCoeff() < 1e-10 * scale;
    if (ridge) {
        Eigen::MatrixXd g2 = gram.selfadjointView<Eigen::Lower>();
        g2.diagonal().array() += 1e-10 * scale;
        ldlt.compute(g2);
    }
    const Eigen::VectorXd c = ldlt.solve(rhs);
    if (ridged) *ridged = ridge;
    if (coef) *coef = c;
    return h - basis * c;
}

double battery_max_at(const OutcomeModel& initial, const Eigen::VectorXd& q_obs, const Dataset& data,
                      int battery_size, std::uint64_t seed) {
    if (!initial.fit || !initial.catalog) return 0.0;
    const HalFit& fit = *initial.fit;
    const auto battery = constrained_battery(fit, battery_size, seed);
    if (battery.empty()) return 0.0;
    Eigen::VectorXd eta(q_obs.size());
    for (Index i = 0; i < q_obs.size(); ++i)
        eta(i) = fit.loss == LossFamily::binomial ? logit(q_obs(i)) : q_obs(i);
    const auto s = battery_scores_at(fit, battery, initial.catalog->design, data.outcome(), eta);
    double m = 0.0;
    for (double v : s) m = std::max(m, std::abs(v));
    return m;
}

TmleResult tmle_update_tsm(const OutcomeModel& q, const PropensityModel& g, const Dataset& data,
                           const TmleOptions& options, int arm) {
    check_arm(arm);
    return run_tmle(arm == 1 ? Estimand::tsm1 : Estimand::tsm0, q, g, data, options, false);
}

TmleResult orthogonalized_tmle_update(const OutcomeModel& q, const PropensityModel& g,
                                      const Dataset& data, const TmleOptions& options, int arm) {
    check_arm(arm);
    return run_tmle(arm == 1 ? Estimand::tsm1 : Estimand::tsm0, q, g, data, options, true);
}

TmleResult ate(const OutcomeModel& q, const PropensityModel& g, const Dataset& data, Method method,
               const TmleOptions& options) {
    return estimate(Estimand::ate, q, g, data, method, options);
}

TmleResult estimate(Estimand estimand, const OutcomeModel& q, const PropensityModel& g,
                    const Dataset& data, Method method, const TmleOptions& options) {
    if (method == Method::tmle || method == Method::tmle_preserving)
        return run_tmle(estimand, q, g, data, options, method == Method::tmle_preserving);
    TmleResult res;
    res.q = q;
    auto single = [&](int arm) {
        return method == Method::plugin ? plugin_tsm(q, g, data, arm) : ipw_tsm(g, data, arm);
    };
    if (estimand != Estimand::ate) {
        res.report = single(estimand == Estimand::tsm1 ? 1 : 0);
    } else {
        const TargetReport r1 = single(1), r0 = single(0);
        TargetReport& r = res.report;
        r.estimand = Estimand::ate;
        r.method = r1.method;
        r.psi = r1.psi - r0.psi;
        r.ic = r1.ic - r0.ic;
        r.truncation_hits = g.truncation_hits;
        finalize_report(r);
        r.tol = default_tol(r.ic, data.rows(), 1.0);
        r.tol_met = std::abs(r.pn_dstar) <= r.tol;
    }
    if (q.fit && q.catalog)
        res.report.battery_max = battery_max_at(q, q.q_obs, data, options.battery_size, options.battery_seed);
    return res;
}

} // namespace hal
