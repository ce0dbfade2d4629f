#include "hal/quadrature.hpp"

#include "hal/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hal {

QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw ConfigError("gauss_legendre: n must be >= 1");
    QuadratureRule r;
    r.nodes.resize(static_cast<std::size_t>(n));
    r.weights.resize(static_cast<std::size_t>(n));
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[static_cast<std::size_t>(i)] = -x;
        r.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        r.weights[static_cast<std::size_t>(i)] = w;
        r.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return r;
}

Axis unit_axis(int points, std::span<const double> breakpoints) {
    std::vector<double> cuts{0.0, 1.0};
    for (double b : breakpoints)
        if (b > 0.0 && b < 1.0) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const QuadratureRule rule = gauss_legendre(points);
    Axis axis;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double a = cuts[c], b = cuts[c + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            axis.nodes.push_back(mid + half * rule.nodes[k]);
            axis.weights.push_back(half * rule.weights[k]);
        }
    }
    return axis;
}

double integrate_cube(const std::function<double(std::span<const double>)>& f,
                      const std::vector<Axis>& axes) {
    const std::size_t d = axes.size();
    if (d == 0) throw ConfigError("integrate_cube: no axes");
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d);
    KahanSum total;
    for (;;) {
        double w = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = axes[k].nodes[idx[k]];
            w *= axes[k].weights[idx[k]];
        }
        total.add(w * f(x));
        std::size_t k = 0;
        while (k < d && ++idx[k] == axes[k].nodes.size()) idx[k++] = 0;
        if (k == d) break;
    }
    return total.value();
}

} // namespace hal
