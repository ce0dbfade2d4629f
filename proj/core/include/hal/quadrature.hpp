#pragma once

#include <functional>
#include <span>
#include <vector>

namespace hal {

struct QuadratureRule {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights; // sum to 2
};

// n-point Gauss-Legendre rule (Newton iteration on P_n, double precision).
QuadratureRule gauss_legendre(int n);

// Composite rule on [0, 1]: the interval is split at the breakpoints and each
// piece gets `points` nodes. Returns (node, weight) lists.
struct Axis {
    std::vector<double> nodes;
    std::vector<double> weights;
};
Axis unit_axis(int points, std::span<const double> breakpoints = {});

// Tensor-product integral over the unit cube with one axis per dimension.
double integrate_cube(const std::function<double(std::span<const double>)>& f,
                      const std::vector<Axis>& axes);

} // namespace hal
