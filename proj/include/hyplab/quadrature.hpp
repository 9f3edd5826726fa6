#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "hyplab/errors.hpp"

namespace hyplab::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
};

// Adaptive 31-point Gauss-Kronrod on [a, b]. Throws QuadratureFailure when the
// estimated error exceeds max(abs_tol, rel_tol * L1) after refinement.
template <class F>
Result adaptive(F&& f, double a, double b, double rel_tol = 1e-12, double abs_tol = 1e-15,
                unsigned max_depth = 18, const char* what = "adaptive quadrature") {
    if (a == b) return {};
    // Boost's error estimate has an absolute floor near 2e-10 on short intervals,
    // so the integral is always taken over [0, 1] and rescaled.
    const double len = b - a;
    double err = 0.0, l1 = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double x) { return f(a + len * x); }, 0.0, 1.0, max_depth, rel_tol, &err, &l1);
    v *= len;
    err *= std::abs(len);
    l1 *= std::abs(len);
    const double budget = std::max({abs_tol, 50.0 * rel_tol * l1, 1e3 * 2.2e-16 * l1});
    if (!std::isfinite(v) || err > budget) {
        char msg[160];
        std::snprintf(msg, sizeof msg, ": error estimate %.3g exceeds budget %.3g on [%.6g, %.6g]",
                      err, budget, a, b);
        throw QuadratureFailure(std::string(what) + msg);
    }
    return {v, err};
}

// Composite fixed-order Gauss-Legendre on `panels` equal panels of [a, b].
// Deterministic node placement; used where results are cached per node.
template <int N, class F>
double composite_gauss(F&& f, double a, double b, int panels) {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h, r = 0.5 * h;
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0) {
                s += w[i] * f(c);
            } else {
                s += w[i] * (f(c - r * x[i]) + f(c + r * x[i]));
            }
        }
        total += s * r;
    }
    return total;
}

// Nodes and weights of the composite rule above, in increasing order.
template <int N>
void composite_gauss_nodes(double a, double b, int panels, std::vector<double>& nodes,
                           std::vector<double>& weights) {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    nodes.clear();
    weights.clear();
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h, r = 0.5 * h;
        for (std::size_t i = x.size(); i-- > 0;) {
            if (x[i] == 0.0) continue;
            nodes.push_back(c - r * x[i]);
            weights.push_back(r * w[i]);
        }
        if (x[0] == 0.0) {
            nodes.push_back(c);
            weights.push_back(r * w[0]);
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0) continue;
            nodes.push_back(c + r * x[i]);
            weights.push_back(r * w[i]);
        }
    }
}

}  // namespace hyplab::quad
