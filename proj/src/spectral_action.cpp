#include "hyplab/spectral_action.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include "hyplab/errors.hpp"
#include "hyplab/quadrature.hpp"

namespace hyplab::spectral {

namespace {

constexpr double pi = std::numbers::pi;
const double prefactor = 4.0 * std::sqrt(2.0);
// Below t - window the integrand sqrt(1 - cosh u / cosh t) equals 1 to within e^{-window}.
constexpr double window = 40.0;
constexpr double far_t = 60.0;

// int_0^x cos(s u) du
double sin_over(double s, double x) { return s == 0.0 ? x : std::sin(s * x) / s; }

// 1 - cosh(t - w) / cosh t without cancellation or overflow.
double one_minus_ratio(double t, double w) {
    return -std::expm1(-w) * (1.0 - std::exp(-(2.0 * t - w))) / (1.0 + std::exp(-2.0 * t));
}

// cosh(t - w) / cosh t
double ratio(double t, double w) {
    return std::exp(-w) * (1.0 + std::exp(-2.0 * (t - w))) / (1.0 + std::exp(-2.0 * t));
}

// Panel boundaries on [0, V] in the variable v with u = t - v^2: equal steps in
// v^2, about one half oscillation of cos(s v^2) each.
std::vector<double> v_panels(double s, double V) {
    const int n = 4 + static_cast<int>(std::ceil(std::abs(s) * V * V / pi));
    std::vector<double> b(n + 1);
    for (int j = 0; j <= n; ++j) b[j] = V * std::sqrt(static_cast<double>(j) / n);
    b[n] = V;
    return b;
}

template <class F>
double panel_sum(F&& f, const std::vector<double>& b, bool adaptive, const char* what) {
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
        if (adaptive)
            total += quad::adaptive(f, b[j], b[j + 1], 1e-12, 1e-15, 18, what).value;
        else
            total += quad::composite_gauss<16>(f, b[j], b[j + 1], 1);
    }
    return total;
}

// int_0^t cos(su) sqrt(1 - cosh u / cosh t) du
double near_integral(double t, double s, bool adaptive) {
    const double W = std::min(t, window);
    const double bulk = t > window ? sin_over(s, t - window) : 0.0;
    auto f = [&](double v) {
        const double w = v * v;
        return 2.0 * v * std::cos(s * (t - w)) * std::sqrt(std::max(0.0, one_minus_ratio(t, w)));
    };
    return bulk + panel_sum(f, v_panels(s, std::sqrt(W)), adaptive, "h_t_closed");
}

}  // namespace

std::vector<double> chebyshev_grid(const SpectralInterval& I, int n) {
    require(n >= 2, "chebyshev_grid: need at least two points");
    std::vector<double> g(n);
    for (int j = 0; j < n; ++j) {
        const double x = -std::cos(pi * j / (n - 1));
        g[j] = 0.5 * (I.a + I.b) + 0.5 * (I.b - I.a) * x;
    }
    g.front() = I.a;
    g.back() = I.b;
    return g;
}

double h_t_closed(double t, double s) {
    require(t > 0.0, "h_t_closed: t must be positive");
    return prefactor * near_integral(t, s, true);
}

double h_t_derivative(double t, double s) {
    require(t > 0.0, "h_t_derivative: t must be positive");
    const double W = std::min(t, window);
    auto f = [&](double v) {
        const double w = v * v;
        if (v == 0.0) return 2.0 * std::cos(s * t) / std::sqrt(std::tanh(t));
        return 2.0 * v * std::cos(s * (t - w)) * ratio(t, w) / std::sqrt(one_minus_ratio(t, w));
    };
    const double I = panel_sum(f, v_panels(s, std::sqrt(W)), true, "h_t_derivative");
    return 0.5 * prefactor * std::tanh(t) * I;
}

HtEvaluator::HtEvaluator(double s) : s_(s) {
    auto profile = [](double x) { return 2.0 * x * std::sqrt(-std::expm1(-x * x)); };
    const auto b = v_panels(s, std::sqrt(window));
    A_ = panel_sum([&](double x) { return profile(x) * std::cos(s * x * x); }, b, true, "HtEvaluator");
    B_ = panel_sum([&](double x) { return profile(x) * std::sin(s * x * x); }, b, true, "HtEvaluator");
}

double HtEvaluator::operator()(double t) const {
    if (t < far_t) return prefactor * near_integral(t, s_, false);
    return prefactor * (sin_over(s_, t - window) + std::cos(s_ * t) * A_ + std::sin(s_ * t) * B_);
}

LipschitzResult lipschitz_bound(const std::vector<double>& s_grid, double t_lo, double t_hi, int t_points,
                                double delta, Exec exec) {
    require(t_lo > 1.0 && t_hi >= t_lo, "lipschitz_bound: t range must lie in (1, inf)");
    require(t_points >= 1 && delta > 0.0, "lipschitz_bound: bad resolution");
    std::vector<LipschitzResult> per_s(s_grid.size());
    for_each_index(
        s_grid.size(),
        [&](std::size_t i) {
            const HtEvaluator h(s_grid[i]);
            LipschitzResult r;
            r.s_at_max = s_grid[i];
            for (int j = 0; j < t_points; ++j) {
                const double t = t_points == 1 ? t_lo : t_lo + (t_hi - t_lo) * j / (t_points - 1);
                const double q = std::abs(h(t + delta) - h(t)) / delta;
                if (q > r.bound) {
                    r.bound = q;
                    r.t_at_max = t;
                }
            }
            per_s[i] = r;
        },
        exec);
    LipschitzResult best;
    for (const auto& r : per_s)
        if (r.bound > best.bound) best = r;
    return best;
}

double period_sequence(double s, int k) {
    require(s > 0.0 && k >= 1, "period_sequence: need s > 0 and k >= 1");
    return 2.0 * pi * k / s;
}

double c_of_s(double s) {
    require(s > 0.0, "c_of_s: s must be positive");
    // v = P - x^2 on [0, P], P = 2 pi / s.
    const double P = 2.0 * pi / s;
    auto f = [&](double x) {
        const double w = x * x;
        return 2.0 * x * std::cos(s * (P - w)) * std::sqrt(-std::expm1(-w));
    };
    return -0.5 * panel_sum(f, v_panels(s, std::sqrt(P)), true, "c_of_s");
}

double c_of_s_by_parts(double s) {
    require(s > 0.0, "c_of_s_by_parts: s must be positive");
    // x = 2 pi - y^2; E / sqrt(1 - E) with E = e^{-y^2/s}.
    auto f = [&](double y) {
        const double w = y * y / s;
        const double E = std::exp(-w);
        const double g = y == 0.0 ? 2.0 * std::sqrt(s) : 2.0 * y * E / std::sqrt(-std::expm1(-w));
        return std::sin(y * y) * g;
    };
    const double V = std::sqrt(2.0 * pi);
    const double I = panel_sum(f, v_panels(1.0, V), true, "c_of_s_by_parts");
    return I / (4.0 * s * s);
}

double period_profile_deviation(double s, int k, int v_points) {
    require(s > 0.0 && k >= 1 && v_points >= 2, "period_profile_deviation: bad arguments");
    const double P = 2.0 * pi / s;
    const double tk = period_sequence(s, k);
    const double tk1 = tk - P;
    double dev = 0.0;
    for (int j = 0; j < v_points; ++j) {
        const double v = P * j / (v_points - 1);
        const double fk = std::sqrt(std::max(0.0, one_minus_ratio(tk, tk - (v + tk1))));
        const double f = std::sqrt(std::max(0.0, -std::expm1(v - P)));
        dev = std::max(dev, std::abs(fk - f));
    }
    return dev;
}

namespace {

// min of values over the grid and a neighbour-slope enclosure of the continuous minimum.
struct GridMin {
    double value = std::numeric_limits<double>::infinity();
    double s = 0.0;
    double certified = 0.0;
};

GridMin grid_minimum(const std::vector<double>& s, const std::vector<double>& f) {
    GridMin m;
    double slope = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (f[i] < m.value) {
            m.value = f[i];
            m.s = s[i];
        }
        if (i + 1 < s.size()) {
            const double ds = s[i + 1] - s[i];
            gap = std::max(gap, ds);
            if (ds > 0.0) slope = std::max(slope, std::abs(f[i + 1] - f[i]) / ds);
        }
    }
    m.certified = m.value - slope * gap / 2.0;
    return m;
}

}  // namespace

PeriodBound verify_period_bound(const SpectralInterval& I, int k_max, int grid, double tol, Exec exec) {
    require(I.a > 0.0 && I.a <= I.b, "verify_period_bound: need 0 < a <= b");
    require(k_max >= 10, "verify_period_bound: k_max must be at least 10");
    const std::vector<double> s = chebyshev_grid(I, grid);
    const std::vector<double> c = map_indices(s.size(), [&](std::size_t i) { return c_of_s(s[i]); }, exec);

    PeriodBound pb;
    pb.interval = I;
    pb.k_max = k_max;
    pb.tol = tol;
    const GridMin m = grid_minimum(s, c);
    pb.c_I = m.value;
    pb.s_at_min = m.s;
    pb.c_I_certified = m.certified;

    // H[i * k_max + (k - 1)] = h_{t_k}(s_i)
    std::vector<double> H(s.size() * k_max);
    for_each_index(
        s.size(),
        [&](std::size_t i) {
            const HtEvaluator h(s[i]);
            for (int k = 1; k <= k_max; ++k) H[i * k_max + (k - 1)] = h(period_sequence(s[i], k));
        },
        exec);

    const double level = -2.0 * pb.c_I + tol;
    auto passes = [&](int k) {
        for (std::size_t i = 0; i < s.size(); ++i)
            if (!(H[i * k_max + (k - 1)] < level)) return false;
        return true;
    };
    if (!passes(k_max)) {
        std::string msg = "verify_period_bound: h_{t_k}(s) >= -2 c_I at k_max for s =";
        int shown = 0;
        for (std::size_t i = 0; i < s.size() && shown < 8; ++i) {
            if (H[i * k_max + (k_max - 1)] < level) continue;
            char buf[48];
            std::snprintf(buf, sizeof buf, " %.6g", s[i]);
            msg += buf;
            ++shown;
        }
        throw BoundNotReached(msg);
    }
    int k0 = k_max;
    while (k0 > 1 && passes(k0 - 1)) --k0;
    pb.k0 = k0;
    pb.max_h_from_k0 = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (int k = 1; k <= k_max; ++k) {
            const double v = H[i * k_max + (k - 1)];
            if (k >= k0)
                pb.max_h_from_k0 = std::max(pb.max_h_from_k0, v);
            else if (!(v < level))
                pb.violations.push_back({k, s[i], v});
        }
    }
    return pb;
}

ChainConstants chain_constants(const PeriodBound& pb, const LipschitzResult& L) {
    require(L.bound > 0.0, "chain_constants: Lipschitz bound must be positive");
    ChainConstants c;
    c.c_I = pb.c_I;
    c.lipschitz = L.bound;
    c.J_half_width = pb.c_I / (2.0 * L.bound);
    // J + t_k must lie in (1, inf) where the Lipschitz bound holds; t_k >= 2 pi k / b.
    int k1 = std::max(1, pb.k0);
    while (period_sequence(pb.interval.b, k1) - c.J_half_width <= 1.0) ++k1;
    c.k1 = k1;
    c.T_I = 4.0 * pi * k1 / pb.interval.a;
    return c;
}

std::vector<double> time_average(double s, const std::vector<double>& Ts) {
    for (double T : Ts) require(T > 0.0, "time_average: T must be positive");
    if (Ts.empty()) return {};
    const double T_max = *std::max_element(Ts.begin(), Ts.end());
    std::vector<double> cuts;
    for (int j = 0; j <= static_cast<int>(std::floor(T_max)); ++j) cuts.push_back(j);
    cuts.insert(cuts.end(), Ts.begin(), Ts.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const HtEvaluator h(s);
    std::vector<double> running(cuts.size(), 0.0);
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
        const double piece = quad::composite_gauss<16>(
            [&](double t) {
                const double v = h(t);
                return v * v;
            },
            cuts[j], cuts[j + 1], 1);
        running[j + 1] = running[j] + piece;
    }
    std::vector<double> out;
    for (double T : Ts) {
        const auto it = std::lower_bound(cuts.begin(), cuts.end(), T);
        out.push_back(running[it - cuts.begin()] / T);
    }
    return out;
}

std::vector<TimeAverage> time_avg_lower_bound(const SpectralInterval& I, const std::vector<double>& Ts,
                                              const ChainConstants& chain, int grid, Exec exec) {
    require(I.a > 0.0 && I.a <= I.b, "time_avg_lower_bound: need 0 < a <= b");
    const std::vector<double> s = chebyshev_grid(I, grid);
    std::vector<std::vector<double>> avg(s.size());
    for_each_index(s.size(), [&](std::size_t i) { avg[i] = time_average(s[i], Ts); }, exec);

    std::vector<TimeAverage> out;
    for (std::size_t j = 0; j < Ts.size(); ++j) {
        std::vector<double> f(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) f[i] = avg[i][j];
        const GridMin m = grid_minimum(s, f);
        TimeAverage r;
        r.T = Ts[j];
        r.value = m.value;
        r.s_min = m.s;
        r.certified = m.certified;
        r.chain = (m.s / (4.0 * pi) - chain.k1 / Ts[j]) * 2.0 * chain.J_half_width * chain.c_I * chain.c_I;
        out.push_back(r);
    }
    return out;
}

}  // namespace hyplab::spectral
