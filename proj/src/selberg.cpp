#include "hyplab/selberg.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "hyplab/errors.hpp"
#include "hyplab/parallel.hpp"
#include "hyplab/quadrature.hpp"

namespace hyplab::selberg {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double sqrt2 = std::numbers::sqrt2;

// cosh(b) - cosh(a) without cancellation.
double cosh_diff(double b, double a) { return 2.0 * std::sinh(0.5 * (b + a)) * std::sinh(0.5 * (b - a)); }

// rho with cosh rho = cosh u + v^2, accurate near rho = 0.
double rho_from(double u, double v) {
    const double su = std::sinh(0.5 * u);
    const double m = 2.0 * su * su + v * v;
    return std::log1p(m + std::sqrt(m * (m + 2.0)));
}

// Jumps strictly inside (lo, hi), sorted.
std::vector<double> jumps_between(const RadialKernel& k, double lo, double hi) {
    std::vector<double> out;
    for (double j : k.jumps)
        if (j > lo && j < hi) out.push_back(j);
    std::sort(out.begin(), out.end());
    return out;
}

// Adaptive Gauss-Kronrod for analytic kernels; fixed panels of width about
// `step` for tabulated (piecewise cubic) ones.
template <class F>
double piece_integral(F&& f, double a, double b, double span, double step, double rel, double abs,
                      const char* what) {
    if (b <= a) return 0.0;
    if (step > 0.0) {
        const int panels = std::max(1, static_cast<int>(std::ceil(span / step)));
        return quad::composite_gauss<8>(f, a, b, panels);
    }
    return quad::adaptive(f, a, b, rel, abs, 18, what).value;
}

// Integral over [a, b] of f with u = b - x^2, which absorbs an inverse square
// root (or square root) singularity at b.
template <class F>
double right_singular(F&& f, double a, double b, double rel = 1e-12, double abs = 1e-15) {
    if (b <= a) return 0.0;
    const double L = std::sqrt(b - a);
    return quad::adaptive([&](double x) { return 2.0 * x * f(b - x * x); }, 0.0, L, rel, abs, 18,
                          "right-singular piece")
        .value;
}

double kernel_derivative(const RadialKernel& k, double rho) {
    if (k.derivative) return k.derivative(rho);
    const double h = 1e-4;
    for (double j : k.jumps) {
        if (std::abs(rho - j) < h) {
            // One-sided difference away from the jump.
            if (rho < j) return (k(rho) - k(rho - h)) / h;
            return (k(rho + h) - k(rho)) / h;
        }
    }
    // Radial kernels extend evenly through the origin.
    return (k(rho + h) - k(std::abs(rho - h))) / (2.0 * h);
}

// Clamp a radius computed inside the piece [lo, hi] so that rounding cannot
// carry it across a jump at either end.
double clamp_piece(double rho, double lo, double hi) {
    const double eps = 1e-13 * std::max(1.0, hi);
    return std::clamp(rho, lo + eps, std::max(lo + eps, hi - eps));
}

double left_limit(const RadialKernel& k, double j) {
    const double eps = 1e-12 * std::max(1.0, j);
    return k.eval(j - eps);
}

double right_limit(const RadialKernel& k, double j) {
    const double eps = 1e-12 * std::max(1.0, j);
    return k(j + eps);
}

}  // namespace

RadialKernel disc_kernel(double t) {
    require(t > 0.0, "disc_kernel: t must be positive");
    const double c = 1.0 / std::sqrt(std::cosh(t));
    RadialKernel k;
    k.eval = [c, t](double rho) { return rho <= t ? c : 0.0; };
    k.derivative = [](double) { return 0.0; };
    k.support = t;
    k.smoothness = Smoothness::jump;
    k.jumps = {t};
    return k;
}

RadialKernel gaussian_kernel(double width, double support) {
    require(width > 0.0 && support > 0.0, "gaussian_kernel: width and support must be positive");
    RadialKernel k;
    k.eval = [width](double rho) { return std::exp(-(rho * rho) / (width * width)); };
    k.derivative = [width](double rho) {
        return -2.0 * rho / (width * width) * std::exp(-(rho * rho) / (width * width));
    };
    k.support = support;
    return k;
}

RadialKernel bump_kernel(double a) {
    require(a > 0.0, "bump_kernel: radius must be positive");
    RadialKernel k;
    k.eval = [a](double rho) {
        const double x = rho / a;
        if (x >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - x * x));
    };
    k.derivative = [a](double rho) {
        const double x = rho / a;
        if (x >= 1.0) return 0.0;
        const double d = 1.0 - x * x;
        return std::exp(1.0 - 1.0 / d) * (-2.0 * x / (d * d)) / a;
    };
    k.support = a;
    return k;
}

RadialKernel scaled(const RadialKernel& k, double c) {
    RadialKernel out = k;
    auto f = k.eval;
    out.eval = [f, c](double rho) { return c * f(rho); };
    if (k.derivative) {
        auto d = k.derivative;
        out.derivative = [d, c](double rho) { return c * d(rho); };
    }
    return out;
}

SpectralFunction heat_multiplier(double t) {
    require(t > 0.0, "heat_multiplier: t must be positive");
    return {[t](double s) { return std::exp(-t * (0.25 + s * s)); }, true};
}

double abel_transform(const RadialKernel& k, double u) {
    u = std::abs(u);
    const double S = k.support;
    if (u >= S) return 0.0;
    double total = 0.0;
    // Near part rho in [u, u + 1]: cosh rho = cosh u + v^2.
    const double near_end = std::min(S, u + 1.0);
    std::vector<double> rb0{u};
    for (double j : jumps_between(k, u, near_end)) rb0.push_back(j);
    rb0.push_back(near_end);
    for (std::size_t p = 0; p + 1 < rb0.size(); ++p) {
        const double lo = rb0[p], hi = rb0[p + 1];
        total += 2.0 * sqrt2 *
                 piece_integral([&](double v) { return k.eval(clamp_piece(rho_from(u, v), lo, hi)); },
                                std::sqrt(cosh_diff(lo, u)), std::sqrt(cosh_diff(hi, u)), hi - lo,
                                k.table_step, 1e-10, 1e-13, "abel_transform");
    }
    if (S > near_end) {
        std::vector<double> rb{near_end};
        for (double j : jumps_between(k, near_end, S)) rb.push_back(j);
        rb.push_back(S);
        for (std::size_t p = 0; p + 1 < rb.size(); ++p) {
            total += sqrt2 * piece_integral(
                                 [&](double rho) {
                                     return k(rho) * std::sinh(rho) / std::sqrt(cosh_diff(rho, u));
                                 },
                                 rb[p], rb[p + 1], rb[p + 1] - rb[p], k.table_step, 1e-10, 1e-12,
                                 "abel_transform");
        }
    }
    return total;
}

double abel_derivative_over_sinh(const RadialKernel& k, double u) {
    u = std::abs(u);
    const double S = k.support;
    if (u >= S) return 0.0;
    // Smooth part: 2 int_0^sqrt(W) k'(rho)/sinh(rho) dy with cosh rho = cosh u + y^2.
    double smooth = 0.0;
    std::vector<double> rb{u};
    for (double j : jumps_between(k, u, S)) rb.push_back(j);
    rb.push_back(S);
    for (std::size_t p = 0; p + 1 < rb.size(); ++p) {
        const double lo = rb[p], hi = rb[p + 1];
        smooth += quad::adaptive(
                      [&](double y) {
                          const double rho = clamp_piece(rho_from(u, y), lo, hi);
                          if (rho < 1e-6) {
                              // k'(rho)/sinh(rho) -> k''(0) for even kernels.
                              const double h = 1e-4;
                              return 2.0 * (k(h) - k(0.0)) / (h * h);
                          }
                          return kernel_derivative(k, rho) / std::sinh(rho);
                      },
                      std::sqrt(cosh_diff(lo, u)), std::sqrt(cosh_diff(hi, u)), 1e-10, 1e-15, 18,
                      "abel derivative")
                      .value;
    }
    smooth *= 2.0;
    double jumps = 0.0;
    for (double j : jumps_between(k, u, S))
        jumps += (left_limit(k, j) - right_limit(k, j)) / std::sqrt(cosh_diff(j, u));
    const double end = left_limit(k, S);
    if (end != 0.0) jumps += end / std::sqrt(cosh_diff(S, u));
    return sqrt2 * (smooth - jumps);
}

double inverse_abel_at(const RadialKernel& k, double rho) {
    rho = std::abs(rho);
    const double S = k.support;
    if (rho >= S) return 0.0;
    // q blows up like 1/sqrt(v_j - v) from the left of every jump and of the
    // support end; each piece uses v = v_j - x^2.
    const double near_end = std::min(S, rho + 1.0);
    std::vector<double> rb{rho};
    for (double j : jumps_between(k, rho, near_end)) rb.push_back(j);
    rb.push_back(near_end);
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < rb.size(); ++p) {
        const double lo = rb[p], hi = rb[p + 1];
        auto q_of_v = [&](double v) {
            return abel_derivative_over_sinh(k, clamp_piece(rho_from(rho, v), lo, hi));
        };
        total += right_singular(q_of_v, std::sqrt(cosh_diff(lo, rho)), std::sqrt(cosh_diff(hi, rho)),
                                1e-10, 1e-14);
    }
    if (S > near_end) {
        std::vector<double> ub{near_end};
        for (double j : jumps_between(k, near_end, S)) ub.push_back(j);
        ub.push_back(S);
        auto f = [&](double u) {
            return abel_derivative_over_sinh(k, u) * std::sinh(u) / (2.0 * std::sqrt(cosh_diff(u, rho)));
        };
        for (std::size_t p = 0; p + 1 < ub.size(); ++p) total += right_singular(f, ub[p], ub[p + 1], 1e-10, 1e-14);
    }
    return -(sqrt2 / pi) * total;
}

namespace {

struct ForwardNodes {
    std::vector<double> u, w;
};

ForwardNodes forward_nodes(const RadialKernel& k, int panels) {
    ForwardNodes out;
    std::vector<double> breaks{0.0};
    for (double j : jumps_between(k, 0.0, k.support)) breaks.push_back(j);
    breaks.push_back(k.support);
    const bool singular = k.smoothness == Smoothness::jump;
    std::vector<double> x, w;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double a = breaks[p], b = breaks[p + 1];
        if (singular) {
            quad::composite_gauss_nodes<16>(0.0, std::sqrt(b - a), panels, x, w);
            for (std::size_t i = 0; i < x.size(); ++i) {
                out.u.push_back(b - x[i] * x[i]);
                out.w.push_back(2.0 * x[i] * w[i]);
            }
        } else {
            quad::composite_gauss_nodes<16>(a, b, panels, x, w);
            out.u.insert(out.u.end(), x.begin(), x.end());
            out.w.insert(out.w.end(), w.begin(), w.end());
        }
    }
    return out;
}

}  // namespace

SpectralFunction selberg_forward(const RadialKernel& k, int panels) {
    require(k.support > 0.0, "selberg_forward: kernel support must be positive");
    require(panels >= 1, "selberg_forward: need at least one panel");
    ForwardNodes nodes = forward_nodes(k, panels);
    std::vector<double> g = map_indices(nodes.u.size(), [&](std::size_t i) {
        return abel_transform(k, nodes.u[i]);
    });
    auto weights = std::make_shared<std::vector<double>>(nodes.u.size());
    for (std::size_t i = 0; i < g.size(); ++i) (*weights)[i] = 2.0 * nodes.w[i] * g[i];
    auto us = std::make_shared<std::vector<double>>(std::move(nodes.u));
    return {[us, weights](double s) {
                std::vector<double> terms(us->size());
                for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = (*weights)[i] * std::cos(s * (*us)[i]);
                return ordered_sum(terms);
            },
            true};
}

double selberg_forward_adaptive(const RadialKernel& k, double s) {
    std::vector<double> breaks{0.0};
    for (double j : jumps_between(k, 0.0, k.support)) breaks.push_back(j);
    breaks.push_back(k.support);
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p)
        total += right_singular([&](double u) { return std::cos(s * u) * abel_transform(k, u); },
                                breaks[p], breaks[p + 1], 1e-10, 1e-14);
    return 2.0 * total;
}

double sup_error(const SpectralFunction& a, const SpectralFunction& b, double s_max, int samples) {
    require(samples >= 2, "sup_error: need at least two samples");
    std::vector<double> err = map_indices(static_cast<std::size_t>(samples), [&](std::size_t i) {
        const double s = s_max * static_cast<double>(i) / (samples - 1);
        return std::abs(a(s) - b(s));
    });
    return *std::max_element(err.begin(), err.end());
}

namespace {

struct SpectralNodes {
    std::vector<double> s, wh;  // nodes and w_i h(s_i) / pi
};

SpectralNodes spectral_nodes(const SpectralFunction& h, double band, double u_max) {
    const int panels = std::max(64, static_cast<int>(std::ceil(band * u_max / pi)));
    SpectralNodes n;
    std::vector<double> w;
    quad::composite_gauss_nodes<16>(0.0, band, panels, n.s, w);
    n.wh.resize(n.s.size());
    for (std::size_t i = 0; i < n.s.size(); ++i) n.wh[i] = w[i] * h(n.s[i]) / pi;
    return n;
}

double g_from(const SpectralNodes& n, double u) {
    std::vector<double> t(n.s.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = n.wh[i] * std::cos(n.s[i] * u);
    return ordered_sum(t);
}

double q_from(const SpectralNodes& n, double u) {
    std::vector<double> t(n.s.size());
    if (u < 1e-8) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = -n.wh[i] * n.s[i] * n.s[i];
        return ordered_sum(t);
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = -n.wh[i] * n.s[i] * std::sin(n.s[i] * u);
    return ordered_sum(t) / std::sinh(u);
}

using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;

}  // namespace

InverseResult selberg_inverse(const SpectralFunction& h, double band, const InverseOptions& opt) {
    require(band > 0.0, "selberg_inverse: band must be positive");
    require(opt.step > 0.0, "selberg_inverse: step must be positive");
    InverseResult res;
    res.band = band;

    double u_max = opt.u_max;
    if (u_max <= 0.0) {
        const double probe = 40.0;
        const SpectralNodes n = spectral_nodes(h, band, probe);
        const double g0 = std::abs(g_from(n, 0.0));
        u_max = 1.0;
        for (double u = 0.0; u <= probe; u += 0.25)
            if (std::abs(g_from(n, u)) > 1e-14 * std::max(g0, 1e-300)) u_max = u + 1.0;
        u_max = std::min(u_max, probe);
        if (g0 == 0.0) u_max = 1.0;
    }
    res.u_max = u_max;

    const SpectralNodes nodes = spectral_nodes(h, band, u_max);
    const std::size_t nu = static_cast<std::size_t>(std::ceil(u_max / opt.step)) + 1;
    const double du = u_max / static_cast<double>(nu - 1);
    std::vector<double> q = map_indices(nu, [&](std::size_t i) { return q_from(nodes, i * du); });
    auto q_spline = std::make_shared<Spline>(q.begin(), q.end(), 0.0, du, 0.0, 0.0);
    auto qf = [&](double u) { return u >= u_max ? 0.0 : (*q_spline)(u); };

    // k(rho) = -(sqrt 2 / pi) int_0^inf q(u(v)) dv, with the far part in u.
    std::vector<double> k = map_indices(nu, [&](std::size_t i) {
        const double rho = i * du;
        if (rho >= u_max) return 0.0;
        const double near_end = std::min(u_max, rho + 1.0);
        const double V = std::sqrt(cosh_diff(near_end, rho));
        double total = quad::composite_gauss<16>([&](double v) { return qf(rho_from(rho, v)); }, 0.0, V, 24);
        if (u_max > near_end) {
            const int panels = std::max(4, static_cast<int>(std::ceil((u_max - near_end) / 0.25)));
            total += quad::composite_gauss<16>(
                [&](double u) { return qf(u) * std::sinh(u) / (2.0 * std::sqrt(cosh_diff(u, rho))); },
                near_end, u_max, panels);
        }
        return -(sqrt2 / pi) * total;
    });
    auto k_spline = std::make_shared<Spline>(k.begin(), k.end(), 0.0, du, 0.0, 0.0);

    // The far tail of the table is rounding noise of the Fourier sums; it is
    // cut where |k| drops below 1e-14 of its maximum for good.
    double kmax = 0.0;
    for (double v : k) kmax = std::max(kmax, std::abs(v));
    std::size_t last = 0;
    for (std::size_t i = 0; i < k.size(); ++i)
        if (std::abs(k[i]) > 1e-14 * kmax) last = i;
    const double support = std::min(u_max, (last + 1) * du);

    res.kernel.eval = [k_spline, support](double rho) { return rho >= support ? 0.0 : (*k_spline)(rho); };
    res.kernel.derivative = [k_spline, support](double rho) {
        return rho >= support ? 0.0 : k_spline->prime(rho);
    };
    res.kernel.support = support;
    res.kernel.table_step = du;
    res.kernel.smoothness = Smoothness::smooth;

    if (opt.verify) {
        const SpectralFunction back = selberg_forward(res.kernel);
        res.roundtrip_error = sup_error(back, h, 0.5 * band, 101);
        if (!(res.roundtrip_error <= opt.roundtrip_tol))
            throw BandTooSmall("selberg_inverse: roundtrip error " + std::to_string(res.roundtrip_error) +
                               " exceeds " + std::to_string(opt.roundtrip_tol) + " at band " +
                               std::to_string(band));
    }
    return res;
}

const RadialKernel& heat_kernel_table(double t) {
    require(t > 0.0, "heat_kernel: t must be positive");
    static std::mutex mu;
    static std::map<double, std::unique_ptr<const RadialKernel>> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(t);
        if (it != cache.end()) return *it->second;
    }
    // exp(-t s^2) < 1e-18 beyond the band.
    const double band = std::sqrt(42.0 / t);
    InverseOptions opt;
    opt.verify = false;
    auto k = std::make_unique<const RadialKernel>(selberg_inverse(heat_multiplier(t), band, opt).kernel);
    std::lock_guard<std::mutex> lock(mu);
    auto [it, inserted] = cache.emplace(t, std::move(k));
    return *it->second;
}

double heat_kernel(double t, double rho) { return heat_kernel_table(t)(std::abs(rho)); }

HeatBound fit_heat_bound(double t, double rho_max, double step) {
    require(rho_max > 0.0 && step > 0.0, "fit_heat_bound: rho_max and step must be positive");
    const RadialKernel& p = heat_kernel_table(t);
    HeatBound b;
    b.t = t;
    b.rho_max = rho_max;
    b.min_value = p(0.0);
    const double p0 = p(0.0);
    const auto n = static_cast<std::size_t>(std::ceil(rho_max / step));
    for (std::size_t i = 0; i <= n; ++i) {
        const double rho = std::min(rho_max, i * step);
        const double v = p(rho);
        b.c_gaussian = std::max(b.c_gaussian, v * std::exp(rho * rho));
        b.min_value = std::min(b.min_value, v);
    }
    // The profile constant is taken where the table is above rounding level.
    for (double rho = 0.0; rho < p.support; rho += step) {
        const double v = p(rho);
        if (v < 1e-12 * p0) break;
        b.c_profile = std::max(b.c_profile, v * std::exp(rho * rho / (4.0 * t)));
    }
    return b;
}

SphericalOracle::SphericalOracle(double s, double r_max, double ode_tolerance)
    : s_(s), r_max_(r_max), tol_(ode_tolerance), h_(1e-3) {
    require(r_max > 0.0 && r_max <= 12.0, "spherical_oracle: r_max must lie in (0, 12]");
    const double lambda = 0.25 + s * s;
    const auto n = static_cast<std::size_t>(std::ceil(r_max / h_));
    h_ = r_max / static_cast<double>(n);
    phi_.assign(n + 1, 0.0);
    dphi_.assign(n + 1, 0.0);
    phi_[0] = 1.0;
    dphi_[0] = 0.0;

    using State = std::array<double, 2>;
    const double r0 = h_;
    const double c2 = -lambda / 4.0, c4 = lambda * (lambda + 2.0 / 3.0) / 64.0;
    State x{1.0 + c2 * r0 * r0 + c4 * std::pow(r0, 4), 2.0 * c2 * r0 + 4.0 * c4 * std::pow(r0, 3)};
    phi_[1] = x[0];
    dphi_[1] = x[1];
    auto rhs = [lambda](const State& y, State& dy, double r) {
        dy[0] = y[1];
        dy[1] = -y[1] / std::tanh(r) - lambda * y[0];
    };
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = (i + 1) * h_;
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(1e-14, 1e-14, ode::runge_kutta_dopri5<State>());
    std::size_t idx = 1;
    try {
        ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), 1e-4,
                             [&](const State& y, double) {
                                 phi_[idx] = y[0];
                                 dphi_[idx] = y[1];
                                 ++idx;
                             });
    } catch (const std::exception& e) {
        throw OdeFailure(std::string("spherical_oracle: ") + e.what());
    }
    if (idx != n + 1) throw OdeFailure("spherical_oracle: integration stopped early");

    for (std::size_t i = 2; i + 2 <= n; ++i) {
        const double r = i * h_;
        const double d2 =
            (-dphi_[i + 2] + 8.0 * dphi_[i + 1] - 8.0 * dphi_[i - 1] + dphi_[i - 2]) / (12.0 * h_);
        residual_ = std::max(residual_, std::abs(d2 + dphi_[i] / std::tanh(r) + lambda * phi_[i]));
    }
    if (!(residual_ <= tol_))
        throw OdeFailure("spherical_oracle: residual " + std::to_string(residual_) + " above tolerance");
}

double SphericalOracle::operator()(double r) const {
    r = std::abs(r);
    require(r <= r_max_ * (1.0 + 1e-12), "spherical_oracle: argument beyond r_max");
    const std::size_t n = phi_.size() - 1;
    std::size_t i = std::min(n - 1, static_cast<std::size_t>(r / h_));
    const double t = (r - i * h_) / h_;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * phi_[i] + h10 * h_ * dphi_[i] + h01 * phi_[i + 1] + h11 * h_ * dphi_[i + 1];
}

double SphericalOracle::derivative(double r) const {
    const double sign = r < 0 ? -1.0 : 1.0;
    r = std::abs(r);
    require(r <= r_max_ * (1.0 + 1e-12), "spherical_oracle: argument beyond r_max");
    const std::size_t n = phi_.size() - 1;
    std::size_t i = std::min(n - 1, static_cast<std::size_t>(r / h_));
    const double t = (r - i * h_) / h_;
    const double d00 = 6 * t * t - 6 * t, d10 = 3 * t * t - 4 * t + 1;
    const double d01 = -6 * t * t + 6 * t, d11 = 3 * t * t - 2 * t;
    return sign * (d00 * phi_[i] / h_ + d10 * dphi_[i] + d01 * phi_[i + 1] / h_ + d11 * dphi_[i + 1]);
}

SphericalOracle spherical_oracle(double s, double r_max) { return SphericalOracle(s, r_max); }

double radial_convolution(const RadialKernel& k, const std::function<double(double)>& f, double dist,
                          int radial_panels, int angular_nodes) {
    require(angular_nodes >= 4, "radial_convolution: need at least 4 angular nodes");
    const double cd = std::cosh(dist), sd = std::sinh(dist);
    auto ring = [&](double rho) {
        if (dist == 0.0) return 2.0 * pi * f(rho);
        const double cr = std::cosh(rho), sr = std::sinh(rho);
        double acc = 0.0;
        for (int j = 0; j < angular_nodes; ++j) {
            const double th = 2.0 * pi * (j + 0.5) / angular_nodes;
            const double c = std::max(1.0, cr * cd - sr * sd * std::cos(th));
            acc += f(std::acosh(c));
        }
        return 2.0 * pi * acc / angular_nodes;
    };
    std::vector<double> breaks{0.0};
    for (double j : jumps_between(k, 0.0, k.support)) breaks.push_back(j);
    breaks.push_back(k.support);
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p)
        total += quad::composite_gauss<16>(
            [&](double rho) { return k(rho) * std::sinh(rho) * ring(rho); }, breaks[p], breaks[p + 1],
            radial_panels);
    return total;
}

double radial_average(const RadialKernel& k, const SphericalOracle& phi, double dist,
                      int radial_panels, int angular_nodes) {
    require(k.support + dist <= phi.r_max(), "radial_average: oracle range too short");
    return radial_convolution(k, [&](double r) { return phi(r); }, dist, radial_panels, angular_nodes);
}

Roundtrip selberg_roundtrip(const std::string& kernel, double t) {
    const auto start = std::chrono::steady_clock::now();
    Roundtrip r;
    r.kernel = kernel;
    auto sup_on = [](const RadialKernel& a, const RadialKernel& b, double hi, double step) {
        double e = 0.0;
        for (double rho = 0.0; rho <= hi; rho += step) e = std::max(e, std::abs(a(rho) - b(rho)));
        return e;
    };
    if (kernel == "disc") {
        require(t > 0.0, "selberg_roundtrip: t must be positive");
        const RadialKernel k = disc_kernel(t);
        r.direction = "abel";
        for (int i = 0; i <= 60; ++i) {
            const double rho = (t + 0.5) * i / 60.0;
            if (std::abs(rho - t) < 0.02) continue;
            r.sup_error = std::max(r.sup_error, std::abs(inverse_abel_at(k, rho) - k(rho)));
        }
    } else if (kernel == "heat") {
        require(t > 0.0, "selberg_roundtrip: t must be positive");
        r.direction = "forward(inverse)";
        r.band = std::sqrt(42.0 / t);
        r.sup_error = selberg_inverse(heat_multiplier(t), r.band).roundtrip_error;
    } else if (kernel == "gaussian") {
        const RadialKernel k = gaussian_kernel(1.0, 7.0);
        InverseOptions opt;
        opt.u_max = 7.5;
        opt.verify = false;
        r.direction = "inverse(forward)";
        r.band = 14.0;
        r.sup_error = sup_on(selberg_inverse(selberg_forward(k), r.band, opt).kernel, k, 7.5, 0.01);
    } else if (kernel == "bump") {
        const RadialKernel k = bump_kernel(2.0);
        InverseOptions opt;
        opt.u_max = 2.5;
        opt.verify = false;
        r.direction = "inverse(forward)";
        r.band = 100.0;
        r.sup_error = sup_on(selberg_inverse(selberg_forward(k, 96), r.band, opt).kernel, k, 2.5, 0.005);
    } else {
        throw InvalidArgument("selberg_roundtrip: unknown kernel '" + kernel + "'");
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace hyplab::selberg
