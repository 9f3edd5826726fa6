#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "hyplab/errors.hpp"
#include "hyplab/selberg.hpp"

using namespace hyplab;
using namespace hyplab::selberg;

namespace {

constexpr double pi = std::numbers::pi;

template <class F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// 4 sqrt2 int_0^t cos(su) sqrt(1 - cosh u / cosh t) du with u = t - x^2.
double h_disc_reference(double t, double s) {
    return 4.0 * std::sqrt(2.0) * simpson(
                                      [&](double x) {
                                          const double u = t - x * x;
                                          const double r = 1.0 - std::cosh(u) / std::cosh(t);
                                          return 2.0 * x * std::cos(s * u) * std::sqrt(std::max(0.0, r));
                                      },
                                      0.0, std::sqrt(t));
}

// Laplace integral (1/pi) int_0^pi (cosh r - sinh r cos th)^{-1/2 - is} d th.
double phi_reference(double s, double r) {
    const std::complex<double> e(-0.5, -s);
    return simpson(
               [&](double th) {
                   const double b = std::cosh(r) - std::sinh(r) * std::cos(th);
                   return std::real(std::exp(e * std::log(b)));
               },
               0.0, pi, 4000) /
           pi;
}

double kernel_mass(const RadialKernel& k) {
    return simpson([&](double r) { return 2.0 * pi * std::sinh(r) * k(r); }, 0.0, k.support, 40000);
}

}  // namespace

TEST_CASE("abel transform of the disc kernel") {
    const RadialKernel k = disc_kernel(1.0);
    const double expect = 2.0 * std::sqrt(2.0) * std::sqrt(1.0 - 1.0 / std::cosh(1.0));
    CHECK(abel_transform(k, 0.0) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(expect == doctest::Approx(1.677964782315).epsilon(1e-12));
    for (double u : {0.3, 0.8, 0.99}) {
        const double closed = std::sqrt(2.0 / std::cosh(1.0)) * 2.0 * std::sqrt(std::cosh(1.0) - std::cosh(u));
        CHECK(abel_transform(k, u) == doctest::Approx(closed).epsilon(1e-9));
        CHECK(abel_transform(k, -u) == abel_transform(k, u));
    }
    CHECK(abel_transform(k, 1.0) == 0.0);
    CHECK(abel_transform(k, 2.5) == 0.0);
}

TEST_CASE("abel transform of a gaussian kernel against raw quadrature") {
    const RadialKernel k = gaussian_kernel(1.0, 7.0);
    for (double u : {0.0, 0.5, 2.0}) {
        // cosh rho = cosh u + v^2 written directly, Simpson on the v-line.
        const double vmax = std::sqrt(std::cosh(7.0) - std::cosh(u));
        const double raw = 2.0 * std::sqrt(2.0) * simpson(
                                                      [&](double v) {
                                                          const double rho = std::acosh(std::cosh(u) + v * v);
                                                          return std::exp(-rho * rho);
                                                      },
                                                      0.0, vmax, 200000);
        CHECK(abel_transform(k, u) == doctest::Approx(raw).epsilon(1e-8));
    }
}

TEST_CASE("forward transform of the disc kernel matches the closed form") {
    for (double t : {1.0, 2.0}) {
        const SpectralFunction h = selberg_forward(disc_kernel(t));
        for (double s : {0.5, 1.0, 3.0}) {
            const double ref = h_disc_reference(t, s);
            CHECK(std::abs(h(s) - ref) <= 1e-6);
            CHECK(std::abs(selberg_forward_adaptive(disc_kernel(t), s) - ref) <= 1e-6);
            CHECK(h(-s) == doctest::Approx(h(s)).epsilon(1e-12));
        }
    }
    CHECK(h_disc_reference(1.0, 1.0) == doctest::Approx(2.339772838623).epsilon(1e-9));
}

TEST_CASE("forward transform is linear") {
    RadialKernel zero = gaussian_kernel(1.0, 3.0);
    zero.eval = [](double) { return 0.0; };
    const SpectralFunction h0 = selberg_forward(zero);
    for (double s : {0.0, 1.0, 4.0}) CHECK(h0(s) == 0.0);

    const RadialKernel k = bump_kernel(2.0);
    const SpectralFunction h1 = selberg_forward(k);
    const SpectralFunction h3 = selberg_forward(scaled(k, 3.0));
    for (double s : {0.0, 0.7, 5.0}) CHECK(h3(s) == doctest::Approx(3.0 * h1(s)).epsilon(1e-12));
}

TEST_CASE("inverse abel recovers kernels from their transforms") {
    const RadialKernel disc = disc_kernel(1.0);
    const double c = 1.0 / std::sqrt(std::cosh(1.0));
    for (double rho : {0.0, 0.4, 0.9})
        CHECK(inverse_abel_at(disc, rho) == doctest::Approx(c).epsilon(1e-8));
    CHECK(std::abs(inverse_abel_at(disc, 1.2)) <= 1e-10);

    const RadialKernel g = gaussian_kernel(1.0, 7.0);
    for (double rho : {0.0, 0.5, 2.0})
        CHECK(std::abs(inverse_abel_at(g, rho) - std::exp(-rho * rho)) <= 1e-9);
}

TEST_CASE("forward of inverse reproduces the heat multiplier") {
    const InverseResult r = selberg_inverse(heat_multiplier(1.0), std::sqrt(42.0));
    CHECK(r.roundtrip_error >= 0.0);
    CHECK(r.roundtrip_error <= 1e-5);
    CHECK(r.kernel(0.0) == doctest::Approx(0.0575357552).epsilon(1e-8));
}

TEST_CASE("inverse of forward reproduces smooth kernels") {
    {
        const RadialKernel k = gaussian_kernel(1.0, 7.0);
        InverseOptions opt;
        opt.u_max = 7.5;
        const InverseResult r = selberg_inverse(selberg_forward(k), 14.0, opt);
        double err = 0.0;
        for (double rho = 0.0; rho <= 7.5; rho += 0.01) err = std::max(err, std::abs(r.kernel(rho) - k(rho)));
        CHECK(err <= 1e-5);
        CHECK(r.roundtrip_error <= 1e-5);
    }
    {
        const RadialKernel k = bump_kernel(2.0);
        InverseOptions opt;
        opt.u_max = 2.5;
        opt.verify = false;
        const InverseResult r = selberg_inverse(selberg_forward(k, 96), 100.0, opt);
        double err = 0.0;
        for (double rho = 0.0; rho <= 2.5; rho += 0.005) err = std::max(err, std::abs(r.kernel(rho) - k(rho)));
        CHECK(err <= 1e-5);
    }
}

TEST_CASE("inverse of the zero multiplier is zero") {
    const SpectralFunction zero{[](double) { return 0.0; }, true};
    const InverseResult r = selberg_inverse(zero, 10.0);
    for (double rho : {0.0, 0.5, 3.0}) CHECK(r.kernel(rho) == 0.0);
}

TEST_CASE("too small a band is reported") {
    InverseOptions opt;
    opt.u_max = 7.5;
    CHECK_THROWS_AS(selberg_inverse(selberg_forward(gaussian_kernel(1.0, 7.0)), 3.0, opt), BandTooSmall);
}

TEST_CASE("heat kernel: positivity, mass, semigroup") {
    for (double t : {0.5, 1.0, 2.0}) {
        const RadialKernel& p = heat_kernel_table(t);
        for (double rho = 0.0; rho <= 6.0; rho += 0.01) REQUIRE(heat_kernel(t, rho) > 0.0);
        CHECK(std::abs(kernel_mass(p) - 1.0) <= 1e-6);
    }
    const RadialKernel& p05 = heat_kernel_table(0.5);
    for (double d : {0.0, 1.0}) {
        const double conv = radial_convolution(p05, [](double r) { return heat_kernel(1.0, r); }, d, 64);
        CHECK(conv == doctest::Approx(heat_kernel(1.5, d)).epsilon(1e-4));
    }
}

TEST_CASE("heat kernel agrees with the integral formula") {
    // p_t(r) = sqrt2 e^{-t/4} (4 pi t)^{-3/2} int_r^inf s e^{-s^2/4t} / sqrt(cosh s - cosh r) ds.
    const double t = 1.0;
    for (double r : {0.0, 1.0, 3.0}) {
        const double ref =
            std::sqrt(2.0) * std::exp(-t / 4.0) / std::pow(4.0 * pi * t, 1.5) *
            simpson(
                [&](double x) {
                    const double s = r + x * x;
                    const double d = 2.0 * std::sinh(0.5 * (s + r)) * std::sinh(0.5 * (s - r));
                    const double w = x == 0.0 ? 2.0 / std::sqrt(std::sinh(r) + (r == 0.0 ? 1e300 : 0.0))
                                              : 2.0 * x / std::sqrt(d);
                    return s * std::exp(-s * s / (4.0 * t)) * w;
                },
                0.0, 6.0, 200000);
        CHECK(heat_kernel(t, r) == doctest::Approx(ref).epsilon(1e-6));
    }
}

TEST_CASE("heat bound is finite and stable under refinement") {
    for (double t : {0.5, 1.0, 2.0}) {
        const HeatBound a = fit_heat_bound(t, 6.0, 1e-2);
        const HeatBound b = fit_heat_bound(t, 6.0, 1e-3);
        CHECK(std::isfinite(b.c_gaussian));
        CHECK(b.c_gaussian > 0.0);
        CHECK(b.min_value > 0.0);
        CHECK(a.c_gaussian == doctest::Approx(b.c_gaussian).epsilon(1e-2));
        CHECK(a.c_profile == doctest::Approx(b.c_profile).epsilon(1e-2));
        for (int i = 0; i <= 120; ++i) {
            const double rho = 0.05 * i;
            CHECK(heat_kernel(t, rho) <= b.c_gaussian * std::exp(-rho * rho) * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("spherical oracle") {
    for (double s : {0.5, 1.0, 2.0}) {
        const SphericalOracle phi = spherical_oracle(s, 12.0);
        CHECK(phi(0.0) == 1.0);
        CHECK(phi.max_residual() <= 1e-8);
        for (double r : {0.3, 1.0, 2.5, 5.0})
            CHECK(std::abs(phi(r) - phi_reference(s, r)) <= 1e-9);
    }
    CHECK_THROWS_AS(spherical_oracle(1.0, 13.0), InvalidArgument);
}

TEST_CASE("radial averaging of spherical functions gives the transform") {
    for (double t : {1.0, 2.0}) {
        const RadialKernel k = disc_kernel(t);
        for (double s : {0.5, 1.0, 2.0}) {
            const SphericalOracle phi = spherical_oracle(s, 12.0);
            const double h = h_disc_reference(t, s);
            for (double d : {0.0, 0.7, 1.5}) {
                const double avg = radial_average(k, phi, d);
                CHECK(std::abs(avg - h * phi(d)) <= 1e-4 * std::abs(h * phi(d)));
            }
        }
    }
}
