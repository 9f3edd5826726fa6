#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hyplab/errors.hpp"
#include "hyplab/propagator.hpp"
#include "hyplab/quadrature.hpp"
#include "hyplab/rng.hpp"
#include "hyplab/selberg.hpp"

using namespace hyplab;
using namespace hyplab::propagator;
using geom::Point;

namespace {

constexpr double pi = std::numbers::pi;

template <class F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Lens area in polar coordinates about one centre: the circle of radius rho
// meets B(z2, t) in an arc of angle 2 acos((cosh rho cosh r - cosh t) / (sinh rho sinh r)).
double lens_polar_reference(double t, double r) {
    return simpson(
        [&](double rho) {
            if (rho == 0.0) return 0.0;
            const double c = (std::cosh(rho) * std::cosh(r) - std::cosh(t)) / (std::sinh(rho) * std::sinh(r));
            return std::sinh(rho) * 2.0 * std::acos(std::clamp(c, -1.0, 1.0));
        },
        0.0, t, 400000);
}

double z_score(double a, double ea, double b, double eb) { return std::abs(a - b) / std::hypot(ea, eb); }

Observable bump_at(const Point& c, double a) {
    return {[c, a](const Point& z) {
                const double d = geom::hyp_dist(c, z);
                if (d >= a) return 0.0;
                const double x = 1.0 - (d / a) * (d / a);
                return x * x * x;
            },
            1.0, false};
}

const fuchsian::Lattice& octagon() {
    static const fuchsian::Lattice lat(fuchsian::load_group_spec(HYPLAB_DATA_DIR "/bolza.json"), 9.0);
    return lat;
}

const fuchsian::Lattice& cylinder() {
    static const fuchsian::Lattice lat(fuchsian::load_group_spec(HYPLAB_DATA_DIR "/cyclic_L2.json"), 9.0);
    return lat;
}

}  // namespace

TEST_CASE("P_t of constants and linearity") {
    const Point z{0.3, 1.7};
    for (double t : {0.5, 2.0}) {
        const double expect = geom::ball_volume(t) / std::sqrt(std::cosh(t));
        CHECK(apply_Pt(constant_observable(1.0), z, t, 100, 1).value == doctest::Approx(expect).epsilon(1e-14));
        CHECK(apply_Pt_quadrature(constant_observable(1.0), z, t).value == doctest::Approx(expect).epsilon(1e-12));
    }
    const Observable u = bump_at({0.0, 1.0}, 1.5), v = bump_at({0.5, 2.0}, 1.0);
    const Observable w{[&](const Point& p) { return 2.0 * u(p) - 3.0 * v(p); }, 5.0, false};
    const Point p{0.2, 1.4};
    const Estimate a = apply_Pt(u, p, 1.0, 5000, 7), b = apply_Pt(v, p, 1.0, 5000, 7), c = apply_Pt(w, p, 1.0, 5000, 7);
    CHECK(c.value == doctest::Approx(2.0 * a.value - 3.0 * b.value).epsilon(1e-12));
}

TEST_CASE("P_t acts on spherical functions by the transform") {
    const Point o{0.0, 1.0};
    const Point z = geom::polar_from(o, 0.3, 0.8);
    for (double t : {1.0, 2.0, 3.0}) {
        for (double s : {0.5, 1.0, 2.0}) {
            const selberg::SphericalOracle phi(s, 12.0);
            const Observable u{[&](const Point& w) { return phi(geom::hyp_dist(o, w)); }, 1.0, false};
            const double h = selberg::selberg_forward_adaptive(selberg::disc_kernel(t), s);
            const double expect = h * phi(0.8);
            const Estimate q = apply_Pt_quadrature(u, z, t);
            CHECK(std::abs(q.value - expect) <= 1e-3 * std::abs(expect));
            const Estimate m = apply_Pt(u, z, t, 20000, 11 + static_cast<std::uint64_t>(10 * t + s));
            CHECK(std::abs(m.value - expect) <= 4.0 * m.error);
        }
    }
}

TEST_CASE("P_t is symmetric") {
    const Observable u = bump_at({0.0, 1.0}, 1.0), v = bump_at({0.4, 1.5}, 1.0);
    auto pairing = [](const Observable& f, const Observable& g, const Point& c) {
        // int over B(c, 1) of g * P_t f, polar quadrature around c.
        return quad::composite_gauss<16>(
            [&](double rho) {
                double acc = 0.0;
                const int m = 32;
                for (int j = 0; j < m; ++j) {
                    const Point z = geom::polar_from(c, 2.0 * pi * (j + 0.5) / m, rho);
                    acc += g(z) * apply_Pt_quadrature(f, z, 0.8, 4, 32).value;
                }
                return std::sinh(rho) * 2.0 * pi * acc / m;
            },
            0.0, 1.0, 2);
    };
    const double uv = pairing(u, v, {0.4, 1.5});
    const double vu = pairing(v, u, {0.0, 1.0});
    CHECK(uv > 0.0);
    CHECK(uv == doctest::Approx(vu).epsilon(1e-3));
}

TEST_CASE("lens volume formula") {
    for (double t : {1.0, 3.0}) {
        for (double r : {0.3, 1.0, 1.9, 2.0 * t - 0.05}) {
            const double v = lens_volume(t, r);
            CHECK(v == doctest::Approx(lens_polar_reference(t, r)).epsilon(1e-7));
            CHECK(v >= geom::ball_volume(t - 0.5 * r));
            CHECK(v <= geom::ball_volume(pythagoras_radius(t, r)));
            if (t - 0.5 * r >= 1.0) CHECK(geom::ball_volume(pythagoras_radius(t, r)) <= 4.3 * geom::ball_volume(t - 0.5 * r));
        }
        CHECK(lens_volume(t, 0.0) == geom::ball_volume(t));
        CHECK(lens_volume(t, 2.0 * t) == 0.0);
        CHECK(lens_volume(t, 2.0 * t - 1e-12) < 1e-12);
    }
}

TEST_CASE("intersection volume by sampling") {
    for (double t : {1.0, 3.0}) {
        const AveragingSet full = intersection_volume(t, 0.0, 1000, 3);
        CHECK(full.volume == doctest::Approx(geom::ball_volume(t)).epsilon(1e-14));
        for (double r : {0.5, 1.9, 2.0 * t - 0.01}) {
            const AveragingSet a = intersection_volume(t, r, 100000, 5);
            CHECK(a.error > 0.0);
            CHECK(z_score(a.volume, a.error, lens_volume(t, r), 0.0) <= 4.0);
        }
        CHECK(intersection_volume(t, 2.0 * t, 1000, 3).volume == 0.0);
    }
}

TEST_CASE("lens volume grows like e^{t - r/2}") {
    std::vector<double> x, exact, sampled;
    for (int i = 0; i <= 6; ++i) {
        const double t = 3.0 + 0.5 * i;
        x.push_back(t - 1.0);
        exact.push_back(std::log(lens_volume(t, 2.0)));
        sampled.push_back(std::log(intersection_volume(t, 2.0, 50000, 100 + i).volume));
    }
    const LineFit fe = least_squares(x, exact), fs = least_squares(x, sampled);
    CHECK(fe.slope >= 0.9);
    CHECK(fe.slope <= 1.1);
    CHECK(fs.slope >= 0.9);
    CHECK(fs.slope <= 1.1);
}

TEST_CASE("Pythagoras radius of the lens") {
    for (double t : {1.0, 3.0, 6.0}) {
        for (double r : {0.5, t, 1.9 * t}) {
            const LensGeometry g = lens_geometry(t, r);
            CHECK(std::abs(g.vertex_to_centres - t) <= 1e-9);
            CHECK(std::abs(g.vertex_to_midpoint - g.rho) <= 1e-9);
            CHECK(std::abs(std::cosh(g.rho) - std::cosh(t) / std::cosh(0.5 * r)) <= 1e-9 * std::cosh(t));
            CHECK(g.right_angle_defect <= 1e-9);
        }
    }
}

TEST_CASE("lens lies in the Pythagoras ball") {
    const double t = 2.0, r = 3.0;
    const Point z1{0.0, 1.0}, z2 = geom::polar_from(z1, 0.0, r), m = geom::polar_from(z1, 0.0, 0.5 * r);
    const double rho = pythagoras_radius(t, r);
    int inside = 0;
    for (std::size_t i = 0; i < 20000; ++i) {
        CounterRng rng(17, i);
        const double u1 = rng.uniform(), u2 = rng.uniform();
        const Point p = geom::ball_point(z1, t, u1, u2);
        if (geom::hyp_dist(p, z2) > t) continue;
        ++inside;
        REQUIRE(geom::hyp_dist(p, m) <= rho + 1e-12);
    }
    CHECK(inside > 100);
}

TEST_CASE("kernel of P_t a P_t") {
    const Observable one = constant_observable(1.0);
    const Point z{0.1, 1.2};
    const double t = 1.5;
    SUBCASE("hard zero beyond 2t") {
        const Point w = geom::polar_from(z, 1.0, 2.0 * t + 0.1);
        const LensEstimate e = kernel_PtaPt(one, z, w, t, 1000, 1);
        CHECK(e.value == 0.0);
        CHECK(e.error == 0.0);
        CHECK_FALSE(e.degenerate);
    }
    SUBCASE("degenerate lens") {
        const Point w = geom::polar_from(z, 1.0, 2.0 * t - 1e-13);
        const LensEstimate e = kernel_PtaPt(one, z, w, t, 1000, 1);
        CHECK(e.degenerate);
        CHECK(e.value == 0.0);
    }
    SUBCASE("full ball on the diagonal") {
        const LensEstimate e = kernel_PtaPt(one, z, z, t, 1000, 1);
        CHECK(e.value == doctest::Approx(geom::ball_volume(t) / std::cosh(t)).epsilon(1e-14));
    }
    SUBCASE("symmetric") {
        const Observable a = bump_at({0.3, 1.0}, 2.0);
        const Point w = geom::polar_from(z, 2.0, 1.2);
        const LensEstimate e1 = kernel_PtaPt(a, z, w, t, 50000, 2), e2 = kernel_PtaPt(a, w, z, t, 50000, 3);
        CHECK(z_score(e1.value, e1.error, e2.value, e2.error) <= 4.0);
    }
    SUBCASE("midpoint frame near tangency") {
        const Point w = geom::polar_from(z, 0.4, 2.0 * t - 0.02);
        const LensEstimate e = kernel_PtaPt(one, z, w, t, 50000, 4);
        CHECK(e.midpoint_frame);
        CHECK(z_score(e.volume, e.volume_error, lens_volume(t, 2.0 * t - 0.02), 0.0) <= 4.0);
        CHECK(e.acceptance > 0.01);
    }
}

TEST_CASE("group-invariant observables") {
    const auto& lat = octagon();
    const Observable a = orbit_bump(lat, geom::polar_from(lat.base(), 0.7, 0.9), 1.2);
    const auto gens = fuchsian::alphabet(lat.spec());
    for (std::size_t i = 0; i < 20; ++i) {
        CounterRng rng(5, i);
        const Point z = geom::polar_from(lat.base(), 2.0 * pi * rng.uniform(), 2.5 * rng.uniform());
        const auto& g = gens[i % gens.size()];
        CHECK(std::abs(a(geom::mobius_apply(g, z)) - a(z)) <= 1e-9);
        CHECK(std::abs(a(z)) <= a.sup_bound);
    }
    const Observable c = cell_sign(2.0);
    for (double x : {0.3, -1.0, 2.5}) {
        const Point z{x, 0.7};
        CHECK(c({z.x * std::exp(2.0), z.y * std::exp(2.0)}) == c(z));
    }
}

TEST_CASE("midpoint change of variables") {
    const auto& lat = octagon();
    const double window = lat.covering_radius(5.0);
    const double R = 1.5;
    SUBCASE("constant") {
        const ChangeOfVariables c =
            midpoint_change_of_var_check([](const UnitTangent&, double) { return 1.0; }, R, lat, window, 2000, 1);
        CHECK(c.lhs.value == doctest::Approx(c.rhs.value).epsilon(1e-14));
        CHECK(c.lhs.value == doctest::Approx(c.domain_volume * geom::ball_volume(R)).epsilon(1e-14));
    }
    SUBCASE("angular mode integrates to zero") {
        const TangentFunction f = orbit_tangent_function(lat, {lat.base(), 1.0, 1.0, 0.5, 0.0});
        const TangentFunction g = orbit_tangent_function(lat, {lat.base(), 1.0, 0.0, 0.0, 0.0});
        const ChangeOfVariables c = midpoint_change_of_var_check(
            [&](const UnitTangent& v, double r) { return f(v, r) - g(v, r); }, R, lat, window, 20000, 2);
        CHECK(std::abs(c.lhs.value) <= 4.0 * c.lhs.error);
        CHECK(std::abs(c.rhs.value) <= 4.0 * c.rhs.error);
    }
    SUBCASE("thin part indicator") {
        const TangentFunction f = [&](const UnitTangent& v, double r) {
            return lat.injectivity_radius(v.base, 4.0).value < 1.8 ? std::exp(-r) : 0.0;
        };
        const ChangeOfVariables c = midpoint_change_of_var_check(f, R, lat, window, 20000, 3);
        CHECK(c.lhs.value > 0.0);
        CHECK(z_score(c.lhs.value, c.lhs.error, c.rhs.value, c.rhs.error) <= 3.0);
    }
    SUBCASE("randomized invariant functions") {
        for (std::uint64_t k = 0; k < 3; ++k) {
            CounterRng rng(99, k);
            OrbitWave w;
            w.p = geom::polar_from(lat.base(), 2.0 * pi * rng.uniform(), 2.0 * rng.uniform());
            w.a = 0.5 + rng.uniform();
            w.alpha = rng.uniform();
            w.beta = 2.0 * pi * rng.uniform();
            w.decay = rng.uniform();
            const ChangeOfVariables c =
                midpoint_change_of_var_check(orbit_tangent_function(lat, w), R, lat, window, 20000, 10 + k);
            CHECK(z_score(c.lhs.value, c.lhs.error, c.rhs.value, c.rhs.error) <= 3.0);
        }
    }
}

TEST_CASE("Hilbert-Schmidt estimator on the cylinder") {
    const auto& lat = cylinder();
    const double T = 1.0, W = 2.0;
    HsOptions opt;
    opt.outer = 3000;
    opt.inner = 128;
    opt.thin_samples = 1000;

    SUBCASE("zero observable") {
        const HsEstimate z = hs_norm_estimate(lat, constant_observable(0.0), T, 2.0 * T, W, 1, opt);
        CHECK(z.main == 0.0);
        CHECK(z.remainder_bound == 0.0);
    }
    SUBCASE("quadratic scaling") {
        HsOptions small = opt;
        small.outer = 300;
        const HsEstimate a = hs_norm_estimate(lat, constant_observable(1.0), T, 2.0 * T, W, 2, small);
        const HsEstimate b = hs_norm_estimate(lat, constant_observable(3.0), T, 2.0 * T, W, 2, small);
        CHECK(b.main == doctest::Approx(9.0 * a.main).epsilon(1e-12));
    }
    SUBCASE("agrees with direct integration and bounds the surface norm") {
        const HsEstimate hs = hs_norm_estimate(lat, constant_observable(1.0), T, 2.0 * T, W, 3, opt);
        CHECK(hs.systole == doctest::Approx(2.0).epsilon(1e-9));
        // For a = 1 the time-averaged kernel depends on d(z, w) only.
        auto K = [&](double r) {
            if (r >= 2.0 * T) return 0.0;
            return quad::composite_gauss<16>([&](double t) { return lens_volume(t, r) / std::cosh(t); }, 0.5 * r, T, 2) / T;
        };
        const std::size_t n = 3000;
        const fuchsian::DomainSample ds = fuchsian::sample_domain(lat, W, n, 77);
        std::vector<double> direct(n), surface(n);
        for (std::size_t i = 0; i < n; ++i) {
            CounterRng rng(78, i);
            const double u1 = rng.uniform(), u2 = rng.uniform();
            const Point w = geom::ball_point(ds.points[i], 2.0 * T, u1, u2);
            const double k = K(geom::hyp_dist(ds.points[i], w));
            direct[i] = k * k;
            // Unfolded surface kernel: sum over the translates z -> e^{2j} z.
            double s = 0.0;
            for (int j = -3; j <= 3; ++j) {
                const double f = std::exp(2.0 * j);
                s += K(geom::hyp_dist(ds.points[i], {w.x * f, w.y * f}));
            }
            surface[i] = k * s;
        }
        const double scale = ds.volume * geom::ball_volume(2.0 * T);
        const MeanStat d = mean_stat(direct), s = mean_stat(surface);
        CHECK(z_score(hs.main, hs.main_error, scale * d.mean, scale * d.stderr_) <= 3.0);
        CHECK(hs.main + hs.remainder_bound + 3.0 * hs.main_error >= scale * s.mean - 3.0 * scale * s.stderr_);
    }
}

TEST_CASE("ergodic averages decay on the cylinder") {
    const auto& lat = cylinder();
    const std::vector<double> ts{1.0, 1.5, 2.0, 2.5, 3.0};
    SUBCASE("constant observable") {
        const DecayTable d = ergodic_average_decay(lat, constant_observable(2.0), ts, 1.0, 2.0, 200, 64, 1);
        for (const auto& row : d.rows) CHECK(row.deviation == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("cell sign") {
        const DecayTable d = ergodic_average_decay(lat, cell_sign(2.0), ts, 1.0, 2.0, 1500, 192, 2);
        for (std::size_t k = 0; k < d.rows.size(); ++k) {
            CHECK(d.rows[k].deviation >= 0.0);
            CHECK(d.rows[k].volume == doctest::Approx(lens_volume(ts[k], 1.0)).epsilon(1e-14));
            if (k > 0)
                CHECK(d.rows[k].deviation <=
                      d.rows[k - 1].deviation + 2.0 * (d.rows[k].deviation_error + d.rows[k - 1].deviation_error));
        }
        CHECK(d.exponent > 0.0);
        CHECK(std::abs(d.residual_mean) <= 4.0 * d.residual_mean_error + 1e-12);
    }
}

TEST_CASE("serial and parallel runs agree bitwise") {
    const Observable u = bump_at({0.0, 1.0}, 1.5);
    const Estimate a = apply_Pt(u, {0.2, 1.1}, 1.0, 3000, 5, Exec::serial);
    const Estimate b = apply_Pt(u, {0.2, 1.1}, 1.0, 3000, 5, Exec::parallel);
    CHECK(a.value == b.value);
    CHECK(a.error == b.error);
    const auto& lat = octagon();
    const TangentFunction f = orbit_tangent_function(lat, {lat.base(), 1.0, 0.5, 0.0, 0.3});
    const ChangeOfVariables c1 = midpoint_change_of_var_check(f, 1.0, lat, 2.5, 2000, 9, Exec::serial);
    const ChangeOfVariables c2 = midpoint_change_of_var_check(f, 1.0, lat, 2.5, 2000, 9, Exec::parallel);
    CHECK(c1.lhs.value == c2.lhs.value);
    CHECK(c1.rhs.value == c2.rhs.value);
}
