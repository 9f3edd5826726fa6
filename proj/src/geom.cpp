#include "hyplab/geom.hpp"

#include <algorithm>
#include <cmath>

#include "hyplab/errors.hpp"
#include "hyplab/rng.hpp"

namespace hyplab::geom {

bool Point::valid() const { return std::isfinite(x) && std::isfinite(y) && y > 0.0; }

double normalize_angle(double theta) {
    double t = std::fmod(theta, two_pi);
    if (t < 0.0) t += two_pi;
    if (t >= two_pi) t = 0.0;
    return t;
}

namespace {

void canonical_sign(double& a, double& b, double& c, double& d) {
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
    const double eps = 1e-14 * scale;
    for (double v : {a, b, c, d}) {
        if (std::abs(v) > eps) {
            if (v < 0.0) {
                a = -a;
                b = -b;
                c = -c;
                d = -d;
            }
            return;
        }
    }
}

}  // namespace

Mobius::Mobius(double a, double b, double c, double d) {
    const double det = a * d - b * c;
    require(std::isfinite(det) && det > 0.0, "Mobius: matrix must have positive determinant");
    const double s = 1.0 / std::sqrt(det);
    a_ = a * s;
    b_ = b * s;
    c_ = c * s;
    d_ = d * s;
    canonical_sign(a_, b_, c_, d_);
}

Mobius Mobius::raw(double a, double b, double c, double d) {
    Mobius m;
    m.a_ = a;
    m.b_ = b;
    m.c_ = c;
    m.d_ = d;
    canonical_sign(m.a_, m.b_, m.c_, m.d_);
    return m;
}

Mobius Mobius::translation_along_imaginary_axis(double length) {
    return raw(std::exp(0.5 * length), 0.0, 0.0, std::exp(-0.5 * length));
}

Mobius Mobius::rotation_about_i(double angle) {
    const double phi = 0.5 * angle;
    return raw(std::cos(phi), std::sin(phi), -std::sin(phi), std::cos(phi));
}

Mobius Mobius::affine_to(const Point& p) {
    const double s = std::sqrt(p.y);
    return raw(s, p.x / s, 0.0, 1.0 / s);
}

Mobius Mobius::operator*(const Mobius& o) const {
    return Mobius(a_ * o.a_ + b_ * o.c_, a_ * o.b_ + b_ * o.d_, c_ * o.a_ + d_ * o.c_,
                  c_ * o.b_ + d_ * o.d_);
}

bool Mobius::approx_equal(const Mobius& o, double tol) const {
    const double plus = std::max({std::abs(a_ - o.a_), std::abs(b_ - o.b_), std::abs(c_ - o.c_),
                                  std::abs(d_ - o.d_)});
    const double minus = std::max({std::abs(a_ + o.a_), std::abs(b_ + o.b_),
                                   std::abs(c_ + o.c_), std::abs(d_ + o.d_)});
    const double scale = std::max(
        {1.0, std::abs(a_), std::abs(b_), std::abs(c_), std::abs(d_)});
    return std::min(plus, minus) <= tol * scale;
}

double Mobius::translation_length() const {
    const double t = std::abs(trace());
    return t > 2.0 ? 2.0 * std::acosh(0.5 * t) : 0.0;
}

Point mobius_apply(const Mobius& g, const Point& z) {
    const Complex w = z.z();
    const Complex num = g.a() * w + g.b();
    const Complex den = g.c() * w + g.d();
    const double den2 = std::norm(den);
    // Im((az+b)/(cz+d)) = y / |cz+d|^2 for determinant one.
    const Complex q = num * std::conj(den) / den2;
    return {q.real(), z.y / den2};
}

double mobius_rotation(const Mobius& g, const Point& z) {
    const Complex den = g.c() * z.z() + g.d();
    return -2.0 * std::arg(den);
}

UnitTangent mobius_apply(const Mobius& g, const UnitTangent& v) {
    return {mobius_apply(g, v.base), normalize_angle(v.theta + mobius_rotation(g, v.base))};
}

double cosh_dist(const Point& z, const Point& w) {
    const double dx = z.x - w.x, dy = z.y - w.y;
    return 1.0 + (dx * dx + dy * dy) / (2.0 * z.y * w.y);
}

double hyp_dist(const Point& z, const Point& w) {
    const double dx = z.x - w.x, dy = z.y - w.y;
    return 2.0 * std::asinh(std::sqrt(dx * dx + dy * dy) / (2.0 * std::sqrt(z.y * w.y)));
}

Mobius frame_of(const UnitTangent& v) {
    return Mobius::affine_to(v.base) * Mobius::rotation_about_i(v.theta);
}

UnitTangent tangent_of(const Mobius& g) {
    const Point base = mobius_apply(g, Point{0.0, 1.0});
    const double theta = -2.0 * std::arg(Complex(g.d(), g.c()));
    return {base, normalize_angle(theta)};
}

UnitTangent geodesic_flow(const UnitTangent& v, double t) {
    // Right multiplication of the frame by diag(e^{t/2}, e^{-t/2}).
    const Mobius g = frame_of(v);
    const double ep = std::exp(0.5 * t), em = std::exp(-0.5 * t);
    const Mobius moved(g.a() * ep, g.b() * em, g.c() * ep, g.d() * em);
    return tangent_of(moved);
}

Point polar_from(const Point& z0, double theta, double r) {
    return geodesic_flow(UnitTangent{z0, normalize_angle(theta)}, r).base;
}

std::pair<double, double> polar_coords(const Point& z0, const Point& z) {
    const double r = hyp_dist(z0, z);
    if (r == 0.0) return {0.0, 0.0};
    const Complex w((z.x - z0.x) / z0.y, z.y / z0.y);
    const Complex disk = (w - Complex(0, 1)) / (w + Complex(0, 1));
    return {normalize_angle(std::arg(disk)), r};
}

Midpoint midpoint(const Point& z, const Point& w) {
    const auto [theta, r] = polar_coords(z, w);
    return {geodesic_flow(UnitTangent{z, theta}, 0.5 * r), r};
}

double ball_volume(double r) {
    require(r >= 0.0, "ball_volume: radius must be nonnegative");
    const double s = std::sinh(0.5 * r);
    return 4.0 * std::numbers::pi * s * s;
}

Point ball_point(const Point& z0, double r, double u1, double u2) {
    const double rho = 2.0 * std::asinh(std::sqrt(u1) * std::sinh(0.5 * r));
    return polar_from(z0, two_pi * u2, rho);
}

std::vector<Point> sample_ball(const Point& z0, double r, std::size_t n, std::uint64_t seed) {
    require(r > 0.0, "sample_ball: radius must be positive");
    require(n >= 1, "sample_ball: need at least one sample");
    std::vector<Point> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i);
        const double u1 = rng.uniform();
        const double u2 = rng.uniform();
        out[i] = ball_point(z0, r, u1, u2);
    }
    return out;
}

}  // namespace hyplab::geom
