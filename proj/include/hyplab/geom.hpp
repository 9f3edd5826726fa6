#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace hyplab::geom {

using Complex = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Point of the upper half-plane, metric (dx^2 + dy^2) / y^2.
struct Point {
    double x = 0.0;
    double y = 1.0;

    Complex z() const { return {x, y}; }
    static Point from(Complex w) { return {w.real(), w.imag()}; }
    bool valid() const;
};

// Unit tangent vector at `base`. theta is measured counterclockwise from the
// upward vertical direction and kept in [0, 2*pi).
struct UnitTangent {
    Point base;
    double theta = 0.0;
};

double normalize_angle(double theta);

// Element of PSL(2, R). Construction renormalizes to determinant one and
// applies the canonical sign (first nonzero entry positive).
class Mobius {
public:
    Mobius() = default;
    Mobius(double a, double b, double c, double d);

    static Mobius identity() { return {}; }
    static Mobius translation_along_imaginary_axis(double length);  // z -> e^length z
    static Mobius rotation_about_i(double angle);  // rotates tangents at i by `angle`
    // Isometry z -> y0 z + x0 taking i to p, preserving directions.
    static Mobius affine_to(const Point& p);

    double a() const { return a_; }
    double b() const { return b_; }
    double c() const { return c_; }
    double d() const { return d_; }

    Mobius operator*(const Mobius& o) const;
    Mobius inverse() const { return raw(d_, -b_, -c_, a_); }
    double trace() const { return a_ + d_; }
    double determinant() const { return a_ * d_ - b_ * c_; }

    // Equality in PSL(2, R): entries agree up to a global sign.
    bool approx_equal(const Mobius& o, double tol = 1e-9) const;

    // Translation length 2 acosh(|tr|/2); 0 for elliptic or parabolic elements.
    double translation_length() const;

private:
    static Mobius raw(double a, double b, double c, double d);
    double a_ = 1.0, b_ = 0.0, c_ = 0.0, d_ = 1.0;
};

Point mobius_apply(const Mobius& g, const Point& z);

// Direction change of the tangent plane under g at z: arg g'(z).
double mobius_rotation(const Mobius& g, const Point& z);

UnitTangent mobius_apply(const Mobius& g, const UnitTangent& v);

double hyp_dist(const Point& z, const Point& w);

// cosh of the distance, exact formula without the acosh.
double cosh_dist(const Point& z, const Point& w);

// Frame g in PSL(2, R) with g.i = v.base and g'(i) pointing along v.
Mobius frame_of(const UnitTangent& v);
UnitTangent tangent_of(const Mobius& frame);

UnitTangent geodesic_flow(const UnitTangent& v, double t);

// Endpoint of the geodesic of length r leaving z0 in direction theta.
Point polar_from(const Point& z0, double theta, double r);

// Inverse of polar_from: (theta, r) of z seen from z0. theta = 0 when z == z0.
std::pair<double, double> polar_coords(const Point& z0, const Point& z);

// Unit tangent at the midpoint of [z, w], pointing towards w, and the length.
struct Midpoint {
    UnitTangent frame;
    double length = 0.0;
};
Midpoint midpoint(const Point& z, const Point& w);

// Area of a geodesic ball, 2 pi (cosh r - 1).
double ball_volume(double r);

// i.i.d. samples with density sinh(rho) d rho d theta / ball_volume(r) around z0.
std::vector<Point> sample_ball(const Point& z0, double r, std::size_t n, std::uint64_t seed);

// Single draw used by the Monte Carlo kernels: u1, u2 uniform in [0, 1).
Point ball_point(const Point& z0, double r, double u1, double u2);

}  // namespace hyplab::geom
