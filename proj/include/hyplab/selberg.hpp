#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hyplab::selberg {

enum class Smoothness { smooth, jump };

// Radial kernel k(rho), identically zero beyond `support`. Jump kernels list
// their discontinuities so that quadratures can split there.
struct RadialKernel {
    std::function<double(double)> eval;
    std::function<double(double)> derivative;  // optional k'(rho) on smooth pieces
    double support = 0.0;
    Smoothness smoothness = Smoothness::smooth;
    std::vector<double> jumps;
    // Spacing of the interpolation table for tabulated kernels (0 otherwise);
    // quadratures then use fixed panels of about this width instead of
    // adaptive refinement across spline knots.
    double table_step = 0.0;

    double operator()(double rho) const { return rho > support ? 0.0 : eval(rho); }
};

struct SpectralFunction {
    std::function<double(double)> eval;
    bool even = true;

    double operator()(double s) const { return eval(s); }
};

// Renormalised disc indicator (cosh t)^{-1/2} 1_{rho <= t}, the kernel of P_t.
RadialKernel disc_kernel(double t);
RadialKernel gaussian_kernel(double width, double support);
// C-infinity bump exp(1 - 1 / (1 - (rho/a)^2)), equal to 1 at the origin.
RadialKernel bump_kernel(double a);
RadialKernel scaled(const RadialKernel& k, double c);

SpectralFunction heat_multiplier(double t);

// g(u) = sqrt(2) int_{|u|}^inf k(rho) sinh rho / sqrt(cosh rho - cosh u) d rho.
double abel_transform(const RadialKernel& k, double u);

// g'(u) / sinh(u) from the kernel alone: derivative of the Abel integral with
// the jump contributions written out explicitly.
double abel_derivative_over_sinh(const RadialKernel& k, double u);

// Recovers k(rho) from the Abel transform through the inverse Abel integral
// k(rho) = -(sqrt 2 / pi) int_0^inf q(u(v)) dv, cosh u = cosh rho + v^2,
// where q = g'/sinh. Jump singularities are removed by v = v_j sin(phi).
double inverse_abel_at(const RadialKernel& k, double rho);

// Forward transform h(s) = 2 int_0^support cos(s u) g(u) du. The result
// caches g at fixed composite Gauss-Legendre nodes (u = u_end - x^2 on each
// piece between jumps) and evaluates any s by direct summation.
SpectralFunction selberg_forward(const RadialKernel& k, int panels = 48);

// Independent adaptive evaluation of the same integral at one s.
double selberg_forward_adaptive(const RadialKernel& k, double s);

struct InverseOptions {
    double u_max = -1.0;       // extent of the g table; negative selects automatically
    double step = 0.005;       // spacing of the u and rho tables
    bool verify = true;        // run the roundtrip self-check
    double roundtrip_tol = 1e-5;
};

struct InverseResult {
    RadialKernel kernel;
    double band = 0.0;
    double u_max = 0.0;
    double roundtrip_error = -1.0;  // sup |forward(k) - h| on |s| <= band/2, -1 when not run
};

// Tabulated kernel with g'(u) = -(1/pi) int_0^band s sin(s u) h(s) ds.
// Throws BandTooSmall if verification is requested and fails.
InverseResult selberg_inverse(const SpectralFunction& h, double band,
                              const InverseOptions& opt = {});

// Sup of |forward(inverse(h)) - h| on a uniform grid of |s| <= s_max.
double sup_error(const SpectralFunction& a, const SpectralFunction& b, double s_max,
                 int samples = 401);

struct Roundtrip {
    std::string kernel;
    std::string direction;  // "forward(inverse)", "inverse(forward)" or "abel"
    double band = 0.0;
    double sup_error = 0.0;
    double seconds = 0.0;
};

// Standard roundtrips: "disc" (radius t, at Abel level since the kernel jumps),
// "heat" (multiplier at time t, band sqrt(42 / t)), "gaussian" (e^{-rho^2},
// support 7, band 14) and "bump" (radius 2, band 100).
Roundtrip selberg_roundtrip(const std::string& kernel, double t = 1.0);

// p_t(rho): inverse transform of exp(-t (1/4 + s^2)), tabulated once per t.
double heat_kernel(double t, double rho);
const RadialKernel& heat_kernel_table(double t);

struct HeatBound {
    double t = 0.0;
    double c_gaussian = 0.0;  // max p_t(rho) e^{rho^2} on [0, rho_max]
    double c_profile = 0.0;   // max p_t(rho) e^{rho^2 / 4t} on the whole table
    double rho_max = 0.0;
    double min_value = 0.0;   // min p_t on [0, rho_max]
};
HeatBound fit_heat_bound(double t, double rho_max = 6.0, double step = 1e-3);

// Radial eigenfunction phi_s of the Laplacian, phi_s(0) = 1, eigenvalue 1/4 + s^2.
class SphericalOracle {
public:
    SphericalOracle(double s, double r_max, double ode_tolerance = 1e-8);

    double s() const { return s_; }
    double r_max() const { return r_max_; }
    double ode_tolerance() const { return tol_; }
    double operator()(double r) const;
    double derivative(double r) const;
    // Max of |phi'' + coth(r) phi' + (1/4 + s^2) phi| on the interior grid,
    // phi'' from fourth-order differences of the tabulated phi'.
    double max_residual() const { return residual_; }
    const std::vector<double>& table() const { return phi_; }
    double spacing() const { return h_; }

private:
    double s_, r_max_, tol_, h_, residual_ = 0.0;
    std::vector<double> phi_, dphi_;
};

SphericalOracle spherical_oracle(double s, double r_max);

// int k(d(o, w)) f(d(w, o')) d mu(w) with d(o, o') = dist, by tensor Gauss
// quadrature in polar coordinates around o (split at the jumps of k).
double radial_convolution(const RadialKernel& k, const std::function<double(double)>& f, double dist,
                          int radial_panels = 32, int angular_nodes = 256);

// Radial average int k(d(o, w)) phi_s(d(w, o')) d mu(w) at a point o' with
// d(o, o') = dist, by tensor Gauss quadrature in polar coordinates around o.
double radial_average(const RadialKernel& k, const SphericalOracle& phi, double dist,
                      int radial_panels = 32, int angular_nodes = 256);

}  // namespace hyplab::selberg
