#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hyplab/fuchsian.hpp"
#include "hyplab/geom.hpp"
#include "hyplab/parallel.hpp"

namespace hyplab::propagator {

using geom::Point;
using geom::UnitTangent;

struct Observable {
    std::function<double(const Point&)> eval;
    double sup_bound = 1.0;
    bool mean_zero_hint = false;

    double operator()(const Point& z) const { return eval(z); }
};

Observable constant_observable(double c);
// Sum over the orbit of p of (1 - (d/a)^2)^2 on d < a; invariant under the group.
Observable orbit_bump(const fuchsian::Lattice& lattice, const Point& p, double a);
// +1 / -1 on alternating half periods of log|z|, invariant under z -> e^period z.
Observable cell_sign(double period);

struct Estimate {
    double value = 0.0;
    double error = 0.0;  // one standard error
    std::size_t samples = 0;
};

// (cosh t)^{-1/2} int_{B(z,t)} u, by uniform sampling of the ball.
Estimate apply_Pt(const Observable& u, const Point& z, double t, std::size_t n, std::uint64_t seed,
                  Exec exec = Exec::parallel);
// Same integral by Gauss-Legendre in the radius and the trapezoid rule in the
// angle; `error` is the change against half the resolution.
Estimate apply_Pt_quadrature(const Observable& u, const Point& z, double t, int radial_panels = 32,
                             int angular_nodes = 256);

// Area of B(z1, t) and B(z2, t) intersected, d(z1, z2) = r, by one-dimensional quadrature.
double lens_volume(double t, double r);
// cosh rho = cosh t / cosh(r/2): the lens lies in B(m, rho) and contains B(m, t - r/2).
double pythagoras_radius(double t, double r);

struct LensGeometry {
    Point z1, z2, midpoint, vertex;  // vertex: a boundary intersection point
    double rho = 0.0;                // Pythagoras radius
    double vertex_to_midpoint = 0.0;
    double vertex_to_centres = 0.0;  // max of d(vertex, z1), d(vertex, z2)
    double right_angle_defect = 0.0;  // |cos| of the angle at the midpoint
};
LensGeometry lens_geometry(double t, double r);

struct LensEstimate {
    double value = 0.0;
    double error = 0.0;
    double volume = 0.0;
    double volume_error = 0.0;
    double acceptance = 0.0;
    std::size_t samples = 0;
    bool midpoint_frame = false;  // sampled from B(m, rho) instead of B(z, t)
    bool degenerate = false;      // lens area below 1e-12, value forced to 0
};

// int over B(z,t) and B(w,t) intersected of a, by rejection sampling.
LensEstimate lens_integral(const Observable& a, const Point& z, const Point& w, double t, std::size_t n,
                           std::uint64_t seed, Exec exec = Exec::parallel);
// [P_t a P_t](z, w) = (cosh t)^{-1} int over the lens; exactly 0 when d(z, w) > 2t.
LensEstimate kernel_PtaPt(const Observable& a, const Point& z, const Point& w, double t, std::size_t n,
                          std::uint64_t seed, Exec exec = Exec::parallel);

struct AveragingSet {
    double t = 0.0;
    double r = 0.0;
    double volume = 0.0;
    double error = 0.0;
};
AveragingSet intersection_volume(double t, double r, std::size_t n, std::uint64_t seed,
                                 Exec exec = Exec::parallel);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_error = 0.0;
};
LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

// (1/T) int_0^T [P_t a P_t](z, w) dt with t_nodes Gauss-Legendre nodes. One
// sample set from the largest lens serves all nodes.
Estimate time_averaged_kernel(const Observable& a, const Point& z, const Point& w, double T, std::size_t n,
                              std::uint64_t seed, int t_nodes = 64, Exec exec = Exec::parallel);

using TangentFunction = std::function<double(const UnitTangent&, double)>;

// Group-invariant test function on the unit tangent bundle:
// e^{-decay r} sum over orbit points q = gamma p of (1 - (d/a)^2)^2 (1 + alpha cos(phi - beta)),
// with d = d(z, q) < a and phi the angle between theta and the direction from z to q.
struct OrbitWave {
    Point p;
    double a = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
    double decay = 0.0;
};
TangentFunction orbit_tangent_function(const fuchsian::Lattice& lattice, const OrbitWave& w);

struct ChangeOfVariables {
    Estimate lhs;  // pairs (z, z') in D x H with d < R, evaluated at the midpoint frame
    Estimate rhs;  // sinh r dr d theta d mu(z) on (0, R) x S^1 x D
    double domain_volume = 0.0;  // common factor, excluded from the error bars
};
ChangeOfVariables midpoint_change_of_var_check(const TangentFunction& f, double R,
                                               const fuchsian::Lattice& lattice, double window,
                                               std::size_t n, std::uint64_t seed,
                                               Exec exec = Exec::parallel);

struct HsOptions {
    std::size_t outer = 2000;
    std::size_t inner = 256;
    int t_nodes = 64;
    std::size_t thin_samples = 4000;
    double systole_search = 4.0;
};

struct HsEstimate {
    double main = 0.0;
    double main_error = 0.0;
    double remainder_bound = 0.0;
    double systole = 0.0;
    double thin_fraction = 0.0;
    double domain_volume = 0.0;
    double sup_kernel = 0.0;
};

// Split bound for the squared Hilbert-Schmidt norm of (1/T) int_0^T P_t a P_t dt.
HsEstimate hs_norm_estimate(const fuchsian::Lattice& lattice, const Observable& a, double T, double R,
                            double window, std::uint64_t seed, const HsOptions& opt = {},
                            Exec exec = Exec::parallel);

struct DecayRow {
    double t = 0.0;
    double volume = 0.0;  // lens area |F_t(r)|
    double deviation = 0.0;
    double deviation_error = 0.0;
};

struct DecayTable {
    std::vector<DecayRow> rows;
    double mean_removed = 0.0;
    double residual_mean = 0.0;
    double residual_mean_error = 0.0;
    LineFit fit;           // log deviation against log volume
    double exponent = 0.0;  // -fit.slope
};

DecayTable ergodic_average_decay(const fuchsian::Lattice& lattice, const Observable& a,
                                 const std::vector<double>& t_list, double r, double window,
                                 std::size_t outer, std::size_t inner, std::uint64_t seed,
                                 Exec exec = Exec::parallel);

}  // namespace hyplab::propagator
