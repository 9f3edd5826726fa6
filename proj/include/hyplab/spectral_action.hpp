#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hyplab/parallel.hpp"

namespace hyplab::spectral {

// Range [a, b] of the spectral parameter s; eigenvalues 1/4 + s^2.
struct SpectralInterval {
    double a = 1.0;
    double b = 2.0;
};

// Chebyshev-Lobatto points on [a, b] (endpoints included, clustered there).
std::vector<double> chebyshev_grid(const SpectralInterval& I, int n);

// h_t(s) = 4 sqrt2 int_0^t cos(su) sqrt(1 - cosh u / cosh t) du, the transform
// of the disc kernel (cosh t)^{-1/2} 1_{rho <= t}.
double h_t_closed(double t, double s);

// d/dt h_t(s) = 2 sqrt2 tanh t (cosh t)^{-1/2} int_0^t cos(su) cosh u / sqrt(cosh t - cosh u) du.
double h_t_derivative(double t, double s);

// Repeated evaluation of t -> h_t(s) at fixed s. For t >= 60 the integrand
// beyond 40 below t is 1 to within e^{-40} and the remainder has a
// t-independent profile, so each value costs O(1).
class HtEvaluator {
public:
    explicit HtEvaluator(double s);
    double operator()(double t) const;
    double s() const { return s_; }

private:
    double s_, A_, B_;
};

struct LipschitzResult {
    double bound = 0.0;
    double s_at_max = 0.0;
    double t_at_max = 0.0;
};

// max over the grids of |h_{t+delta}(s) - h_t(s)| / delta.
LipschitzResult lipschitz_bound(const std::vector<double>& s_grid, double t_lo, double t_hi, int t_points,
                                double delta = 1e-4, Exec exec = Exec::parallel);

double period_sequence(double s, int k);

// c(s) = -1/2 int_0^{2 pi / s} cos(sv) sqrt(1 - e^{v - 2 pi / s}) dv.
double c_of_s(double s);
// The same constant after integration by parts:
// -(1 / 4 s^2) int_0^{2 pi} sin x e^{(x - 2pi)/s} / sqrt(1 - e^{(x - 2pi)/s}) dx.
double c_of_s_by_parts(double s);

// max over v in [0, 2pi/s] of |f_k(v) - f(v)|, f_k(v) = sqrt(1 - cosh(v + t_{k-1}) / cosh t_k).
double period_profile_deviation(double s, int k, int v_points = 512);

struct Violation {
    int k = 0;
    double s = 0.0;
    double h = 0.0;
};

struct PeriodBound {
    SpectralInterval interval;
    double c_I = 0.0;            // grid minimum of c(s)
    double s_at_min = 0.0;
    double c_I_certified = 0.0;  // grid minimum minus Lipschitz-in-s enclosure
    int k0 = 0;
    int k_max = 0;
    double tol = 1e-6;
    double max_h_from_k0 = 0.0;  // max of h_{t_k}(s) over k >= k0 and the grid
    std::vector<Violation> violations;  // (k, s) with k < k0 that fail the bound
};

// Smallest k0 with h_{t_k}(s) < -2 c_I + tol for all k in [k0, k_max] and all grid s.
// Throws BoundNotReached when even k = k_max fails.
PeriodBound verify_period_bound(const SpectralInterval& I, int k_max, int grid = 256, double tol = 1e-6,
                                Exec exec = Exec::parallel);

struct TimeAverage {
    double T = 0.0;
    double value = 0.0;    // min over the grid of (1/T) int_0^T h_t(s)^2 dt
    double s_min = 0.0;
    double certified = 0.0;  // value minus Lipschitz-in-s enclosure
    double chain = 0.0;      // (s/(4 pi) - k1/T) |J| c_I^2 at s_min
};

struct ChainConstants {
    double c_I = 0.0;
    int k1 = 0;
    double J_half_width = 0.0;  // c_I / (2 L)
    double lipschitz = 0.0;
    double T_I = 0.0;           // smallest T with a positive chain bound for all s in I
};

ChainConstants chain_constants(const PeriodBound& pb, const LipschitzResult& L);

// (1/T) int_0^T h_t(s)^2 dt for every T in Ts, sharing one set of t-nodes.
std::vector<double> time_average(double s, const std::vector<double>& Ts);

std::vector<TimeAverage> time_avg_lower_bound(const SpectralInterval& I, const std::vector<double>& Ts,
                                              const ChainConstants& chain, int grid = 256,
                                              Exec exec = Exec::parallel);

}  // namespace hyplab::spectral
