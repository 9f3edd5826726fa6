#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hyplab/fuchsian.hpp"
#include "hyplab/geom.hpp"
#include "hyplab/parallel.hpp"

namespace hyplab::trace {

using geom::Point;

// Quadrature mesh of a region of the surface with eigenfunction samples:
// values(j, m) = psi_j(points[m]).
struct EigenMesh {
    std::vector<Point> points;
    std::vector<double> weights;
    Eigen::MatrixXd values;
};

struct EigenData {
    std::vector<double> eigenvalues;  // nondecreasing
    double volume = 0.0;
    double lambda_max = -1.0;  // truncation level of the list; negative means the last eigenvalue
    std::optional<EigenMesh> mesh;

    double truncation() const;
};

EigenData parse_eigen_data(const std::string& json_text);
EigenData load_eigen_data(const std::string& path);
std::string eigen_data_to_json(const EigenData& e);

// Throws InvalidArgument unless the list is nondecreasing, the volume positive,
// the mesh shapes consistent and, when asked, lambda_0 = 0.
void validate_eigen_data(const EigenData& e, bool require_ground_state = true);

// max |sum_m w_m psi_i psi_j - delta_ij|
double gram_deviation(const EigenMesh& mesh);
double mesh_volume(const EigenMesh& mesh);
// sum_m w_m psi_j(z_m)^2 for every j
Eigen::VectorXd mesh_masses(const EigenMesh& mesh);

using Profile = std::function<double(double)>;

// (1/4 pi) int_R f(1/4 + rho^2) tanh(pi rho) rho d rho over |rho| <= quad_limit.
// `breaks` lists eigenvalues where f has kinks or jumps.
double weyl_density(const Profile& f, double quad_limit, const std::vector<double>& breaks = {});
// weyl_density of exp(-t lambda), which is p_t(0); optionally only over lambda > from.
double weyl_heat(double t, double from = 0.25);

// Explicit upper bound for p_t(rho), rho > 0, decreasing in rho.
double heat_kernel_upper_bound(double t, double rho);

struct GeometricSide {
    double value = 0.0;
    double error = 0.0;  // certified: tail beyond R, terms past the table, table accuracy
    double tail = 0.0;
    std::size_t terms = 0;
};

// sum over the group ball at z of p_t(d(z, gamma z)), identity excluded. Throws
// InvalidArgument when the certified tail beyond R exceeds tail_tol.
GeometricSide geometric_side(const fuchsian::GroupSpec& spec, const Point& z, double t, double R,
                             double tail_tol = 1e-8);
// Same sum for several times from one enumeration.
std::vector<GeometricSide> geometric_side(const fuchsian::GroupSpec& spec, const Point& z,
                                          const std::vector<double>& ts, double R, double tail_tol = 1e-8);

struct HeatTrace {
    double value = 0.0;
    double tail = 0.0;   // volume * weyl_heat above the truncation
    double volume = 0.0;
    bool localized = false;  // summed against mesh masses
};

// sum_j e^{-t lambda_j}, weighted by the mesh mass of psi_j when a mesh is present.
HeatTrace heat_trace_spectral(const EigenData& e, double t);

struct ExpSumApprox {
    std::vector<double> coefficients;
    std::vector<double> rates;
    double sup_error = 0.0;  // sup of |g - sum a_k e^{-t_k x}| on the fit grid
    double beyond = 0.0;     // sup of |sum a_k e^{-t_k x}| over x > x_max (g vanishes there)
    double x_max = 0.0;
    double delta = 0.0;
    bool regularized = false;  // rank-deficient least squares, ridge solve used

    double operator()(double x) const;  // the exponential sum
};

// Fit g(x) = f(x) e^x on [0, x_max] by rates t_k = k delta, k = 1..K. A
// nonpositive delta is chosen from the steepest slope of f.
ExpSumApprox exp_sum_fit(const Profile& f, int K, double x_max, double delta = -1.0, int grid = 4001);

struct EigenInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Continuous trapezoid approximation of the indicator of I with ramps of width
// eps: centred on the endpoints, inside I, or outside I.
enum class Ramp { centred, inner, outer };
Profile smoothed_indicator(const EigenInterval& I, double eps, Ramp ramp = Ramp::centred);

struct CountOptions {
    double eps = 0.05;
    double x_max = -1.0;     // fit domain; negative means hi + 2
    double window = 3.0;     // D intersected with B(base, window) when no eigen-data is given
    std::size_t samples = 2000;
    std::uint64_t seed = 1;
    double R = 10.0;
    double group_radius = 12.0;
};

struct CountEstimate {
    double estimate = 0.0;
    double estimate_error = 0.0;  // Monte Carlo error plus the fit error carried through the heat trace at t = 1
    double weyl = 0.0;
    double weyl_inner = 0.0;
    double weyl_outer = 0.0;
    double volume = 0.0;
    bool exact = false;
    double fit_error = 0.0;
    // with eigen-data: sum f(lambda_j) for the centred, inner and outer ramps
    double smoothed = 0.0;
    double smoothed_inner = 0.0;
    double smoothed_outer = 0.0;
};

// With eigen-data: the count in I (mesh-localized when a mesh is present) and
// the smoothed Weyl term. Without: the Weyl term plus the geometric correction
// through an exponential-sum fit of the smoothed indicator.
// `region` replaces the default sample of D intersected with B(base, window).
CountEstimate eigencount_estimate(const fuchsian::GroupSpec& spec, const EigenData* e, const EigenInterval& I,
                                  int K, const CountOptions& opt = {}, Exec exec = Exec::parallel,
                                  const fuchsian::DomainSample* region = nullptr);

// Group generated by the n-th powers of the generators; for a cyclic group an
// index-n subgroup, the degree-n cyclic cover.
fuchsian::GroupSpec cyclic_cover(const fuchsian::GroupSpec& spec, int degree);

struct CylinderOptions {
    double box = 12.0;       // Dirichlet walls at distance `box` from the core geodesic
    double window = 1.5;     // mesh covers distances up to `window`
    int basis = 128;         // sine modes per Fourier mode
    double lambda_max = 60.0;
    double t_min = 0.5;      // smallest heat time the truncations are tuned for
    int rho_nodes = 40;
    double mode_cut = 1e-15;  // stop adding Fourier modes below this relative contribution
};

struct CylinderSpectrum {
    EigenData data;
    double core_length = 0.0;
    int modes = 0;  // Fourier modes |k| <= modes
    std::vector<double> mode_weight;  // window heat weight of each |k| at t_min
    double basis_change = 0.0;  // window heat trace at t_min: change against 3/4 of the basis

    // Certified bound for the effect of the walls on the window heat trace at t.
    double box_error(double t) const;
    // Geometric extrapolation of the omitted Fourier modes at t_min.
    double mode_tail() const;

    CylinderOptions options;
};

// Spectrum and eigenfunctions of the Laplacian on the hyperbolic cylinder of a
// cyclic group with axis on the imaginary line, by separation of variables in
// Fermi coordinates, cut off by Dirichlet walls at distance `box`.
CylinderSpectrum synthesize_cylinder(const fuchsian::GroupSpec& spec, const CylinderOptions& opt = {});

// Point at signed distance rho from the imaginary axis, height e^x.
Point fermi_point(double x, double rho);

// Uniform sample of the strip x in [0, L), |rho| <= window around the core
// geodesic of length L.
fuchsian::DomainSample fermi_window_sample(double L, double window, std::size_t n, std::uint64_t seed);

struct PretraceCheck {
    double t = 0.0;
    double spectral = 0.0;
    double weyl = 0.0;
    double geometric = 0.0;
    double residual = 0.0;  // spectral - weyl - geometric
    double spectral_error = 0.0;
    double geometric_error = 0.0;
    double combined_error = 0.0;
};

// Localized pre-trace identity on the mesh of `cyl`:
// sum_j e^{-t lambda_j} |psi_j|^2 = p_t(0) + sum_{gamma != id} p_t(d(z, gamma z)), integrated.
PretraceCheck pretrace_check(const fuchsian::GroupSpec& spec, const CylinderSpectrum& cyl, double t, double R,
                             Exec exec = Exec::parallel);

}  // namespace hyplab::trace
