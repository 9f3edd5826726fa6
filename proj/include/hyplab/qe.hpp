#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyplab/parallel.hpp"
#include "hyplab/propagator.hpp"
#include "hyplab/trace.hpp"

namespace hyplab::qe {

using propagator::Observable;
using trace::EigenData;
using trace::EigenInterval;

// Decay exponent of ergodic averages of an orbit bump on the octagon surface
// (deviation against lens area, t in [1, 3]); measured 0.70 +- 0.12 over three seeds.
constexpr double default_rho_gap = 0.70;
constexpr double gram_warning_threshold = 1e-2;

struct BoundParameters {
    double R = 1.0;
    double ell_min = 1.0;
    double rho_gap = default_rho_gap;
    double thin_volume = 0.0;
};

struct Bound {
    double main = 0.0;
    double remainder = 0.0;
};

// main = |a|_2^2 / (rho_gap^2 R), remainder = e^{4R} / ell_min * thin_volume * |a|_inf^2.
Bound quantitative_bound(double a_l2, double a_sup, const BoundParameters& p);

struct QETerm {
    double lambda = 0.0;
    double matrix_element = 0.0;  // <psi_j, a psi_j>
    double deviation_sq = 0.0;
};

struct QEReport {
    EigenInterval interval;
    double variance_sum = 0.0;
    double normalized = 0.0;  // variance_sum / max(N, 1)
    std::size_t count = 0;
    double mean = 0.0;        // mesh average of a
    double a_l2 = 0.0;        // of a - mean, by the mesh quadrature
    double a_sup = 0.0;       // of a - mean on the mesh
    double bound_main = 0.0;
    double bound_remainder = 0.0;
    BoundParameters parameters;
    double gram_deviation = 0.0;
    bool gram_warning = false;
    std::vector<QETerm> terms;
};

// sum over lambda_j in I of |<psi_j, a psi_j> - mean of a|^2 by mesh quadrature.
// Throws NoMesh without a mesh.
QEReport qe_variance(const EigenData& e, const Observable& a, const EigenInterval& I,
                     const BoundParameters& params = {}, Exec exec = Exec::parallel);

std::string report_to_json(const QEReport& r);
std::string terms_to_csv(const QEReport& r);

// n x n grid of equal-weight points on [0, 1] x [1, 2] with total weight `volume`
// and a Haar-random orthonormal basis; eigenvalues spread evenly over I.
EigenData random_flat_eigendata(int n, const EigenInterval& I, std::uint64_t seed, double volume = 1.0);

}  // namespace hyplab::qe
