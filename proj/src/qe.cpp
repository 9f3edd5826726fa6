#include "hyplab/qe.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "hyplab/errors.hpp"
#include "hyplab/rng.hpp"
#include "json.hpp"

namespace hyplab::qe {

Bound quantitative_bound(double a_l2, double a_sup, const BoundParameters& p) {
    require(p.R > 0.0 && p.ell_min > 0.0 && p.rho_gap > 0.0, "quantitative_bound: R, ell_min, rho_gap must be positive");
    require(p.thin_volume >= 0.0 && a_l2 >= 0.0 && a_sup >= 0.0, "quantitative_bound: negative norm or volume");
    Bound b;
    b.main = a_l2 * a_l2 / (p.rho_gap * p.rho_gap * p.R);
    if (p.thin_volume > 0.0) b.remainder = std::exp(4.0 * p.R) / p.ell_min * p.thin_volume * a_sup * a_sup;
    return b;
}

QEReport qe_variance(const EigenData& e, const Observable& a, const EigenInterval& I, const BoundParameters& params,
                     Exec exec) {
    if (!e.mesh) throw NoMesh("qe_variance: eigen data has no mesh");
    require(I.hi >= I.lo, "qe_variance: empty interval");
    const trace::EigenMesh& mesh = *e.mesh;
    QEReport r;
    r.interval = I;
    r.parameters = params;

    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < e.eigenvalues.size(); ++j)
        if (e.eigenvalues[j] >= I.lo && e.eigenvalues[j] <= I.hi) idx.push_back(j);
    r.count = idx.size();

    const std::size_t np = mesh.points.size();
    const std::vector<double> av = map_indices(np, [&](std::size_t m) { return a(mesh.points[m]); }, exec);
    std::vector<double> wa(np), w2(np);
    for (std::size_t m = 0; m < np; ++m) wa[m] = mesh.weights[m] * av[m];
    const double vol = trace::mesh_volume(mesh);
    r.mean = ordered_sum(wa) / vol;
    for (std::size_t m = 0; m < np; ++m) {
        const double d = av[m] - r.mean;
        w2[m] = mesh.weights[m] * d * d;
        r.a_sup = std::max(r.a_sup, std::abs(d));
    }
    r.a_l2 = std::sqrt(ordered_sum(w2));

    // Gram deviation restricted to the rows in I
    if (!idx.empty()) {
        Eigen::MatrixXd V(static_cast<Eigen::Index>(idx.size()), mesh.values.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            V.row(static_cast<Eigen::Index>(i)) = mesh.values.row(static_cast<Eigen::Index>(idx[i]));
        r.gram_deviation = trace::gram_deviation({mesh.points, mesh.weights, V});
    }
    r.gram_warning = r.gram_deviation > gram_warning_threshold;

    r.terms.resize(idx.size());
    for_each_index(
        idx.size(),
        [&](std::size_t i) {
            const auto row = static_cast<Eigen::Index>(idx[i]);
            std::vector<double> s(np);
            for (std::size_t m = 0; m < np; ++m) {
                const double psi = mesh.values(row, static_cast<Eigen::Index>(m));
                s[m] = wa[m] * psi * psi;
            }
            QETerm& t = r.terms[i];
            t.lambda = e.eigenvalues[idx[i]];
            t.matrix_element = ordered_sum(s);
            t.deviation_sq = (t.matrix_element - r.mean) * (t.matrix_element - r.mean);
        },
        exec);
    std::vector<double> dev(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) dev[i] = r.terms[i].deviation_sq;
    r.variance_sum = ordered_sum(dev);
    r.normalized = r.variance_sum / static_cast<double>(std::max<std::size_t>(r.count, 1));

    const Bound b = quantitative_bound(r.a_l2, r.a_sup, params);
    r.bound_main = b.main;
    r.bound_remainder = b.remainder;
    return r;
}

std::string report_to_json(const QEReport& r) {
    nlohmann::ordered_json j;
    j["interval"] = {r.interval.lo, r.interval.hi};
    j["variance_sum"] = r.variance_sum;
    j["normalized"] = r.normalized;
    j["count"] = r.count;
    j["mean"] = r.mean;
    j["a_l2"] = r.a_l2;
    j["a_sup"] = r.a_sup;
    j["bound_main"] = r.bound_main;
    j["bound_remainder"] = r.bound_remainder;
    j["parameters"] = {{"R", r.parameters.R},
                       {"ell_min", r.parameters.ell_min},
                       {"rho_gap", r.parameters.rho_gap},
                       {"thin_volume", r.parameters.thin_volume}};
    j["gram_deviation"] = r.gram_deviation;
    j["gram_warning"] = r.gram_warning;
    return j.dump(2);
}

std::string terms_to_csv(const QEReport& r) {
    std::string out = "lambda,matrix_element,deviation_sq\n";
    char buf[96];
    for (const auto& t : r.terms) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t.lambda, t.matrix_element, t.deviation_sq);
        out += buf;
    }
    return out;
}

EigenData random_flat_eigendata(int n, const EigenInterval& I, std::uint64_t seed, double volume) {
    require(n >= 1 && volume > 0.0 && I.hi >= I.lo, "random_flat_eigendata: bad arguments");
    const int N = n * n;
    trace::EigenMesh mesh;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            mesh.points.push_back({(i + 0.5) / n, 1.0 + (k + 0.5) / n});
            mesh.weights.push_back(volume / N);
        }
    // Haar orthogonal matrix: QR of a Gaussian matrix with the sign of diag(R) fixed
    Eigen::MatrixXd G(N, N);
    for (int r = 0; r < N; ++r) {
        CounterRng rng(seed, static_cast<std::uint64_t>(r));
        for (int c = 0; c < N; ++c) {
            const double u = rng.uniform_pos(), v = rng.uniform();
            G(r, c) = std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd R = qr.matrixQR();
    for (int c = 0; c < N; ++c)
        if (R(c, c) < 0.0) Q.col(c) *= -1.0;
    mesh.values = Q.transpose() / std::sqrt(volume / N);

    EigenData e;
    e.volume = volume;
    for (int j = 0; j < N; ++j) e.eigenvalues.push_back(N == 1 ? I.lo : I.lo + (I.hi - I.lo) * j / (N - 1));
    e.mesh = std::move(mesh);
    trace::validate_eigen_data(e, false);
    return e;
}

}  // namespace hyplab::qe
