#include "hyplab/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "hyplab/errors.hpp"
#include "hyplab/quadrature.hpp"
#include "hyplab/rng.hpp"
#include "hyplab/selberg.hpp"
#include "json.hpp"

namespace hyplab::trace {

namespace {

constexpr double pi = std::numbers::pi;
// Measured sup error of the tabulated heat kernel against the integral formula is 3e-13.
constexpr double table_accuracy = 1e-12;

}  // namespace

double EigenData::truncation() const {
    if (lambda_max >= 0.0) return lambda_max;
    return eigenvalues.empty() ? 0.0 : eigenvalues.back();
}

EigenData parse_eigen_data(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const std::exception& e) {
        throw InvalidArgument(std::string("eigen data: ") + e.what());
    }
    EigenData e;
    try {
        e.volume = j.at("volume").get<double>();
        e.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        if (j.contains("lambda_max")) e.lambda_max = j["lambda_max"].get<double>();
        if (j.contains("mesh") && !j["mesh"].is_null()) {
            const auto& m = j["mesh"];
            EigenMesh mesh;
            for (const auto& p : m.at("points")) mesh.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            mesh.weights = m.at("weights").get<std::vector<double>>();
            const auto rows = m.at("values").get<std::vector<std::vector<double>>>();
            mesh.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(mesh.points.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                require(rows[r].size() == mesh.points.size(), "eigen data: each row of values needs one entry per point");
                for (std::size_t c = 0; c < rows[r].size(); ++c)
                    mesh.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
            e.mesh = std::move(mesh);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw InvalidArgument(std::string("eigen data: ") + ex.what());
    }
    validate_eigen_data(e);
    return e;
}

EigenData load_eigen_data(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("eigen data: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_eigen_data(ss.str());
}

std::string eigen_data_to_json(const EigenData& e) {
    nlohmann::json j;
    j["volume"] = e.volume;
    j["eigenvalues"] = e.eigenvalues;
    if (e.lambda_max >= 0.0) j["lambda_max"] = e.lambda_max;
    if (e.mesh) {
        nlohmann::json m;
        m["points"] = nlohmann::json::array();
        for (const auto& p : e.mesh->points) m["points"].push_back({p.x, p.y});
        m["weights"] = e.mesh->weights;
        m["values"] = nlohmann::json::array();
        for (Eigen::Index r = 0; r < e.mesh->values.rows(); ++r) {
            std::vector<double> row(e.mesh->values.cols());
            for (Eigen::Index c = 0; c < e.mesh->values.cols(); ++c) row[c] = e.mesh->values(r, c);
            m["values"].push_back(row);
        }
        j["mesh"] = m;
    }
    return j.dump();
}

void validate_eigen_data(const EigenData& e, bool require_ground_state) {
    require(e.volume > 0.0, "eigen data: volume must be positive");
    for (std::size_t i = 1; i < e.eigenvalues.size(); ++i)
        require(e.eigenvalues[i] >= e.eigenvalues[i - 1], "eigen data: eigenvalues must be nondecreasing");
    if (require_ground_state)
        require(!e.eigenvalues.empty() && e.eigenvalues.front() == 0.0, "eigen data: lambda_0 must be 0");
    if (e.mesh) {
        const auto& m = *e.mesh;
        require(m.weights.size() == m.points.size(), "eigen data: one weight per mesh point");
        require(static_cast<std::size_t>(m.values.rows()) == e.eigenvalues.size(),
                "eigen data: one row of values per eigenvalue");
        require(static_cast<std::size_t>(m.values.cols()) == m.points.size(),
                "eigen data: one column of values per mesh point");
        for (const auto& p : m.points) require(p.valid(), "eigen data: mesh point outside the upper half-plane");
    }
}

double gram_deviation(const EigenMesh& mesh) {
    const Eigen::Map<const Eigen::VectorXd> w(mesh.weights.data(), static_cast<Eigen::Index>(mesh.weights.size()));
    const Eigen::MatrixXd G = mesh.values * w.asDiagonal() * mesh.values.transpose();
    return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

double mesh_volume(const EigenMesh& mesh) {
    return ordered_sum(mesh.weights);
}

Eigen::VectorXd mesh_masses(const EigenMesh& mesh) {
    const Eigen::Map<const Eigen::VectorXd> w(mesh.weights.data(), static_cast<Eigen::Index>(mesh.weights.size()));
    return mesh.values.cwiseAbs2() * w;
}

double weyl_density(const Profile& f, double quad_limit, const std::vector<double>& breaks) {
    require(quad_limit > 0.0, "weyl_density: quad_limit must be positive");
    std::vector<double> cuts{0.0, quad_limit};
    for (double r = 1.0; r < quad_limit; r += 1.0) cuts.push_back(r);
    for (double lam : breaks) {
        if (lam <= 0.25) continue;
        const double r = std::sqrt(lam - 0.25);
        if (r < quad_limit) cuts.push_back(r);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto g = [&](double r) { return f(0.25 + r * r) * std::tanh(pi * r) * r; };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += quad::adaptive(g, cuts[i], cuts[i + 1], 1e-12, 1e-15, 18, "weyl_density").value;
    return total / (2.0 * pi);
}

double weyl_heat(double t, double from) {
    require(t > 0.0, "weyl_heat: t must be positive");
    const double lo = std::max(from, 0.25);
    const double Q = std::sqrt(lo - 0.25 + 60.0 / t);
    return weyl_density([&](double lam) { return lam >= lo ? std::exp(-t * lam) : 0.0; }, Q, {lo});
}

double heat_kernel_upper_bound(double t, double rho) {
    require(t > 0.0 && rho > 0.0, "heat_kernel_upper_bound: need t > 0 and rho > 0");
    // cosh s - cosh rho >= sinh rho (s - rho) in the integral formula.
    const double pref = std::sqrt(2.0) * std::exp(-t / 4.0) / std::pow(4.0 * pi * t, 1.5);
    const double bracket = std::sqrt(2.0 * pi * t * rho) + 0.5 * std::sqrt(pi) * std::pow(2.0 * t / rho, 1.5);
    return pref * std::exp(-rho * rho / (4.0 * t) - 0.5 * std::log(std::sinh(rho))) * bracket;
}

std::vector<GeometricSide> geometric_side(const fuchsian::GroupSpec& spec, const Point& z,
                                          const std::vector<double>& ts, double R, double tail_tol) {
    require(R > 0.0, "geometric_side: R must be positive");
    const fuchsian::GroupBall ball = fuchsian::group_ball(spec, z, R);
    // Orbit points are pairwise at least the minimal displacement apart.
    const double half = 0.5 * (ball.elements.empty() ? R : std::min(R, ball.elements.front().displacement));
    std::vector<GeometricSide> out;
    for (double t : ts) {
        require(t > 0.0, "geometric_side: t must be positive");
        const selberg::RadialKernel& p = selberg::heat_kernel_table(t);
        GeometricSide g;
        g.terms = ball.elements.size();
        std::vector<double> vals;
        vals.reserve(ball.elements.size());
        for (const auto& e : ball.elements) {
            if (e.displacement < p.support) {
                vals.push_back(p(e.displacement));
                g.error += table_accuracy;
            } else {
                g.error += heat_kernel_upper_bound(t, e.displacement);
            }
        }
        g.value = ordered_sum(vals);
        const double step = 0.25;
        double prev = std::numeric_limits<double>::infinity();
        for (int j = 0;; ++j) {
            const double r0 = R + j * step;
            const double term = fuchsian::lattice_count_bound(r0 + step, half) * heat_kernel_upper_bound(t, r0);
            g.tail += term;
            if (term < prev && term <= 1e-18 * std::max(g.tail, 1e-300)) break;
            if (r0 > R + 200.0 * std::sqrt(t) + 200.0) break;
            prev = term;
        }
        g.error += g.tail;
        if (g.tail > tail_tol) {
            char msg[128];
            std::snprintf(msg, sizeof msg, "geometric_side: tail bound %.3g beyond R = %g exceeds %.3g", g.tail, R,
                          tail_tol);
            throw InvalidArgument(msg);
        }
        out.push_back(g);
    }
    return out;
}

GeometricSide geometric_side(const fuchsian::GroupSpec& spec, const Point& z, double t, double R, double tail_tol) {
    return geometric_side(spec, z, std::vector<double>{t}, R, tail_tol).front();
}

HeatTrace heat_trace_spectral(const EigenData& e, double t) {
    require(t > 0.0, "heat_trace_spectral: t must be positive");
    HeatTrace h;
    std::vector<double> terms(e.eigenvalues.size());
    if (e.mesh) {
        const Eigen::VectorXd m = mesh_masses(*e.mesh);
        for (std::size_t j = 0; j < terms.size(); ++j)
            terms[j] = std::exp(-t * e.eigenvalues[j]) * m(static_cast<Eigen::Index>(j));
        h.volume = mesh_volume(*e.mesh);
        h.localized = true;
    } else {
        for (std::size_t j = 0; j < terms.size(); ++j) terms[j] = std::exp(-t * e.eigenvalues[j]);
        h.volume = e.volume;
    }
    h.value = ordered_sum(terms);
    h.tail = h.volume * weyl_heat(t, e.truncation());
    return h;
}

double ExpSumApprox::operator()(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) s += coefficients[k] * std::exp(-rates[k] * x);
    return s;
}

ExpSumApprox exp_sum_fit(const Profile& f, int K, double x_max, double delta, int grid) {
    require(K >= 0, "exp_sum_fit: K must be nonnegative");
    require(x_max > 0.0 && grid >= 2, "exp_sum_fit: bad domain");
    const int n = grid;
    std::vector<double> x(n), fx(n), g(n);
    for (int i = 0; i < n; ++i) {
        x[i] = x_max * i / (n - 1);
        fx[i] = f(x[i]);
        g[i] = fx[i] * std::exp(x[i]);
    }
    ExpSumApprox r;
    r.x_max = x_max;
    if (delta <= 0.0) {
        // Rate spacing matched to where f lives: the basis e^{-k delta x} is a
        // polynomial in e^{-delta x}, best resolved near x = 1 / delta.
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            num += std::abs(fx[i]) * x[i];
            den += std::abs(fx[i]);
        }
        const double centre = den > 0.0 ? num / den : 0.5 * x_max;
        delta = 1.0 / std::clamp(centre, 0.05, x_max);
    }
    r.delta = delta;
    for (int k = 1; k <= K; ++k) r.rates.push_back(k * delta);

    Eigen::VectorXd coef = Eigen::VectorXd::Zero(K);
    if (K > 0) {
        Eigen::MatrixXd A(n, K);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) {
            b(i) = g[i];
            for (int k = 0; k < K; ++k) A(i, k) = std::exp(-r.rates[k] * x[i]);
        }
        // Ridge lambda = 1e-10 on the normal equations A^T A + lambda I, solved as the
        // equivalent augmented least-squares problem. It is used once sigma_min^2 < 100 lambda.
        constexpr double lambda = 1e-10;
        const Eigen::MatrixXd Rf = Eigen::HouseholderQR<Eigen::MatrixXd>(A).matrixQR().topRows(K).triangularView<Eigen::Upper>();
        const double smin = Eigen::JacobiSVD<Eigen::MatrixXd>(Rf).singularValues().minCoeff();
        if (smin * smin >= 100.0 * lambda) {
            coef = A.colPivHouseholderQr().solve(b);
        } else {
            r.regularized = true;
            Eigen::MatrixXd Aug(n + K, K);
            Aug << A, std::sqrt(lambda) * Eigen::MatrixXd::Identity(K, K);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + K);
            rhs.head(n) = b;
            coef = Aug.colPivHouseholderQr().solve(rhs);
        }
    }
    r.coefficients.assign(coef.data(), coef.data() + K);
    for (int i = 0; i < n; ++i) r.sup_error = std::max(r.sup_error, std::abs(g[i] - r(x[i])));
    // Scan past x_max until the termwise bound sum |a_k| e^{-t_k x} is negligible,
    // then close with that bound.
    auto envelope = [&](double y) {
        double s = 0.0;
        for (int k = 0; k < K; ++k) s += std::abs(r.coefficients[k]) * std::exp(-r.rates[k] * y);
        return s;
    };
    const double h = x_max / (n - 1);
    double y = x_max;
    for (int i = 0; i < 100 * n && envelope(y) > 1e-3 * std::max(r.sup_error, 1e-12); ++i, y += h)
        r.beyond = std::max(r.beyond, std::abs(r(y)));
    r.beyond = std::max(r.beyond, envelope(y));
    return r;
}

Profile smoothed_indicator(const EigenInterval& I, double eps, Ramp ramp) {
    require(I.hi > I.lo && eps > 0.0, "smoothed_indicator: need lo < hi and eps > 0");
    double a = I.lo, b = I.hi;
    if (ramp == Ramp::centred) {
        a -= 0.5 * eps;
        b -= 0.5 * eps;
    } else if (ramp == Ramp::outer) {
        a -= eps;
    } else {
        b -= eps;
    }
    // rises on [a, a + eps], falls on [b, b + eps]
    require(a + eps <= b, "smoothed_indicator: interval shorter than the ramps");
    return [a, b, eps](double x) {
        if (x <= a || x >= b + eps) return 0.0;
        if (x < a + eps) return (x - a) / eps;
        if (x > b) return (b + eps - x) / eps;
        return 1.0;
    };
}

namespace {

std::vector<double> ramp_breaks(const EigenInterval& I, double eps) {
    return {I.lo - eps, I.lo - 0.5 * eps, I.lo, I.lo + 0.5 * eps, I.lo + eps,
            I.hi - eps, I.hi - 0.5 * eps, I.hi, I.hi + 0.5 * eps, I.hi + eps};
}

double smoothed_weyl(const EigenInterval& I, double eps, Ramp ramp) {
    const Profile f = smoothed_indicator(I, eps, ramp);
    const double Q = std::sqrt(std::max(0.25, I.hi + eps) - 0.25) + 1.0;
    return weyl_density(f, Q, ramp_breaks(I, eps));
}

}  // namespace

CountEstimate eigencount_estimate(const fuchsian::GroupSpec& spec, const EigenData* e, const EigenInterval& I,
                                  int K, const CountOptions& opt, Exec exec, const fuchsian::DomainSample* region) {
    require(I.lo > 0.25 && I.hi > I.lo, "eigencount_estimate: interval must lie in (1/4, inf)");
    CountEstimate c;
    const double w_c = smoothed_weyl(I, opt.eps, Ramp::centred);
    const double w_i = smoothed_weyl(I, opt.eps, Ramp::inner);
    const double w_o = smoothed_weyl(I, opt.eps, Ramp::outer);

    if (e) {
        c.exact = true;
        const Profile fc = smoothed_indicator(I, opt.eps, Ramp::centred);
        const Profile fi = smoothed_indicator(I, opt.eps, Ramp::inner);
        const Profile fo = smoothed_indicator(I, opt.eps, Ramp::outer);
        Eigen::VectorXd m = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(e->eigenvalues.size()));
        if (e->mesh) {
            m = mesh_masses(*e->mesh);
            c.volume = mesh_volume(*e->mesh);
        } else {
            c.volume = e->volume;
        }
        std::vector<double> in, sc, si, so;
        for (std::size_t j = 0; j < e->eigenvalues.size(); ++j) {
            const double lam = e->eigenvalues[j], mj = m(static_cast<Eigen::Index>(j));
            if (lam >= I.lo && lam <= I.hi) in.push_back(mj);
            sc.push_back(fc(lam) * mj);
            si.push_back(fi(lam) * mj);
            so.push_back(fo(lam) * mj);
        }
        c.estimate = ordered_sum(in);
        c.smoothed = ordered_sum(sc);
        c.smoothed_inner = ordered_sum(si);
        c.smoothed_outer = ordered_sum(so);
    } else {
        const double x_max = opt.x_max > 0.0 ? opt.x_max : I.hi + 2.0;
        const ExpSumApprox fit = exp_sum_fit(smoothed_indicator(I, opt.eps), K, x_max);
        // |f - e^{-x} fit| <= e^{-x} max(sup_error, beyond) for all x >= 0
        c.fit_error = std::max(fit.sup_error, fit.beyond);
        std::vector<double> ts{1.0};
        for (double r : fit.rates) ts.push_back(r + 1.0);
        fuchsian::DomainSample own;
        if (!region) {
            const fuchsian::Lattice lattice(spec, opt.group_radius);
            own = fuchsian::sample_domain(lattice, opt.window, opt.samples, opt.seed, exec);
            region = &own;
        }
        c.volume = region->volume;
        std::vector<double> heat1(region->points.size());
        const std::vector<double> corr = map_indices(
            region->points.size(),
            [&](std::size_t i) {
                const auto g =
                    geometric_side(spec, region->points[i], ts, opt.R, std::numeric_limits<double>::infinity());
                heat1[i] = g[0].value + g[0].error;
                double s = 0.0;
                for (std::size_t k = 1; k < ts.size(); ++k) s += fit.coefficients[k - 1] * g[k].value;
                return s;
            },
            exec);
        const MeanStat ms = mean_stat(corr);
        double weyl_fit = 0.0;
        for (std::size_t k = 1; k < ts.size(); ++k) weyl_fit += fit.coefficients[k - 1] * weyl_heat(ts[k]);
        c.estimate = c.volume * (weyl_fit + ms.mean);
        const MeanStat h1 = mean_stat(heat1);
        const double heat_trace_1 = c.volume * (weyl_heat(1.0) + h1.mean + 3.0 * h1.stderr_);
        c.estimate_error = c.volume * ms.stderr_ + c.fit_error * heat_trace_1;
    }
    c.weyl = c.volume * w_c;
    c.weyl_inner = c.volume * w_i;
    c.weyl_outer = c.volume * w_o;
    return c;
}

fuchsian::GroupSpec cyclic_cover(const fuchsian::GroupSpec& spec, int degree) {
    require(degree >= 1, "cyclic_cover: degree must be at least 1");
    fuchsian::GroupSpec out = spec;
    out.name = spec.name + "_cover" + std::to_string(degree);
    out.prune_margin = -1.0;
    for (auto& g : out.generators) {
        geom::Mobius p = geom::Mobius::identity();
        for (int i = 0; i < degree; ++i) p = p * g;
        g = p;
    }
    return out;
}

Point fermi_point(double x, double rho) {
    const double e = std::exp(x);
    return {e * std::tanh(rho), e / std::cosh(rho)};
}

fuchsian::DomainSample fermi_window_sample(double L, double window, std::size_t n, std::uint64_t seed) {
    require(L > 0.0 && window > 0.0 && n > 0, "fermi_window_sample: need L, window, n positive");
    fuchsian::DomainSample d;
    d.window = window;
    d.acceptance = 1.0;
    d.volume = 2.0 * L * std::sinh(window);
    d.points.resize(n);
    const double sw = std::sinh(window);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i);
        const double x = L * rng.uniform();
        // density cosh rho: sinh rho is uniform
        const double rho = std::asinh(sw * (2.0 * rng.uniform() - 1.0));
        d.points[i] = fermi_point(x, rho);
    }
    return d;
}

namespace {

// Transverse problem of Fourier mode kappa on [-M, M] in the sine basis
// phi_m = M^{-1/2} sin(m pi (rho + M) / 2M):
// -v'' + (1/4 + (kappa^2 + 1/4) sech^2 rho) v = lambda v.
struct Transverse {
    double M = 0.0;
    int N = 0;
    std::vector<double> moments;  // int_{-M}^{M} cos(j pi (rho + M) / 2M) sech^2 rho d rho

    Transverse(double M_, int N_) : M(M_), N(N_), moments(2 * N_ + 1, 0.0) {
        for (int j = 0; j <= 2 * N; j += 2) {
            const double w = j * pi / (2.0 * M);
            const int panels = 16 + static_cast<int>(std::ceil(w * M / pi)) * 2;
            const double v = 2.0 * quad::composite_gauss<16>(
                                       [w](double r) {
                                           const double s = 1.0 / std::cosh(r);
                                           return std::cos(w * r) * s * s;
                                       },
                                       0.0, M, panels);
            moments[j] = ((j / 2) % 2 == 0 ? 1.0 : -1.0) * v;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solve(double kappa) const {
        Eigen::MatrixXd H(N, N);
        const double c = (kappa * kappa + 0.25) / (2.0 * M);
        for (int a = 1; a <= N; ++a)
            for (int b = 1; b <= N; ++b) H(a - 1, b - 1) = c * (moments[std::abs(a - b)] - moments[a + b]);
        for (int a = 1; a <= N; ++a) {
            const double q = a * pi / (2.0 * M);
            H(a - 1, a - 1) += q * q + 0.25;
        }
        return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H);
    }

    // phi_m(rho) for m = 1..N as a row.
    Eigen::RowVectorXd basis(double rho) const {
        Eigen::RowVectorXd r(N);
        for (int m = 1; m <= N; ++m) r(m - 1) = std::sin(m * pi * (rho + M) / (2.0 * M)) / std::sqrt(M);
        return r;
    }
};

struct Mode {
    int k = 0;
    std::vector<double> lambda;
    Eigen::MatrixXd u;  // rho nodes x kept states, u = v / sqrt(cosh rho)
};

// Window heat weight sum_states e^{-t lambda} int_{-W}^{W} v^2 of one Fourier mode.
double window_weight(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, const Eigen::MatrixXd& Phi,
                     const Eigen::VectorXd& w, double t) {
    const Eigen::MatrixXd V = Phi * es.eigenvectors();
    const Eigen::VectorXd mass = V.cwiseAbs2().transpose() * w;
    double s = 0.0;
    for (Eigen::Index i = 0; i < mass.size(); ++i) s += std::exp(-t * es.eigenvalues()(i)) * mass(i);
    return s;
}

}  // namespace

double CylinderSpectrum::box_error(double t) const {
    const double d = options.box - options.window;
    require(d * d >= 2.0 * t, "box_error: walls too close for this t");
    return (2.0 * modes + 1.0) * 2.0 * options.window * std::exp(-d * d / (4.0 * t)) / std::sqrt(4.0 * pi * t);
}

double CylinderSpectrum::mode_tail() const {
    const std::size_t n = mode_weight.size();
    if (n < 2) return mode_weight.empty() ? 0.0 : mode_weight.back();
    const double last = 2.0 * mode_weight[n - 1];
    const double r = mode_weight[n - 1] / mode_weight[n - 2];
    return r < 0.9 ? last * r / (1.0 - r) : 10.0 * last;
}

CylinderSpectrum synthesize_cylinder(const fuchsian::GroupSpec& spec, const CylinderOptions& opt) {
    require(spec.generators.size() == 1, "synthesize_cylinder: needs a cyclic group");
    const geom::Mobius& g = spec.generators.front();
    require(std::abs(g.b()) <= 1e-12 * std::abs(g.a()) && std::abs(g.c()) <= 1e-12 * std::abs(g.a()),
            "synthesize_cylinder: generator must have its axis on the imaginary line");
    const double L = 2.0 * std::abs(std::log(std::abs(g.a())));
    require(L > 0.0, "synthesize_cylinder: generator must be hyperbolic");
    require(opt.box > opt.window && opt.window > 0.0, "synthesize_cylinder: need 0 < window < box");
    require(opt.basis >= 8 && opt.rho_nodes >= 20 && opt.rho_nodes % 20 == 0,
            "synthesize_cylinder: basis >= 8 and rho_nodes a multiple of 20");

    CylinderSpectrum out;
    out.options = opt;
    out.core_length = L;

    std::vector<double> rho, wr;
    quad::composite_gauss_nodes<20>(-opt.window, opt.window, opt.rho_nodes / 20, rho, wr);
    const auto nr = static_cast<Eigen::Index>(rho.size());
    // weight in d rho for v^2, and the u-scaling 1 / sqrt(cosh rho)
    Eigen::VectorXd w(nr);
    for (Eigen::Index i = 0; i < nr; ++i) w(i) = wr[i];

    auto weights_for = [&](const Transverse& tr, Eigen::MatrixXd& Phi) {
        Phi.resize(nr, tr.N);
        for (Eigen::Index i = 0; i < nr; ++i) Phi.row(i) = tr.basis(rho[i]);
    };

    const Transverse full(opt.box, opt.basis);
    const Transverse coarse(opt.box, (3 * opt.basis) / 4);
    Eigen::MatrixXd Phi, PhiC;
    weights_for(full, Phi);
    weights_for(coarse, PhiC);

    std::vector<Mode> modes;
    double total = 0.0, total_coarse = 0.0;
    for (int k = 0;; ++k) {
        const double kappa = 2.0 * pi * k / L;
        const auto es = full.solve(kappa);
        const double mult = k == 0 ? 1.0 : 2.0;
        const double wk = window_weight(es, Phi, w, opt.t_min);
        total += mult * wk;
        total_coarse += mult * window_weight(coarse.solve(kappa), PhiC, w, opt.t_min);
        out.mode_weight.push_back(wk);

        Mode m;
        m.k = k;
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()(i) <= opt.lambda_max) keep.push_back(i);
        m.u.resize(nr, static_cast<Eigen::Index>(keep.size()));
        for (std::size_t s = 0; s < keep.size(); ++s) {
            m.lambda.push_back(es.eigenvalues()(keep[s]));
            m.u.col(static_cast<Eigen::Index>(s)) = Phi * es.eigenvectors().col(keep[s]);
        }
        for (Eigen::Index i = 0; i < nr; ++i) m.u.row(i) /= std::sqrt(std::cosh(rho[i]));
        modes.push_back(std::move(m));

        const double w0 = out.mode_weight.front();
        if (k >= 2 && wk < opt.mode_cut * w0 && wk < out.mode_weight[k - 1]) break;
        // weights that stop decaying far below the k = 0 weight are basis truncation noise
        if (k >= 500 || (k >= 10 && wk < 1e-8 * w0 && wk > 0.5 * out.mode_weight[k - 10]))
            throw NumericalError("synthesize_cylinder: Fourier mode weights stagnate; increase the basis");
    }
    out.modes = static_cast<int>(modes.size()) - 1;
    out.basis_change = std::abs(total - total_coarse);

    // Mesh: x trapezoid nodes exact for products of modes |k| <= modes.
    const int nx = 2 * out.modes + 2;
    EigenMesh mesh;
    for (int ix = 0; ix < nx; ++ix) {
        const double x = L * ix / nx;
        for (Eigen::Index i = 0; i < nr; ++i) {
            mesh.points.push_back(fermi_point(x, rho[i]));
            mesh.weights.push_back(L / nx * wr[i] * std::cosh(rho[i]));
        }
    }

    struct Row {
        double lambda;
        int k;
        int kind;  // 0: k = 0, 1: cos, 2: sin
        Eigen::Index state;
    };
    std::vector<Row> rows;
    for (const auto& m : modes)
        for (std::size_t s = 0; s < m.lambda.size(); ++s) {
            const auto si = static_cast<Eigen::Index>(s);
            if (m.k == 0) {
                rows.push_back({m.lambda[s], 0, 0, si});
            } else {
                rows.push_back({m.lambda[s], m.k, 1, si});
                rows.push_back({m.lambda[s], m.k, 2, si});
            }
        }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.lambda < b.lambda; });

    const auto np = static_cast<Eigen::Index>(mesh.points.size());
    mesh.values.resize(static_cast<Eigen::Index>(rows.size()), np);
    EigenData& e = out.data;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Row& row = rows[r];
        const Mode& m = modes[row.k];
        e.eigenvalues.push_back(row.lambda);
        const double kappa = 2.0 * pi * row.k / L;
        for (int ix = 0; ix < nx; ++ix) {
            const double x = L * ix / nx;
            const double ang = row.kind == 0 ? 1.0 / std::sqrt(L)
                               : row.kind == 1 ? std::sqrt(2.0 / L) * std::cos(kappa * x)
                                               : std::sqrt(2.0 / L) * std::sin(kappa * x);
            for (Eigen::Index i = 0; i < nr; ++i)
                mesh.values(static_cast<Eigen::Index>(r), ix * nr + i) = ang * m.u(i, row.state);
        }
    }
    e.volume = mesh_volume(mesh);
    e.lambda_max = opt.lambda_max;
    e.mesh = std::move(mesh);
    return out;
}

PretraceCheck pretrace_check(const fuchsian::GroupSpec& spec, const CylinderSpectrum& cyl, double t, double R,
                             Exec exec) {
    require(cyl.data.mesh.has_value(), "pretrace_check: eigen data needs a mesh");
    require(t >= cyl.options.t_min, "pretrace_check: t below the synthesis t_min");
    const EigenMesh& mesh = *cyl.data.mesh;
    PretraceCheck c;
    c.t = t;
    const HeatTrace h = heat_trace_spectral(cyl.data, t);
    c.spectral = h.value;
    c.spectral_error = h.tail + cyl.box_error(t) + cyl.mode_tail() + cyl.basis_change + 1e-13 * h.value;

    const double vol = h.volume;
    c.weyl = vol * weyl_heat(t);
    const double weyl_error = 1e-12 * c.weyl;

    // Displacements are invariant under the flow along the core, which commutes
    // with the group: one column of the mesh at x = 0 carries the whole sum.
    const auto nr = static_cast<std::size_t>(cyl.options.rho_nodes);
    const std::size_t nx = mesh.points.size() / nr;
    std::vector<double> val(nr), err(nr);
    for_each_index(
        nr,
        [&](std::size_t i) {
            const GeometricSide gs = geometric_side(spec, mesh.points[i], t, R);
            const double w = static_cast<double>(nx) * mesh.weights[i];
            val[i] = w * gs.value;
            err[i] = w * gs.error;
        },
        exec);
    c.geometric = ordered_sum(val);
    c.geometric_error = ordered_sum(err);
    c.residual = c.spectral - c.weyl - c.geometric;
    c.combined_error = c.spectral_error + c.geometric_error + weyl_error;
    return c;
}

}  // namespace hyplab::trace
