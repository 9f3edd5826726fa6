#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "hyplab/cli.hpp"
#include "hyplab/fuchsian.hpp"
#include "hyplab/parallel.hpp"
#include "hyplab/propagator.hpp"
#include "hyplab/qe.hpp"
#include "hyplab/rng.hpp"
#include "hyplab/selberg.hpp"
#include "hyplab/spectral_action.hpp"
#include "hyplab/trace.hpp"

using namespace hyplab;
using geom::Point;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;
const std::string data_dir = HYPLAB_DATA_DIR;

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

double z_score(double a, double ea, double b, double eb) { return std::abs(a - b) / std::hypot(ea, eb); }

Verdict selberg_roundtrip() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const char* k : {"disc", "heat", "gaussian", "bump"}) {
        const auto r = selberg::selberg_roundtrip(k);
        worst = std::max(worst, r.sup_error);
        v.require(r.sup_error <= 1e-5, std::string(k) + " roundtrip " + fmt("%.2e", r.sup_error));
    }
    const double sec = seconds_since(t0);
    v.require(sec < 30.0, "runtime");
    v.note("max sup error " + fmt("%.2e", worst) + " over 4 kernels, " + fmt("%.1f s", sec));
    return v;
}

Verdict eigen_identity() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const Point centre{0.0, 1.0}, z{0.3, 1.2};
    const double d = geom::hyp_dist(centre, z);
    double worst = 0.0;
    for (double t : {1.0, 2.0, 3.0})
        for (double s : {0.5, 1.0, 2.0}) {
            const auto phi = std::make_shared<selberg::SphericalOracle>(selberg::spherical_oracle(s, t + d + 1.0));
            propagator::Observable u;
            u.eval = [phi, centre](const Point& w) { return (*phi)(geom::hyp_dist(centre, w)); };
            const double applied = propagator::apply_Pt_quadrature(u, z, t).value;
            const double predicted = spectral::h_t_closed(t, s) * (*phi)(d);
            worst = std::max(worst, std::abs(applied - predicted) / std::abs(predicted));
        }
    const double sec = seconds_since(t0);
    v.require(worst <= 1e-3, "relative error");
    v.require(sec < 120.0, "runtime");
    v.note("max relative error " + fmt("%.2e", worst) + " on 3x3 grid, " + fmt("%.1f s", sec));
    return v;
}

Verdict cross_formula() {
    Verdict v;
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const double t = 0.5 + 0.5 * i;
        const auto h = selberg::selberg_forward(selberg::disc_kernel(t));
        for (int j = 0; j < 10; ++j) {
            const double s = 0.5 * j;
            worst = std::max(worst, std::abs(h(s) - spectral::h_t_closed(t, s)));
        }
    }
    v.require(worst <= 1e-6, "agreement");
    v.note("max |difference| " + fmt("%.2e", worst) + " on 10x10 grid");
    return v;
}

Verdict spectral_constants() {
    Verdict v;
    const spectral::SpectralInterval I{1.0, 2.0};
    const auto pb = spectral::verify_period_bound(I, 50, 64);
    v.require(pb.c_I > 0.0, "c_I > 0");
    v.require(pb.k0 <= 50, "k0 <= 50");
    v.require(pb.max_h_from_k0 < -2.0 * pb.c_I + 1e-6, "h(t_k) < -2 c_I for k >= k0");
    const auto L = spectral::lipschitz_bound(spectral::chebyshev_grid(I, 33), 1.1, 20.0, 200);
    const auto cc = spectral::chain_constants(pb, L);
    const auto r = spectral::time_avg_lower_bound(I, {50.0, 100.0, 200.0}, cc, 64);
    for (const auto& x : r) v.require(x.value > 0.0, "time average positive at T=" + fmt("%g", x.T));
    const double variation = std::abs(r[2].value - r[1].value) / r[1].value;
    v.require(variation <= 0.2, "variation between T=100 and T=200");
    v.note("c_I " + fmt("%.4f", pb.c_I) + ", k0 " + std::to_string(pb.k0) + ", min averages " +
           fmt("%.4f", r[0].value) + "/" + fmt("%.4f", r[1].value) + "/" + fmt("%.4f", r[2].value) +
           ", variation " + fmt("%.1f%%", 100.0 * variation));
    return v;
}

Verdict lipschitz_uniformity() {
    Verdict v;
    const double base = spectral::lipschitz_bound(spectral::chebyshev_grid({0.5, 5.0}, 33), 1.1, 20.0, 200).bound;
    const double wide = spectral::lipschitz_bound(spectral::chebyshev_grid({0.5, 10.0}, 65), 1.1, 20.0, 200).bound;
    const double half = spectral::lipschitz_bound(spectral::chebyshev_grid({0.5, 5.0}, 33), 1.1, 20.0, 200, 5e-5).bound;
    const double dw = std::abs(wide - base) / base, dh = std::abs(half - base) / base;
    v.require(std::isfinite(base) && base > 0.0, "finite bound");
    v.require(dw <= 0.1, "s-range doubling");
    v.require(dh <= 0.1, "delta halving");
    v.note("L " + fmt("%.4f", base) + ", s-range doubled " + fmt("%+.2f%%", 100.0 * (wide - base) / base) +
           ", delta halved " + fmt("%+.2e%%", 100.0 * (half - base) / base));
    return v;
}

Verdict heat_kernel() {
    Verdict v;
    double mass_err = 0.0, min_val = INFINITY;
    for (double t : {0.5, 1.0, 2.0}) {
        for (int i = 0; i <= 600; ++i) min_val = std::min(min_val, selberg::heat_kernel(t, 0.01 * i));
        const auto& p = selberg::heat_kernel_table(t);
        const double mass = simpson([&](double r) { return 2.0 * pi * std::sinh(r) * p(r); }, 0.0, p.support, 40000);
        mass_err = std::max(mass_err, std::abs(mass - 1.0));
        const auto b = selberg::fit_heat_bound(t);
        v.require(std::isfinite(b.c_gaussian) && b.c_gaussian > 0.0, "finite C_t at t=" + fmt("%g", t));
    }
    v.require(min_val > 0.0, "positivity on [0, 6]");
    v.require(mass_err <= 1e-6, "unit mass");
    double semi = 0.0;
    const auto& p05 = selberg::heat_kernel_table(0.5);
    for (double d : {0.0, 1.0}) {
        const double conv = selberg::radial_convolution(p05, [](double r) { return selberg::heat_kernel(1.0, r); }, d, 64);
        semi = std::max(semi, std::abs(conv / selberg::heat_kernel(1.5, d) - 1.0));
    }
    v.require(semi <= 1e-4, "semigroup");
    v.note("min p_t " + fmt("%.2e", min_val) + ", mass error " + fmt("%.1e", mass_err) + ", semigroup " +
           fmt("%.1e", semi));
    return v;
}

Verdict midpoint() {
    Verdict v;
    const fuchsian::Lattice lat(fuchsian::load_group_spec(data_dir + "/bolza.json"), 9.0);
    const double window = lat.covering_radius(5.0);
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 5; ++k) {
        CounterRng rng(2024, k);
        propagator::OrbitWave w;
        w.p = geom::polar_from(lat.base(), 2.0 * pi * rng.uniform(), 2.0 * rng.uniform());
        w.a = 0.5 + rng.uniform();
        w.alpha = rng.uniform();
        w.beta = 2.0 * pi * rng.uniform();
        w.decay = rng.uniform();
        const auto c = propagator::midpoint_change_of_var_check(propagator::orbit_tangent_function(lat, w), 1.5, lat,
                                                               window, 100000, 500 + k);
        const double z = z_score(c.lhs.value, c.lhs.error, c.rhs.value, c.rhs.error);
        worst = std::max(worst, z);
        v.require(z <= 3.0, "function " + std::to_string(k));
    }
    v.note("max z-score " + fmt("%.2f", worst) + " over 5 functions at n = 1e5");
    return v;
}

Verdict lens() {
    Verdict v;
    std::vector<double> x, y;
    for (int i = 0; i <= 6; ++i) {
        const double t = 3.0 + 0.5 * i;
        x.push_back(t - 1.0);
        y.push_back(std::log(propagator::lens_volume(t, 2.0)));
    }
    const auto fit = propagator::least_squares(x, y);
    v.require(fit.slope >= 0.9 && fit.slope <= 1.1, "slope in [0.9, 1.1]");
    double defect = 0.0;
    for (double t : {3.0, 4.5, 6.0})
        for (double r : {0.5, t, 1.9 * t}) {
            const auto g = propagator::lens_geometry(t, r);
            defect = std::max({defect, std::abs(g.vertex_to_midpoint - g.rho), g.right_angle_defect,
                               std::abs(std::cosh(g.rho) - std::cosh(t) / std::cosh(0.5 * r)) / std::cosh(t)});
        }
    v.require(defect <= 1e-9, "Pythagoras relation");
    v.note("slope " + fmt("%.4f", fit.slope) + " over t in [3, 6], Pythagoras defect " + fmt("%.1e", defect));
    return v;
}

Verdict enumeration() {
    Verdict v;
    const auto cyc = fuchsian::load_group_spec(data_dir + "/cyclic_L2.json");
    const auto& g = cyc.generators[0];
    std::size_t checked = 0;
    for (double R : {1.9, 4.1, 9.7, 14.3}) {
        for (const Point z : {Point{0.0, 1.0}, Point{0.7, 1.4}}) {
            const auto ball = fuchsian::group_ball(cyc, z, R);
            std::size_t brute = 0;
            geom::Mobius m = geom::Mobius::identity(), mi = geom::Mobius::identity();
            for (int k = 1; k <= 40; ++k) {
                m = m * g;
                mi = mi * g.inverse();
                for (const auto& h : {m, mi}) {
                    if (geom::hyp_dist(z, geom::mobius_apply(h, z)) > R) continue;
                    ++brute;
                    std::size_t hits = 0;
                    for (const auto& e : ball.elements) hits += e.g.approx_equal(h) ? 1 : 0;
                    v.require(hits == 1, "cyclic element found exactly once");
                }
            }
            v.require(ball.elements.size() == brute, "cyclic ball size");
            ++checked;
        }
    }
    const auto oct = fuchsian::load_group_spec(data_dir + "/bolza.json");
    const double ell = fuchsian::systole(oct, 4.0).value;
    std::size_t bound_checks = 0;
    for (double R : {3.0, 4.0, 5.0, 6.0, 7.0}) {
        const auto b = fuchsian::group_ball(oct, oct.base_point, R);
        v.require(static_cast<double>(b.elements.size()) <= fuchsian::lattice_count_bound(R, ell), "lattice bound");
        ++bound_checks;
    }
    const fuchsian::Lattice lat(oct, 9.0);
    const auto s = fuchsian::sample_domain(lat, 2.45, 20000, 17);
    const double mass = s.volume / (4.0 * pi), mass_err = s.volume_error / (4.0 * pi);
    v.require(std::abs(mass - 1.0) <= 3.0 * mass_err, "tiling mass");
    int one = 0;
    for (int k = 0; k < 2000; ++k) {
        CounterRng rng(23, k);
        if (lat.translates_in_domain(geom::ball_point(oct.base_point, 3.0, rng.uniform(), rng.uniform())) == 1) ++one;
    }
    v.require(one == 2000, "every point in exactly one translate");
    v.note(std::to_string(checked) + " cyclic balls exact, " + std::to_string(bound_checks) +
           " octagon balls within bound, tiling mass " + fmt("%.4f", mass) + " +- " + fmt("%.4f", mass_err));
    return v;
}

Verdict pretrace() {
    Verdict v;
    const auto spec = fuchsian::load_group_spec(data_dir + "/cyclic_L2.json");
    const trace::EigenInterval I{1.25, 4.25};
    double worst_ratio = 0.0, prev = INFINITY;
    std::string gaps;
    bool exact = true;
    for (int n : {1, 2, 4}) {
        const auto cover = trace::cyclic_cover(spec, n);
        const auto cyl = trace::synthesize_cylinder(cover);
        for (double t : {0.5, 1.0}) {
            const auto p = trace::pretrace_check(cover, cyl, t, 16.0);
            worst_ratio = std::max(worst_ratio, std::abs(p.residual) / p.combined_error);
            v.require(std::abs(p.residual) <= p.combined_error,
                      "pre-trace degree " + std::to_string(n) + " t=" + fmt("%g", t));
        }
        const auto c = trace::eigencount_estimate(cover, &cyl.data, I, 0);
        const Eigen::VectorXd m = trace::mesh_masses(*cyl.data.mesh);
        double brute = 0.0;
        for (std::size_t j = 0; j < cyl.data.eigenvalues.size(); ++j)
            if (cyl.data.eigenvalues[j] >= I.lo && cyl.data.eigenvalues[j] <= I.hi) brute += m(j);
        exact = exact && c.exact && std::abs(c.estimate - brute) <= 1e-12 * std::max(1.0, brute);
        const double gap = std::abs(c.estimate - c.weyl) / c.volume;
        v.require(gap < prev, "monotone approach at degree " + std::to_string(n));
        prev = gap;
        gaps += (gaps.empty() ? "" : "/") + fmt("%.4f", gap);
    }
    v.require(exact, "counts match exact counts");
    v.note("max |residual|/error " + fmt("%.2f", worst_ratio) + ", |count - Weyl|/Vol " + gaps + " at degrees 1/2/4");
    return v;
}

Verdict qe_statistic() {
    Verdict v;
    const trace::EigenInterval I{1.25, 4.25}, J{2.0, 3.5};
    const int n = 7;
    const auto e = qe::random_flat_eigendata(n, I, 3, 2.5);
    const auto& m = *e.mesh;
    propagator::Observable a;
    a.eval = [](const Point& z) { return std::cos(2.0 * pi * z.x) + 0.5 * std::sin(4.0 * pi * z.y) + z.x * z.y; };
    const auto r = qe::qe_variance(e, a, J);
    long double mean = 0.0L, vol = 0.0L, sum = 0.0L;
    for (std::size_t p = 0; p < m.points.size(); ++p) {
        mean += static_cast<long double>(m.weights[p]) * a(m.points[p]);
        vol += m.weights[p];
    }
    mean /= vol;
    for (std::size_t j = 0; j < e.eigenvalues.size(); ++j) {
        if (e.eigenvalues[j] < J.lo || e.eigenvalues[j] > J.hi) continue;
        long double me = 0.0L;
        for (std::size_t p = 0; p < m.points.size(); ++p) {
            const long double psi = m.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p));
            me += static_cast<long double>(m.weights[p]) * a(m.points[p]) * psi * psi;
        }
        sum += (me - mean) * (me - mean);
    }
    const double brute = std::abs(r.variance_sum - static_cast<double>(sum));
    v.require(brute <= 1e-12, "brute-force equivalence");
    const double constant = qe::qe_variance(e, propagator::constant_observable(3.0), I).variance_sum;
    v.require(constant <= 1e-20, "constant observable gives zero");
    propagator::Observable shifted = a;
    shifted.eval = [a](const Point& z) { return a(z) + 7.25; };
    const double shift = std::abs(qe::qe_variance(e, shifted, I).variance_sum - qe::qe_variance(e, a, I).variance_sum);
    v.require(shift <= 1e-10, "shift invariance");
    v.note("brute-force difference " + fmt("%.1e", brute) + ", constant " + fmt("%.1e", constant) + ", shift " +
           fmt("%.1e", shift));
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

Verdict determinism() {
    Verdict v;
    const fs::path root = fs::temp_directory_path() / "hyplab_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream(root / "wave.json") << R"({"type": "wave", "kx": 1, "ky": 2})";
    }
    const std::vector<std::vector<std::string>> commands{
        {"geom-check", "--n", "500"},
        {"group", "ball", "--R", "6"},
        {"group", "injrad", "--n", "300", "--cap", "4"},
        {"selberg", "forward", "--kernel", "bump", "--samples", "21"},
        {"selberg", "inverse", "--t", "1", "--step", "0.1"},
        {"selberg", "heat", "--t", "0.5", "--step", "0.05"},
        {"propagator", "kernel", "--t", "1,2", "--s", "0.5,2"},
        {"propagator", "ergodic-decay", "--t", "1,1.5", "--outer", "200", "--inner", "64"},
        {"propagator", "midpoint-check", "--n", "2000", "--count", "2"},
        {"propagator", "lens-volume", "--t", "2,3", "--n", "5000"},
        {"spectral-action", "--grid", "12", "--T", "20,40"},
        {"trace", "weyl"},
        {"trace", "pretrace", "--degrees", "1", "--t", "1"},
        {"trace", "count", "--degrees", "1,2"},
        {"trace", "expfit", "--K", "0,4,8"},
        {"qe", "--synthetic", "5", "--observable", (root / "wave.json").string()},
    };
    std::size_t csvs = 0;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        std::vector<fs::path> dirs;
        for (const char* threads : {"1", "4", "1"}) {
            const fs::path out = root / (std::to_string(i) + "_" + std::to_string(dirs.size()));
            std::vector<std::string> args{"hyplab", "--seed", "7", "--threads", threads, "--out", out.string()};
            args.insert(args.end(), commands[i].begin(), commands[i].end());
            const int code = cli::run(args);
            v.require(code == 0, "exit code of '" + commands[i][0] + (commands[i].size() > 1 ? " " + commands[i][1] : "") + "'");
            dirs.push_back(out);
        }
        for (const auto& f : fs::directory_iterator(dirs[0])) {
            if (f.path().extension() != ".csv") continue;
            ++csvs;
            const std::string body = slurp(f.path());
            for (std::size_t k = 1; k < dirs.size(); ++k)
                v.require(!body.empty() && body == slurp(dirs[k] / f.path().filename()),
                          f.path().filename().string() + " identical");
        }
    }
    set_thread_count(0);
    v.note(std::to_string(csvs) + " CSV files from " + std::to_string(commands.size()) +
           " subcommands identical across reruns and --threads 1/4");
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"Selberg roundtrip", selberg_roundtrip},
        {"eigen-identity oracle", eigen_identity},
        {"cross-formula h_t(s)", cross_formula},
        {"spectral-action constants", spectral_constants},
        {"Lipschitz uniformity", lipschitz_uniformity},
        {"heat kernel", heat_kernel},
        {"midpoint change of variables", midpoint},
        {"lens volume asymptotics", lens},
        {"group enumeration", enumeration},
        {"pre-trace consistency", pretrace},
        {"QE statistic", qe_statistic},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.note(std::string("exception: ") + e.what());
        }
        failed += v.pass ? 0 : 1;
        std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
