#include "hyplab/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "hyplab/errors.hpp"
#include "hyplab/fuchsian.hpp"
#include "hyplab/geom.hpp"
#include "hyplab/parallel.hpp"
#include "hyplab/propagator.hpp"
#include "hyplab/qe.hpp"
#include "hyplab/rng.hpp"
#include "hyplab/selberg.hpp"
#include "hyplab/spectral_action.hpp"
#include "hyplab/trace.hpp"
#include "json.hpp"

#ifndef HYPLAB_DATA_DIR
#define HYPLAB_DATA_DIR "data"
#endif

namespace hyplab::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using geom::Point;
constexpr double pi = std::numbers::pi;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A tolerance check that did not hold; reported like a numerical failure.
struct CheckFailed : std::runtime_error {
    json detail;
    CheckFailed(const std::string& what, json d) : std::runtime_error(what), detail(std::move(d)) {}
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string num(std::size_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string str() const {
        std::string s;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
            s += "\n";
        };
        line(header);
        for (const auto& r : rows) line(r);
        return s;
    }
};

struct Common {
    std::uint64_t seed = 1;
    double tol = -1.0;
    mutable json used_tol = json::object();
    std::string out = "out";
    int threads = 0;
    std::string group;
};

class Output {
public:
    explicit Output(fs::path dir) : dir_(std::move(dir)) {}

    void csv(const std::string& name, const Table& t) { write(name + ".csv", t.str()); }
    void json_file(const std::string& name, const json& j) { write(name + ".json", j.dump(2) + "\n"); }
    const std::vector<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

    void write(const std::string& file, const std::string& body) {
        const fs::path p = dir_ / file;
        std::ofstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + p.string());
        f << body;
        files_.push_back(p.string());
    }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

double tol_or(const Common& c, double fallback, const char* name = "tol") {
    const double v = c.tol > 0.0 ? c.tol : fallback;
    c.used_tol[name] = v;
    return v;
}

std::string group_path(const Common& c, const char* fallback) {
    return c.group.empty() ? std::string(HYPLAB_DATA_DIR) + "/" + fallback : c.group;
}

void need_pair(const std::vector<double>& v, const char* flag) {
    if (v.size() != 2 || !(v[0] < v[1])) throw UsageError(std::string(flag) + " expects lo,hi with lo < hi");
}

Point point_of(const std::vector<double>& v, const char* flag) {
    if (v.size() != 2 || !(v[1] > 0.0)) throw UsageError(std::string(flag) + " expects x,y with y > 0");
    return {v[0], v[1]};
}

std::string word_str(const std::vector<int>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? " " : "") + std::to_string(w[i]);
    return s;
}

json mobius_json(const geom::Mobius& g) { return json::array({g.a(), g.b(), g.c(), g.d()}); }

// Observable files: {"type": "constant", "value": c}, {"type": "cell_sign", "period": p},
// {"type": "orbit_bump", "point": [x, y], "radius": a} (invariant under the --group),
// {"type": "wave", "kx": k, "ky": m} = cos(2 pi k x) + sin(2 pi m y).
propagator::Observable load_observable(const std::string& path, const std::string& group) {
    std::ifstream in(path);
    if (!in) throw UsageError("--observable: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw UsageError("--observable: " + std::string(e.what()));
    }
    const std::string type = j.value("type", "");
    if (type == "constant") return propagator::constant_observable(j.value("value", 1.0));
    if (type == "cell_sign") return propagator::cell_sign(j.value("period", 2.0));
    if (type == "wave") {
        const double kx = j.value("kx", 1.0), ky = j.value("ky", 0.0);
        propagator::Observable a;
        a.eval = [kx, ky](const Point& z) { return std::cos(2.0 * pi * kx * z.x) + std::sin(2.0 * pi * ky * z.y); };
        a.sup_bound = 2.0;
        return a;
    }
    if (type == "orbit_bump") {
        const auto p = j.value("point", std::vector<double>{0.0, 1.0});
        auto lattice = std::make_shared<fuchsian::Lattice>(fuchsian::load_group_spec(group), 12.0);
        const propagator::Observable a = propagator::orbit_bump(*lattice, point_of(p, "--observable point"),
                                                                j.value("radius", 1.0));
        propagator::Observable out = a;
        out.eval = [lattice, a](const Point& z) { return a(z); };
        return out;
    }
    throw UsageError("--observable: unknown type '" + type + "'");
}

// ---------------------------------------------------------------- geom-check

struct GeomArgs {
    std::size_t n = 1000;
};

void geom_check(const Common& c, const GeomArgs& a, Output& out, json& summary) {
    const double tol = tol_or(c, 1e-9);
    const Point base{0.0, 1.0};
    const auto pts = geom::sample_ball(base, 3.0, a.n, c.seed);
    double polar = 0.0, isometry = 0.0, triangle = 0.0, flow = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CounterRng rng(derive_seed(c.seed, 1), i);
        const Point& z = pts[i];
        const Point& w = pts[(i + 1) % pts.size()];
        const Point& x = pts[(i + 2) % pts.size()];
        const auto [theta, r] = geom::polar_coords(base, z);
        const Point back = geom::polar_from(base, theta, r);
        polar = std::max(polar, geom::hyp_dist(back, z));
        const geom::Mobius g = geom::Mobius::rotation_about_i(2.0 * pi * rng.uniform()) *
                               geom::Mobius::translation_along_imaginary_axis(4.0 * rng.uniform() - 2.0);
        const double d = geom::hyp_dist(z, w);
        isometry = std::max(isometry, std::abs(geom::hyp_dist(geom::mobius_apply(g, z), geom::mobius_apply(g, w)) - d) /
                                          std::max(1.0, d));
        triangle = std::max(triangle, geom::hyp_dist(z, x) - geom::hyp_dist(z, w) - geom::hyp_dist(w, x));
        const double t = 3.0 * rng.uniform();
        const geom::UnitTangent v{z, 2.0 * pi * rng.uniform()};
        flow = std::max(flow, std::abs(geom::hyp_dist(z, geom::geodesic_flow(v, t).base) - t));
    }
    Table tab{{"check", "max_error", "tol", "pass"}, {}};
    bool ok = true;
    for (const auto& [name, err] : std::vector<std::pair<std::string, double>>{
             {"polar_roundtrip", polar}, {"isometry", isometry}, {"triangle", triangle}, {"geodesic_flow", flow}}) {
        const bool pass = err <= tol;
        ok = ok && pass;
        tab.rows.push_back({name, num(err), num(tol), pass ? "1" : "0"});
        summary[name] = err;
    }
    out.csv("geom_check", tab);
    summary["pass"] = ok;
    if (!ok) throw CheckFailed("geom-check: a check exceeded --tol", summary);
}

// ---------------------------------------------------------------- group

struct GroupArgs {
    double R = 4.0;
    double thin_R = 1.0;
    std::vector<double> point;
    std::size_t n = 2000;
    double cap = 6.0;
    double search = 4.0;
    double window = -1.0;
};

void group_ball_cmd(const Common& c, const GroupArgs& a, Output& out, json& summary) {
    const auto spec = fuchsian::load_group_spec(group_path(c, "bolza.json"));
    const Point z = a.point.empty() ? spec.base_point : point_of(a.point, "--point");
    const auto ball = fuchsian::group_ball(spec, z, a.R);
    Table t{{"index", "displacement", "trace", "word"}, {}};
    for (std::size_t i = 0; i < ball.elements.size(); ++i) {
        const auto& e = ball.elements[i];
        t.rows.push_back({num(i), num(e.displacement), num(std::abs(e.g.trace())), word_str(e.word)});
    }
    out.csv("group_ball", t);
    summary["group"] = spec.name;
    summary["R"] = a.R;
    summary["elements"] = ball.elements.size();
    if (!ball.elements.empty()) {
        const double ell = ball.elements.front().displacement;
        summary["min_displacement"] = ell;
        summary["count_bound"] = fuchsian::lattice_count_bound(a.R, ell);
    }
}

void group_injrad_cmd(const Common& c, const GroupArgs& a, Output& out, json& summary) {
    const fuchsian::Lattice lattice(fuchsian::load_group_spec(group_path(c, "bolza.json")), 2.0 * a.cap + 2.0);
    const double window = a.window > 0.0 ? a.window : lattice.covering_radius(a.cap);
    const auto sample = fuchsian::sample_domain(lattice, window, a.n, c.seed);
    std::vector<fuchsian::InjRad> r(sample.points.size());
    for_each_index(r.size(), [&](std::size_t i) { r[i] = lattice.injectivity_radius(sample.points[i], a.cap); });
    Table t{{"x", "y", "injrad", "capped"}, {}};
    double lo = INFINITY;
    for (std::size_t i = 0; i < r.size(); ++i) {
        t.rows.push_back({num(sample.points[i].x), num(sample.points[i].y), num(r[i].value), r[i].capped ? "1" : "0"});
        lo = std::min(lo, r[i].value);
    }
    out.csv("group_injrad", t);
    summary["window"] = window;
    summary["min_injrad"] = lo;
}

void group_systole_cmd(const Common& c, const GroupArgs& a, Output& out, json& summary) {
    const auto spec = fuchsian::load_group_spec(group_path(c, "bolza.json"));
    const auto s = fuchsian::systole(spec, a.search);
    summary["group"] = spec.name;
    summary["systole"] = s.value;
    summary["element"] = mobius_json(s.element);
    summary["enumeration_radius"] = s.enumeration_radius;
    out.json_file("group_systole", summary);
}

void group_thin_cmd(const Common& c, const GroupArgs& a, Output& out, json& summary) {
    const fuchsian::Lattice lattice(fuchsian::load_group_spec(group_path(c, "bolza.json")), 2.0 * a.cap + 2.0);
    const double window = a.window > 0.0 ? a.window : lattice.covering_radius(a.cap);
    const auto f = fuchsian::thin_part_fraction(lattice, a.thin_R, a.n, c.seed, window);
    summary["R"] = a.thin_R;
    summary["window"] = window;
    summary["fraction"] = f.value;
    summary["error"] = f.error;
    out.json_file("group_thin_part", summary);
}

// ---------------------------------------------------------------- selberg

struct SelbergArgs {
    std::string kernel = "disc";
    double t = 1.0;
    double s_max = 10.0;
    int samples = 201;
    double rho_max = 6.0;
    double step = 0.01;
};

selberg::RadialKernel kernel_of(const SelbergArgs& a) {
    if (a.kernel == "disc") return selberg::disc_kernel(a.t);
    if (a.kernel == "gaussian") return selberg::gaussian_kernel(1.0, 7.0);
    if (a.kernel == "bump") return selberg::bump_kernel(2.0);
    if (a.kernel == "heat") return selberg::heat_kernel_table(a.t);
    throw UsageError("--kernel must be disc, gaussian, bump or heat");
}

void selberg_forward_cmd(const Common&, const SelbergArgs& a, Output& out, json& summary) {
    const auto h = selberg::selberg_forward(kernel_of(a), a.kernel == "bump" ? 96 : 48);
    Table t{{"s", "h"}, {}};
    for (int i = 0; i < a.samples; ++i) {
        const double s = a.s_max * i / std::max(1, a.samples - 1);
        t.rows.push_back({num(s), num(h(s))});
    }
    out.csv("selberg_forward", t);
    const selberg::RadialKernel k = kernel_of(a);
    Table g{{"u", "g"}, {}};
    for (int i = 0; i < a.samples; ++i) {
        const double u = k.support * i / std::max(1, a.samples - 1);
        g.rows.push_back({num(u), num(selberg::abel_transform(k, u))});
    }
    out.csv("selberg_abel", g);
    summary["kernel"] = a.kernel;
    summary["h0"] = h(0.0);
}

void selberg_inverse_cmd(const Common& c, const SelbergArgs& a, Output& out, json& summary) {
    selberg::InverseOptions opt;
    opt.roundtrip_tol = tol_or(c, 1e-5);
    const double band = std::sqrt(42.0 / a.t);
    const auto r = selberg::selberg_inverse(selberg::heat_multiplier(a.t), band, opt);
    Table t{{"rho", "k"}, {}};
    for (double rho = 0.0; rho <= a.rho_max + 1e-12; rho += a.step) t.rows.push_back({num(rho), num(r.kernel(rho))});
    out.csv("selberg_inverse", t);
    summary["multiplier"] = "heat";
    summary["t"] = a.t;
    summary["band"] = r.band;
    summary["u_max"] = r.u_max;
    summary["roundtrip_error"] = r.roundtrip_error;
}

void selberg_roundtrip_cmd(const Common& c, const SelbergArgs& a, Output& out, json& summary) {
    const double tol = tol_or(c, 1e-5);
    const auto r = selberg::selberg_roundtrip(a.kernel, a.t);
    summary["kernel"] = r.kernel;
    summary["direction"] = r.direction;
    summary["band"] = r.band;
    summary["sup_error"] = r.sup_error;
    summary["tol"] = tol;
    summary["pass"] = r.sup_error <= tol;
    out.json_file("selberg_roundtrip", summary);
    if (r.sup_error > tol) throw CheckFailed("selberg roundtrip: sup error above --tol", summary);
}

void selberg_heat_cmd(const Common&, const SelbergArgs& a, Output& out, json& summary) {
    Table t{{"rho", "p", "upper_bound"}, {}};
    for (double rho = 0.0; rho <= a.rho_max + 1e-12; rho += a.step)
        t.rows.push_back({num(rho), num(selberg::heat_kernel(a.t, rho)),
                          rho > 0.0 ? num(trace::heat_kernel_upper_bound(a.t, rho)) : "inf"});
    out.csv("selberg_heat", t);
    const auto b = selberg::fit_heat_bound(a.t, a.rho_max);
    summary["t"] = a.t;
    summary["p0"] = selberg::heat_kernel(a.t, 0.0);
    summary["c_gaussian"] = b.c_gaussian;
    summary["c_profile"] = b.c_profile;
    summary["min_value"] = b.min_value;
}

// ---------------------------------------------------------------- propagator

struct PropArgs {
    std::vector<double> t{1.0, 2.0, 3.0};
    std::vector<double> s{0.5, 1.0, 2.0};
    double r = 1.0;
    double T = 1.0;
    double R = 1.0;
    double window = -1.0;
    std::size_t n = 20000;
    std::size_t outer = 1500;
    std::size_t inner = 192;
    int count = 5;
    std::string observable;
};

void prop_kernel_cmd(const Common& c, const PropArgs& a, Output& out, json& summary) {
    const double tol = tol_or(c, 1e-3);
    const Point centre{0.0, 1.0}, z{0.3, 1.2};
    const double d = geom::hyp_dist(centre, z);
    Table tab{{"t", "s", "applied", "predicted", "rel_error"}, {}};
    double worst = 0.0;
    for (double t : a.t)
        for (double s : a.s) {
            const auto phi = std::make_shared<selberg::SphericalOracle>(s, t + d + 1.0);
            propagator::Observable u;
            u.eval = [phi, centre](const Point& w) { return (*phi)(geom::hyp_dist(centre, w)); };
            const auto applied = propagator::apply_Pt_quadrature(u, z, t);
            const double predicted = spectral::h_t_closed(t, s) * (*phi)(d);
            const double rel = std::abs(applied.value - predicted) / std::max(std::abs(predicted), 1e-300);
            worst = std::max(worst, rel);
            tab.rows.push_back({num(t), num(s), num(applied.value), num(predicted), num(rel)});
        }
    out.csv("propagator_kernel", tab);
    summary["max_rel_error"] = worst;
    summary["tol"] = tol;
    if (worst > tol) throw CheckFailed("propagator kernel: eigen-identity error above --tol", summary);
}

struct LatticeSetup {
    std::unique_ptr<fuchsian::Lattice> lattice;
    double window = 0.0;
    propagator::Observable a;
};

LatticeSetup lattice_setup(const Common& c, const PropArgs& p) {
    LatticeSetup s;
    const std::string path = group_path(c, "bolza.json");
    s.lattice = std::make_unique<fuchsian::Lattice>(fuchsian::load_group_spec(path), 12.0);
    s.window = p.window > 0.0 ? p.window : s.lattice->covering_radius(5.0);
    s.a = p.observable.empty() ? propagator::orbit_bump(*s.lattice, s.lattice->base(), 1.0)
                               : load_observable(p.observable, path);
    return s;
}

void prop_hs_cmd(const Common& c, const PropArgs& p, Output& out, json& summary) {
    const LatticeSetup s = lattice_setup(c, p);
    propagator::HsOptions opt;
    opt.outer = p.outer;
    opt.inner = p.inner;
    const auto h = propagator::hs_norm_estimate(*s.lattice, s.a, p.T, p.R, s.window, c.seed, opt);
    summary["T"] = p.T;
    summary["R"] = p.R;
    summary["window"] = s.window;
    summary["main"] = h.main;
    summary["main_error"] = h.main_error;
    summary["remainder_bound"] = h.remainder_bound;
    summary["systole"] = h.systole;
    summary["thin_fraction"] = h.thin_fraction;
    summary["domain_volume"] = h.domain_volume;
    out.json_file("propagator_hs", summary);
}

void prop_decay_cmd(const Common& c, const PropArgs& p, Output& out, json& summary) {
    const LatticeSetup s = lattice_setup(c, p);
    const auto d = propagator::ergodic_average_decay(*s.lattice, s.a, p.t, p.r, s.window, p.outer, p.inner, c.seed);
    Table t{{"t", "volume", "deviation", "deviation_error"}, {}};
    for (const auto& row : d.rows)
        t.rows.push_back({num(row.t), num(row.volume), num(row.deviation), num(row.deviation_error)});
    out.csv("propagator_decay", t);
    summary["exponent"] = d.exponent;
    summary["slope_error"] = d.fit.slope_error;
    summary["mean_removed"] = d.mean_removed;
}

void prop_midpoint_cmd(const Common& c, const PropArgs& p, Output& out, json& summary) {
    const LatticeSetup s = lattice_setup(c, p);
    const double z_max = tol_or(c, 3.0, "z_score");
    Table t{{"index", "lhs", "lhs_error", "rhs", "rhs_error", "z_score"}, {}};
    double worst = 0.0;
    for (int k = 0; k < p.count; ++k) {
        CounterRng rng(c.seed, static_cast<std::uint64_t>(k));
        propagator::OrbitWave w;
        w.p = geom::polar_from(s.lattice->base(), 2.0 * pi * rng.uniform(), 2.0 * rng.uniform());
        w.a = 0.5 + rng.uniform();
        w.alpha = rng.uniform();
        w.beta = 2.0 * pi * rng.uniform();
        w.decay = rng.uniform();
        const auto r = propagator::midpoint_change_of_var_check(propagator::orbit_tangent_function(*s.lattice, w), p.R,
                                                                *s.lattice, s.window, p.n, derive_seed(c.seed, k));
        const double z = std::abs(r.lhs.value - r.rhs.value) /
                         std::sqrt(r.lhs.error * r.lhs.error + r.rhs.error * r.rhs.error);
        worst = std::max(worst, z);
        t.rows.push_back({num(k), num(r.lhs.value), num(r.lhs.error), num(r.rhs.value), num(r.rhs.error), num(z)});
    }
    out.csv("propagator_midpoint", t);
    summary["max_z_score"] = worst;
    summary["z_max"] = z_max;
    if (worst > z_max) throw CheckFailed("propagator midpoint-check: estimators disagree beyond --tol sigmas", summary);
}

void prop_lens_cmd(const Common& c, const PropArgs& p, Output& out, json& summary) {
    Table t{{"t", "r", "exact", "monte_carlo", "mc_error"}, {}};
    std::vector<double> x, y;
    double defect = 0.0;
    for (double tt : p.t) {
        const double exact = propagator::lens_volume(tt, p.r);
        const auto mc = propagator::intersection_volume(tt, p.r, p.n, derive_seed(c.seed, static_cast<std::uint64_t>(tt * 1000)));
        t.rows.push_back({num(tt), num(p.r), num(exact), num(mc.volume), num(mc.error)});
        x.push_back(tt - p.r / 2.0);
        y.push_back(std::log(exact));
        const auto g = propagator::lens_geometry(tt, p.r);
        defect = std::max(defect, std::abs(g.vertex_to_midpoint - g.rho));
    }
    out.csv("propagator_lens", t);
    if (x.size() >= 2) {
        const auto fit = propagator::least_squares(x, y);
        summary["slope"] = fit.slope;
        summary["slope_error"] = fit.slope_error;
    }
    summary["pythagoras_defect"] = defect;
}

// ---------------------------------------------------------------- spectral-action

struct SpectralArgs {
    std::vector<double> interval{1.0, 2.0};
    std::vector<double> T{50.0};
    int grid = 64;
    int k_max = 50;
    double t_max = 20.0;
    double t_step = 0.25;
};

void spectral_cmd(const Common& c, const SpectralArgs& a, Output& out, json& summary) {
    need_pair(a.interval, "--interval");
    const spectral::SpectralInterval I{a.interval[0], a.interval[1]};
    const double tol = tol_or(c, 1e-6);
    const auto pb = spectral::verify_period_bound(I, a.k_max, a.grid, tol);
    const auto L = spectral::lipschitz_bound(spectral::chebyshev_grid(I, 33), 1.1, 20.0, 200);
    const auto cc = spectral::chain_constants(pb, L);
    const auto grid = spectral::chebyshev_grid(I, a.grid);
    std::vector<std::vector<double>> avg(grid.size());
    for_each_index(grid.size(), [&](std::size_t i) { avg[i] = spectral::time_average(grid[i], a.T); });
    Table t{{"s", "T", "avg"}, {}};
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t k = 0; k < a.T.size(); ++k) t.rows.push_back({num(grid[i]), num(a.T[k]), num(avg[i][k])});
    out.csv("spectral_action", t);
    const int nt = static_cast<int>(std::floor(a.t_max / a.t_step + 1e-9));
    std::vector<std::vector<double>> h(grid.size());
    for_each_index(grid.size(), [&](std::size_t i) {
        const spectral::HtEvaluator ev(grid[i]);
        for (int k = 1; k <= nt; ++k) h[i].push_back(ev(k * a.t_step));
    });
    Table prof{{"s", "t", "h"}, {}};
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int k = 1; k <= nt; ++k) prof.rows.push_back({num(grid[i]), num(k * a.t_step), num(h[i][k - 1])});
    out.csv("spectral_profile", prof);
    const auto lb = spectral::time_avg_lower_bound(I, a.T, cc, a.grid);
    summary["interval"] = a.interval;
    summary["c_I"] = pb.c_I;
    summary["c_I_certified"] = pb.c_I_certified;
    summary["k0"] = pb.k0;
    summary["lipschitz"] = L.bound;
    summary["k1"] = cc.k1;
    summary["T_I"] = cc.T_I;
    json rows = json::array();
    for (const auto& r : lb)
        rows.push_back({{"T", r.T}, {"C_I_estimate", r.value}, {"certified", r.certified}, {"s_min", r.s_min},
                        {"chain", r.chain}});
    double estimate = INFINITY;
    for (const auto& r : lb) estimate = std::min(estimate, r.value);
    summary["C_I_estimate"] = estimate;
    summary["time_averages"] = rows;
}

// ---------------------------------------------------------------- trace

struct TraceArgs {
    std::vector<double> t{0.5, 1.0};
    std::vector<int> degrees{1, 2, 4};
    std::vector<double> interval{1.25, 4.25};
    std::vector<int> K{0, 5, 10, 20, 40};
    double R = 16.0;
    double eps = 0.05;
    int fit_K = 0;
    std::size_t samples = 2000;
    double centre = 2.0;
    double width = 1.0;
    double x_max = 5.0;
};

void trace_weyl_cmd(const Common&, const TraceArgs& a, Output& out, json& summary) {
    Table t{{"t", "weyl_heat", "small_t"}, {}};
    for (double tt : a.t) t.rows.push_back({num(tt), num(trace::weyl_heat(tt)), num(1.0 / (4.0 * pi * tt))});
    out.csv("trace_weyl", t);
    need_pair(a.interval, "--interval");
    const trace::EigenInterval I{a.interval[0], a.interval[1]};
    const trace::Profile chi = [&](double x) { return x >= I.lo && x <= I.hi ? 1.0 : 0.0; };
    summary["interval"] = a.interval;
    summary["weyl_indicator"] = trace::weyl_density(chi, std::sqrt(I.hi) + 1.0, {I.lo, I.hi});
}

void trace_pretrace_cmd(const Common& c, const TraceArgs& a, Output& out, json& summary) {
    const auto spec = fuchsian::load_group_spec(group_path(c, "cyclic_L2.json"));
    Table t{{"degree", "t", "spectral", "weyl", "geometric", "residual", "combined_error", "pass"}, {}};
    bool ok = true;
    for (int n : a.degrees) {
        const auto cover = trace::cyclic_cover(spec, n);
        const auto cyl = trace::synthesize_cylinder(cover);
        for (double tt : a.t) {
            const auto p = trace::pretrace_check(cover, cyl, tt, a.R);
            const bool pass = std::abs(p.residual) <= p.combined_error;
            ok = ok && pass;
            t.rows.push_back({num(n), num(tt), num(p.spectral), num(p.weyl), num(p.geometric), num(p.residual),
                              num(p.combined_error), pass ? "1" : "0"});
        }
    }
    out.csv("trace_pretrace", t);
    summary["pass"] = ok;
    if (!ok) throw CheckFailed("trace pretrace: residual outside the combined error", summary);
}

void trace_count_cmd(const Common& c, const TraceArgs& a, Output& out, json& summary) {
    need_pair(a.interval, "--interval");
    const trace::EigenInterval I{a.interval[0], a.interval[1]};
    const auto spec = fuchsian::load_group_spec(group_path(c, "cyclic_L2.json"));
    trace::CountOptions opt;
    opt.eps = a.eps;
    opt.samples = a.samples;
    opt.seed = c.seed;
    Table t{{"degree", "volume", "count", "weyl", "smoothed", "smoothed_inner", "smoothed_outer", "gap_per_volume"}, {}};
    if (a.fit_K > 0) {
        t.header.push_back("estimate_without_data");
        t.header.push_back("estimate_error");
    }
    for (int n : a.degrees) {
        const auto cover = trace::cyclic_cover(spec, n);
        const auto cyl = trace::synthesize_cylinder(cover);
        const auto e = trace::eigencount_estimate(cover, &cyl.data, I, 0, opt);
        std::vector<std::string> row{num(n),          num(e.volume),         num(e.estimate),
                                     num(e.weyl),     num(e.smoothed),       num(e.smoothed_inner),
                                     num(e.smoothed_outer), num(std::abs(e.estimate - e.weyl) / e.volume)};
        if (a.fit_K > 0) {
            const auto region = trace::fermi_window_sample(cyl.core_length, cyl.options.window, a.samples, c.seed);
            const auto f = trace::eigencount_estimate(cover, nullptr, I, a.fit_K, opt, Exec::parallel, &region);
            row.push_back(num(f.estimate));
            row.push_back(num(f.estimate_error));
        }
        t.rows.push_back(row);
    }
    out.csv("trace_count", t);
    summary["interval"] = a.interval;
    summary["eps"] = a.eps;
}

void trace_expfit_cmd(const Common&, const TraceArgs& a, Output& out, json& summary) {
    const double c0 = a.centre, w = a.width;
    const trace::Profile f = [c0, w](double x) { return std::max(0.0, 1.0 - std::abs(x - c0) / w); };
    Table t{{"K", "sup_error", "beyond", "delta", "regularized"}, {}};
    for (int K : a.K) {
        const auto r = trace::exp_sum_fit(f, K, a.x_max);
        t.rows.push_back({num(K), num(r.sup_error), num(r.beyond), num(r.delta), r.regularized ? "1" : "0"});
    }
    out.csv("trace_expfit", t);
    summary["profile"] = {{"type", "triangle"}, {"centre", c0}, {"width", w}, {"x_max", a.x_max}};
}

// ---------------------------------------------------------------- qe

struct QeArgs {
    std::string eigen;
    int synthetic = 0;
    std::string observable;
    std::vector<double> interval{1.25, 4.25};
    double R = 1.0;
    double ell_min = 1.0;
    double rho_gap = qe::default_rho_gap;
    double thin_volume = 0.0;
};

void qe_cmd(const Common& c, const QeArgs& a, Output& out, json& summary) {
    need_pair(a.interval, "--interval");
    if (a.eigen.empty() == (a.synthetic <= 0)) throw UsageError("qe needs exactly one of --eigen and --synthetic");
    if (a.observable.empty()) throw UsageError("qe needs --observable");
    const trace::EigenInterval I{a.interval[0], a.interval[1]};
    trace::EigenData e;
    if (!a.eigen.empty()) {
        try {
            e = trace::load_eigen_data(a.eigen);
        } catch (const InvalidArgument& ex) {
            throw UsageError(std::string("--eigen: ") + ex.what());
        }
    } else {
        e = qe::random_flat_eigendata(a.synthetic, I, c.seed);
    }
    const auto obs = load_observable(a.observable, group_path(c, "bolza.json"));
    const qe::QEReport r = qe::qe_variance(e, obs, I, {a.R, a.ell_min, a.rho_gap, a.thin_volume});
    out.write("qe_terms.csv", qe::terms_to_csv(r));
    out.write("qe_report.json", qe::report_to_json(r) + "\n");
    summary["variance_sum"] = r.variance_sum;
    summary["gram_warning"] = r.gram_warning;
    if (r.gram_warning) std::cerr << "warning: Gram deviation " << r.gram_deviation << " exceeds 1e-2\n";
}

std::string fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Canonical text of the parsed configuration: command path and every option
// value except the output directory and the thread count.
void describe(const CLI::App* app, std::string& s) {
    s += "[" + app->get_name() + "]";
    for (const CLI::Option* o : app->get_options()) {
        const std::string name = o->get_name();
        if (name == "--out" || name == "--threads" || name == "--help") continue;
        s += name + "=";
        if (o->count() > 0)
            for (const auto& r : o->results()) s += r + ";";
        else
            s += o->get_default_str();
        s += "\n";
    }
    for (const CLI::App* sub : app->get_subcommands()) describe(sub, s);
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"hyplab: numerics for quantum ergodicity on hyperbolic surfaces"};
    app.require_subcommand(1);
    Common c;
    app.add_option("--seed", c.seed, "random seed")->capture_default_str();
    app.add_option("--tol", c.tol, "tolerance for the command's checks (command default when omitted)");
    app.add_option("--out", c.out, "output directory")->capture_default_str();
    app.add_option("--threads", c.threads, "worker threads (0: HYPLAB_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--group", c.group, "group file (JSON)");

    std::function<void(Output&, json&)> action;
    std::string command;
    auto on = [&](CLI::App* sub, std::string name, std::function<void(Output&, json&)> f) {
        sub->fallthrough();
        sub->callback([&action, &command, name = std::move(name), f = std::move(f)] {
            command = name;
            action = f;
        });
    };

    GeomArgs ga;
    auto* geom_cmd = app.add_subcommand("geom-check", "consistency checks of the hyperbolic primitives");
    geom_cmd->add_option("--n", ga.n, "random points")->capture_default_str();
    on(geom_cmd, "geom-check", [&](Output& o, json& s) { geom_check(c, ga, o, s); });

    GroupArgs gr;
    auto* group = app.add_subcommand("group", "Fuchsian group statistics");
    group->require_subcommand(1);
    group->fallthrough();
    auto* gball = group->add_subcommand("ball", "group elements moving a point at most R");
    gball->add_option("--R", gr.R)->capture_default_str();
    gball->add_option("--point", gr.point, "x,y (default: base point)")->delimiter(',');
    on(gball, "group ball", [&](Output& o, json& s) { group_ball_cmd(c, gr, o, s); });
    auto* ginj = group->add_subcommand("injrad", "injectivity radius on a domain sample");
    ginj->add_option("--n", gr.n)->capture_default_str();
    ginj->add_option("--cap", gr.cap)->capture_default_str();
    ginj->add_option("--window", gr.window, "sampling window (default: covering radius)");
    on(ginj, "group injrad", [&](Output& o, json& s) { group_injrad_cmd(c, gr, o, s); });
    auto* gsys = group->add_subcommand("systole", "shortest closed geodesic");
    gsys->add_option("--search", gr.search)->capture_default_str();
    on(gsys, "group systole", [&](Output& o, json& s) { group_systole_cmd(c, gr, o, s); });
    auto* gthin = group->add_subcommand("thin-part", "volume fraction with injectivity radius below R");
    gthin->add_option("--R", gr.thin_R)->capture_default_str();
    gthin->add_option("--n", gr.n)->capture_default_str();
    gthin->add_option("--cap", gr.cap)->capture_default_str();
    gthin->add_option("--window", gr.window, "sampling window (default: covering radius)");
    on(gthin, "group thin-part", [&](Output& o, json& s) { group_thin_cmd(c, gr, o, s); });

    SelbergArgs sa;
    auto* selb = app.add_subcommand("selberg", "Selberg transform pair");
    selb->require_subcommand(1);
    selb->fallthrough();
    auto add_kernel = [&](CLI::App* sub) {
        sub->add_option("--kernel", sa.kernel, "disc | gaussian | bump | heat")->capture_default_str();
        sub->add_option("--t", sa.t, "disc radius or heat time")->capture_default_str()->check(CLI::PositiveNumber);
    };
    auto* sfwd = selb->add_subcommand("forward", "h(s) of a radial kernel");
    add_kernel(sfwd);
    sfwd->add_option("--s-max", sa.s_max)->capture_default_str();
    sfwd->add_option("--samples", sa.samples)->capture_default_str()->check(CLI::PositiveNumber);
    on(sfwd, "selberg forward", [&](Output& o, json& s) { selberg_forward_cmd(c, sa, o, s); });
    auto* sinv = selb->add_subcommand("inverse", "heat kernel from the heat multiplier");
    sinv->add_option("--t", sa.t)->capture_default_str()->check(CLI::PositiveNumber);
    sinv->add_option("--rho-max", sa.rho_max)->capture_default_str();
    sinv->add_option("--step", sa.step)->capture_default_str()->check(CLI::PositiveNumber);
    on(sinv, "selberg inverse", [&](Output& o, json& s) { selberg_inverse_cmd(c, sa, o, s); });
    auto* srt = selb->add_subcommand("roundtrip", "transform roundtrip error");
    add_kernel(srt);
    on(srt, "selberg roundtrip", [&](Output& o, json& s) { selberg_roundtrip_cmd(c, sa, o, s); });
    auto* sheat = selb->add_subcommand("heat", "heat kernel table and fitted bound");
    sheat->add_option("--t", sa.t)->capture_default_str()->check(CLI::PositiveNumber);
    sheat->add_option("--rho-max", sa.rho_max)->capture_default_str();
    sheat->add_option("--step", sa.step)->capture_default_str()->check(CLI::PositiveNumber);
    on(sheat, "selberg heat", [&](Output& o, json& s) { selberg_heat_cmd(c, sa, o, s); });

    PropArgs pa;
    auto* prop = app.add_subcommand("propagator", "disc-averaging propagator");
    prop->require_subcommand(1);
    prop->fallthrough();
    auto* pker = prop->add_subcommand("kernel", "P_t on spherical functions against h_t(s)");
    pker->add_option("--t", pa.t)->delimiter(',')->capture_default_str();
    pker->add_option("--s", pa.s)->delimiter(',')->capture_default_str();
    on(pker, "propagator kernel", [&](Output& o, json& s) { prop_kernel_cmd(c, pa, o, s); });
    auto add_obs = [&](CLI::App* sub) {
        sub->add_option("--observable", pa.observable, "observable file (default: orbit bump at the base point)");
        sub->add_option("--window", pa.window, "domain window (default: covering radius)");
    };
    auto* phs = prop->add_subcommand("hs", "Hilbert-Schmidt norm estimate");
    add_obs(phs);
    phs->add_option("--T", pa.T)->capture_default_str();
    phs->add_option("--R", pa.R)->capture_default_str();
    phs->add_option("--outer", pa.outer)->capture_default_str();
    phs->add_option("--inner", pa.inner)->capture_default_str();
    on(phs, "propagator hs", [&](Output& o, json& s) { prop_hs_cmd(c, pa, o, s); });
    auto* pdec = prop->add_subcommand("ergodic-decay", "decay of lens averages");
    add_obs(pdec);
    pdec->add_option("--t", pa.t)->delimiter(',')->capture_default_str();
    pdec->add_option("--r", pa.r)->capture_default_str();
    pdec->add_option("--outer", pa.outer)->capture_default_str();
    pdec->add_option("--inner", pa.inner)->capture_default_str();
    on(pdec, "propagator ergodic-decay", [&](Output& o, json& s) { prop_decay_cmd(c, pa, o, s); });
    auto* pmid = prop->add_subcommand("midpoint-check", "change of variables to the midpoint frame");
    add_obs(pmid);
    pmid->add_option("--R", pa.R)->capture_default_str();
    pmid->add_option("--n", pa.n)->capture_default_str();
    pmid->add_option("--count", pa.count, "random test functions")->capture_default_str();
    on(pmid, "propagator midpoint-check", [&](Output& o, json& s) { prop_midpoint_cmd(c, pa, o, s); });
    auto* plens = prop->add_subcommand("lens-volume", "area of two intersecting discs");
    plens->add_option("--t", pa.t)->delimiter(',')->capture_default_str();
    plens->add_option("--r", pa.r)->capture_default_str();
    plens->add_option("--n", pa.n)->capture_default_str();
    on(plens, "propagator lens-volume", [&](Output& o, json& s) { prop_lens_cmd(c, pa, o, s); });

    SpectralArgs sp;
    auto* spec_cmd = app.add_subcommand("spectral-action", "constants of the spectral action of P_t");
    spec_cmd->add_option("--interval", sp.interval, "a,b in the s-parameter")->delimiter(',')->capture_default_str();
    spec_cmd->add_option("--T", sp.T, "averaging horizons")->delimiter(',')->capture_default_str();
    spec_cmd->add_option("--grid", sp.grid)->capture_default_str()->check(CLI::Range(2, 4096));
    spec_cmd->add_option("--k-max", sp.k_max)->capture_default_str()->check(CLI::Range(10, 10000));
    spec_cmd->add_option("--t-max", sp.t_max, "range of the h_t(s) profile table")->capture_default_str()
        ->check(CLI::PositiveNumber);
    spec_cmd->add_option("--t-step", sp.t_step)->capture_default_str()->check(CLI::PositiveNumber);
    on(spec_cmd, "spectral-action", [&](Output& o, json& s) { spectral_cmd(c, sp, o, s); });

    TraceArgs ta;
    auto* tr = app.add_subcommand("trace", "pre-trace formula numerics");
    tr->require_subcommand(1);
    tr->fallthrough();
    auto* tweyl = tr->add_subcommand("weyl", "Weyl density");
    tweyl->add_option("--t", ta.t)->delimiter(',')->capture_default_str();
    tweyl->add_option("--interval", ta.interval)->delimiter(',')->capture_default_str();
    on(tweyl, "trace weyl", [&](Output& o, json& s) { trace_weyl_cmd(c, ta, o, s); });
    auto* tpre = tr->add_subcommand("pretrace", "localized pre-trace identity on cyclic covers");
    tpre->add_option("--t", ta.t)->delimiter(',')->capture_default_str();
    tpre->add_option("--degrees", ta.degrees)->delimiter(',')->capture_default_str();
    tpre->add_option("--R", ta.R)->capture_default_str();
    on(tpre, "trace pretrace", [&](Output& o, json& s) { trace_pretrace_cmd(c, ta, o, s); });
    auto* tcount = tr->add_subcommand("count", "eigenvalue counts on cyclic covers");
    tcount->add_option("--degrees", ta.degrees)->delimiter(',')->capture_default_str();
    tcount->add_option("--interval", ta.interval)->delimiter(',')->capture_default_str();
    tcount->add_option("--eps", ta.eps)->capture_default_str()->check(CLI::PositiveNumber);
    tcount->add_option("--fit-K", ta.fit_K, "also estimate without eigen-data with K exponentials")
        ->capture_default_str();
    tcount->add_option("--samples", ta.samples)->capture_default_str();
    on(tcount, "trace count", [&](Output& o, json& s) { trace_count_cmd(c, ta, o, s); });
    auto* tfit = tr->add_subcommand("expfit", "exponential-sum fits of a triangle bump");
    tfit->add_option("--K", ta.K)->delimiter(',')->capture_default_str();
    tfit->add_option("--centre", ta.centre)->capture_default_str();
    tfit->add_option("--width", ta.width)->capture_default_str()->check(CLI::PositiveNumber);
    tfit->add_option("--x-max", ta.x_max)->capture_default_str()->check(CLI::PositiveNumber);
    on(tfit, "trace expfit", [&](Output& o, json& s) { trace_expfit_cmd(c, ta, o, s); });

    QeArgs qa;
    auto* qe_sub = app.add_subcommand("qe", "quantum ergodicity variance on eigen-data");
    qe_sub->add_option("--eigen", qa.eigen, "eigen-data file (JSON)");
    qe_sub->add_option("--synthetic", qa.synthetic, "random flat basis on an n x n mesh instead of --eigen");
    qe_sub->add_option("--observable", qa.observable, "observable file (JSON)");
    qe_sub->add_option("--interval", qa.interval, "eigenvalue interval lo,hi")->delimiter(',')->capture_default_str();
    qe_sub->add_option("--R", qa.R)->capture_default_str();
    qe_sub->add_option("--ell-min", qa.ell_min)->capture_default_str();
    qe_sub->add_option("--rho-gap", qa.rho_gap)->capture_default_str();
    qe_sub->add_option("--thin-volume", qa.thin_volume)->capture_default_str();
    on(qe_sub, "qe", [&](Output& o, json& s) { qe_cmd(c, qa, o, s); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0)
            for (const auto& r : app.remaining()) std::cerr << "unrecognized argument: " << r << "\n";
        return code == 0 ? 0 : 2;
    }

    const auto start = std::chrono::steady_clock::now();
    set_thread_count(c.threads);
    Output out{fs::path(c.out)};
    json summary;
    try {
        fs::create_directories(out.dir());
        action(out, summary);
        if (!summary.empty()) {
            const std::string name = command == "qe" ? "qe_summary" : command;
            std::string file = name;
            for (char& ch : file)
                if (ch == ' ' || ch == '-') ch = '_';
            bool listed = false;
            for (const auto& f : out.files()) listed = listed || fs::path(f).filename() == file + ".json";
            if (!listed) out.json_file(file, summary);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        json err{{"command", command}, {"error", e.what()}};
        if (const auto* cf = dynamic_cast<const CheckFailed*>(&e)) err["detail"] = cf->detail;
        try {
            std::ofstream(out.dir() / "error.json") << err.dump(2) << "\n";
        } catch (...) {
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    std::string config;
    describe(&app, config);
    json manifest;
    manifest["command"] = command;
    manifest["config_hash"] = fnv1a(config);
    manifest["seed"] = c.seed;
    manifest["tolerances"] = c.used_tol;
    manifest["threads"] = thread_count();
    manifest["outputs"] = out.files();
    manifest["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const fs::path tmp = out.dir() / "manifest.json.tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        f << manifest.dump(2) << "\n";
    }
    fs::rename(tmp, out.dir() / "manifest.json");
    return 0;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace hyplab::cli
