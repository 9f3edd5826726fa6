#include "hyplab/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hyplab/errors.hpp"
#include "hyplab/quadrature.hpp"
#include "hyplab/rng.hpp"

namespace hyplab::propagator {

using geom::ball_point;
using geom::ball_volume;
using geom::hyp_dist;

namespace {

constexpr double pi = std::numbers::pi;

Estimate scaled_mean(std::span<const double> x, double scale) {
    const MeanStat m = mean_stat(x);
    return {scale * m.mean, std::abs(scale) * m.stderr_, x.size()};
}

// Ball membership on cosh of the distance, without the acosh.
bool within(const Point& a, const Point& b, double cosh_t) { return geom::cosh_dist(a, b) <= cosh_t; }

// Proposal ball for lens sampling: B(z, t) unless the exact acceptance is
// below 1 %, then B(m, rho) around the midpoint.
struct LensSampler {
    Point centre;
    double radius = 0.0;
    bool midpoint_frame = false;
};

LensSampler lens_sampler(const Point& z, const Point& w, double t) {
    const double r = hyp_dist(z, w);
    const double rate = lens_volume(t, r) / ball_volume(t);
    if (rate >= 0.01) return {z, t, false};
    return {geom::midpoint(z, w).frame.base, pythagoras_radius(t, r), true};
}

void sample_domain_tangents(const fuchsian::Lattice& lattice, double window, std::size_t n,
                            std::uint64_t seed, Exec exec, std::vector<UnitTangent>& out, double& volume) {
    const fuchsian::DomainSample d = fuchsian::sample_domain(lattice, window, n, seed, exec);
    volume = d.volume;
    out.resize(n);
    const std::uint64_t angle_seed = derive_seed(seed, 7);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(angle_seed, i);
        out[i] = {d.points[i], geom::two_pi * rng.uniform()};
    }
}

}  // namespace

Observable constant_observable(double c) {
    return {[c](const Point&) { return c; }, std::abs(c), c == 0.0};
}

Observable orbit_bump(const fuchsian::Lattice& lattice, const Point& p, double a) {
    require(a > 0.0, "orbit_bump: radius must be positive");
    const double pd = hyp_dist(lattice.base(), p);
    auto eval = [&lattice, p, a, pd](const Point& z) {
        const auto red = lattice.reduce(z);
        const double reach = hyp_dist(lattice.base(), red.point) + a + pd;
        auto bump = [&](const Point& q) {
            const double d = hyp_dist(red.point, q);
            if (d >= a) return 0.0;
            const double x = 1.0 - (d / a) * (d / a);
            return x * x;
        };
        double total = bump(p);
        for (const auto& e : lattice.within(reach)) total += bump(geom::mobius_apply(e.g, p));
        return total;
    };
    // Orbit points are at least the systole apart, so few of them fit in B(z, a).
    const double ell = std::max(1e-3, fuchsian::systole(lattice.spec(), 4.0).value);
    return {eval, std::floor(fuchsian::lattice_count_bound(a, ell)) + 1.0, false};
}

Observable cell_sign(double period) {
    require(period > 0.0, "cell_sign: period must be positive");
    return {[period](const Point& z) {
                const double l = std::log(std::abs(z.z()));
                return std::cos(2.0 * pi * l / period) >= 0.0 ? 1.0 : -1.0;
            },
            1.0, true};
}

Estimate apply_Pt(const Observable& u, const Point& z, double t, std::size_t n, std::uint64_t seed,
                  Exec exec) {
    require(t > 0.0, "apply_Pt: t must be positive");
    require(n >= 2, "apply_Pt: need at least two samples");
    const std::vector<double> x = map_indices(
        n,
        [&](std::size_t i) {
            CounterRng rng(seed, i);
            const double u1 = rng.uniform(), u2 = rng.uniform();
            return u(ball_point(z, t, u1, u2));
        },
        exec);
    return scaled_mean(x, ball_volume(t) / std::sqrt(std::cosh(t)));
}

Estimate apply_Pt_quadrature(const Observable& u, const Point& z, double t, int radial_panels,
                             int angular_nodes) {
    require(t > 0.0, "apply_Pt_quadrature: t must be positive");
    require(radial_panels >= 2 && angular_nodes >= 8, "apply_Pt_quadrature: resolution too small");
    auto integral = [&](int panels, int m) {
        return quad::composite_gauss<16>(
            [&](double rho) {
                double acc = 0.0;
                for (int j = 0; j < m; ++j) acc += u(geom::polar_from(z, geom::two_pi * (j + 0.5) / m, rho));
                return std::sinh(rho) * geom::two_pi * acc / m;
            },
            0.0, t, panels);
    };
    const double c = 1.0 / std::sqrt(std::cosh(t));
    const double fine = c * integral(radial_panels, angular_nodes);
    const double coarse = c * integral(radial_panels / 2, angular_nodes / 2);
    return {fine, std::abs(fine - coarse), static_cast<std::size_t>(radial_panels) * 16 * angular_nodes};
}

double lens_volume(double t, double r) {
    require(t >= 0.0 && r >= 0.0, "lens_volume: t and r must be nonnegative");
    if (r >= 2.0 * t) return 0.0;
    if (r == 0.0) return ball_volume(t);
    // Fermi coordinates (s, u) along the axis through the centres, d mu =
    // cosh u du ds: the lens is cosh u cosh(|s| + r/2) <= cosh t, so its area
    // is 4 int_0^h sinh u_max(s) ds with h = t - r/2. s = h sin(phi) removes
    // the square root at s = h.
    const double h = t - 0.5 * r, ct = std::cosh(t);
    return 4.0 * quad::adaptive(
                     [&](double phi) {
                         const double s = h * std::sin(phi);
                         const double v = s + 0.5 * r;
                         const double cv = std::cosh(v);
                         const double q = std::sin(0.25 * pi - 0.5 * phi);
                         const double gap = 2.0 * std::sinh(0.5 * (t + v)) * std::sinh(h * q * q);
                         return h * std::cos(phi) * std::sqrt(std::max(0.0, gap * (ct + cv))) / cv;
                     },
                     0.0, 0.5 * pi, 1e-13, 1e-15, 20, "lens_volume")
                     .value;
}

double pythagoras_radius(double t, double r) {
    require(r >= 0.0 && r <= 2.0 * t, "pythagoras_radius: need 0 <= r <= 2t");
    return std::acosh(std::max(1.0, std::cosh(t) / std::cosh(0.5 * r)));
}

LensGeometry lens_geometry(double t, double r) {
    require(r > 0.0 && r < 2.0 * t, "lens_geometry: need 0 < r < 2t");
    LensGeometry g;
    g.z1 = {0.0, 1.0};
    g.z2 = geom::polar_from(g.z1, 0.0, r);
    g.midpoint = geom::polar_from(g.z1, 0.0, 0.5 * r);
    // Law of cosines in the triangle z1, z2, vertex with sides t, t, r.
    const double c = std::cosh(t) * (std::cosh(r) - 1.0) / (std::sinh(t) * std::sinh(r));
    g.vertex = geom::polar_from(g.z1, std::acos(c), t);
    g.rho = pythagoras_radius(t, r);
    g.vertex_to_midpoint = hyp_dist(g.vertex, g.midpoint);
    g.vertex_to_centres = std::max(hyp_dist(g.vertex, g.z1), hyp_dist(g.vertex, g.z2));
    const double to_vertex = geom::polar_coords(g.midpoint, g.vertex).first;
    const double to_z2 = geom::polar_coords(g.midpoint, g.z2).first;
    g.right_angle_defect = std::abs(std::cos(to_vertex - to_z2));
    return g;
}

LensEstimate lens_integral(const Observable& a, const Point& z, const Point& w, double t, std::size_t n,
                           std::uint64_t seed, Exec exec) {
    require(t > 0.0, "lens_integral: t must be positive");
    require(n >= 2, "lens_integral: need at least two samples");
    LensEstimate out;
    const double r = hyp_dist(z, w);
    if (r > 2.0 * t) return out;
    if (lens_volume(t, r) < 1e-12) {
        out.degenerate = true;
        return out;
    }
    const LensSampler s = lens_sampler(z, w, t);
    out.midpoint_frame = s.midpoint_frame;
    const double ct = std::cosh(t);
    std::vector<double> inside(n);
    const std::vector<double> x = map_indices(
        n,
        [&](std::size_t i) {
            CounterRng rng(seed, i);
            const double u1 = rng.uniform(), u2 = rng.uniform();
            const Point p = ball_point(s.centre, s.radius, u1, u2);
            const bool in = within(p, z, ct) && within(p, w, ct);
            inside[i] = in ? 1.0 : 0.0;
            return in ? a(p) : 0.0;
        },
        exec);
    const double vb = ball_volume(s.radius);
    const Estimate v = scaled_mean(x, vb);
    const Estimate vol = scaled_mean(inside, vb);
    out.value = v.value;
    out.error = v.error;
    out.volume = vol.value;
    out.volume_error = vol.error;
    out.acceptance = vol.value / vb;
    out.samples = n;
    return out;
}

LensEstimate kernel_PtaPt(const Observable& a, const Point& z, const Point& w, double t, std::size_t n,
                          std::uint64_t seed, Exec exec) {
    LensEstimate e = lens_integral(a, z, w, t, n, seed, exec);
    const double c = 1.0 / std::cosh(t);
    e.value *= c;
    e.error *= c;
    return e;
}

AveragingSet intersection_volume(double t, double r, std::size_t n, std::uint64_t seed, Exec exec) {
    require(r >= 0.0 && r <= 2.0 * t, "intersection_volume: need 0 <= r <= 2t");
    const Point z1{0.0, 1.0};
    const Point z2 = geom::polar_from(z1, 0.0, r);
    const LensEstimate e = lens_integral(constant_observable(1.0), z1, z2, t, n, seed, exec);
    return {t, r, e.volume, e.volume_error};
}

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "least_squares: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "least_squares: abscissae must not all coincide");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double ss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double e = y[i] - f.intercept - f.slope * x[i];
            ss += e * e;
        }
        f.slope_error = std::sqrt(ss / (n - 2.0) / sxx);
    }
    return f;
}

Estimate time_averaged_kernel(const Observable& a, const Point& z, const Point& w, double T, std::size_t n,
                              std::uint64_t seed, int t_nodes, Exec exec) {
    require(T > 0.0, "time_averaged_kernel: T must be positive");
    require(t_nodes >= 1 && n >= 2, "time_averaged_kernel: need nodes and samples");
    const double r = hyp_dist(z, w);
    if (r >= 2.0 * T || lens_volume(T, r) < 1e-12) return {0.0, 0.0, n};
    std::vector<double> nodes, weights;
    quad::composite_gauss_nodes<8>(0.0, T, (t_nodes + 7) / 8, nodes, weights);
    for (std::size_t j = 0; j < nodes.size(); ++j) weights[j] /= T * std::cosh(nodes[j]);
    const LensSampler s = lens_sampler(z, w, T);
    const std::vector<double> x = map_indices(
        n,
        [&](std::size_t i) {
            CounterRng rng(seed, i);
            const double u1 = rng.uniform(), u2 = rng.uniform();
            const Point p = ball_point(s.centre, s.radius, u1, u2);
            const double d = std::max(hyp_dist(p, z), hyp_dist(p, w));
            if (d > T) return 0.0;
            double weight = 0.0;
            for (std::size_t j = 0; j < nodes.size(); ++j)
                if (nodes[j] >= d) weight += weights[j];
            return weight == 0.0 ? 0.0 : weight * a(p);
        },
        exec);
    return scaled_mean(x, ball_volume(s.radius));
}

TangentFunction orbit_tangent_function(const fuchsian::Lattice& lattice, const OrbitWave& w) {
    require(w.a > 0.0, "orbit_tangent_function: radius must be positive");
    const double pd = hyp_dist(lattice.base(), w.p);
    return [&lattice, w, pd](const UnitTangent& v, double r) {
        const auto red = lattice.reduce(v.base);
        const double theta = v.theta + geom::mobius_rotation(red.g, v.base);
        const double reach = hyp_dist(lattice.base(), red.point) + w.a + pd;
        auto term = [&](const Point& q) {
            const auto [dir, d] = geom::polar_coords(red.point, q);
            if (d >= w.a) return 0.0;
            const double x = 1.0 - (d / w.a) * (d / w.a);
            return x * x * (1.0 + w.alpha * std::cos(theta - dir - w.beta));
        };
        double total = term(w.p);
        for (const auto& e : lattice.within(reach)) total += term(geom::mobius_apply(e.g, w.p));
        return std::exp(-w.decay * r) * total;
    };
}

ChangeOfVariables midpoint_change_of_var_check(const TangentFunction& f, double R,
                                               const fuchsian::Lattice& lattice, double window,
                                               std::size_t n, std::uint64_t seed, Exec exec) {
    require(R > 0.0, "midpoint_change_of_var_check: R must be positive");
    require(n >= 2, "midpoint_change_of_var_check: need at least two samples");
    ChangeOfVariables out;
    const fuchsian::DomainSample left = fuchsian::sample_domain(lattice, window, n, derive_seed(seed, 1), exec);
    out.domain_volume = left.volume;
    const double scale = left.volume * ball_volume(R);
    const std::uint64_t partner_seed = derive_seed(seed, 2);
    const std::vector<double> lhs = map_indices(
        n,
        [&](std::size_t i) {
            CounterRng rng(partner_seed, i);
            const double u1 = rng.uniform(), u2 = rng.uniform();
            const Point zp = ball_point(left.points[i], R, u1, u2);
            const geom::Midpoint m = geom::midpoint(left.points[i], zp);
            return f(m.frame, m.length);
        },
        exec);
    out.lhs = scaled_mean(lhs, scale);

    std::vector<UnitTangent> v;
    double unused = 0.0;
    sample_domain_tangents(lattice, window, n, derive_seed(seed, 3), exec, v, unused);
    const std::uint64_t radius_seed = derive_seed(seed, 4);
    const double cR = std::cosh(R) - 1.0;
    const std::vector<double> rhs = map_indices(
        n,
        [&](std::size_t i) {
            CounterRng rng(radius_seed, i);
            // Density sinh r on (0, R) by inversion of cosh r - 1.
            const double r = std::acosh(1.0 + rng.uniform() * cR);
            return f(v[i], r);
        },
        exec);
    out.rhs = scaled_mean(rhs, scale);
    return out;
}

HsEstimate hs_norm_estimate(const fuchsian::Lattice& lattice, const Observable& a, double T, double R,
                            double window, std::uint64_t seed, const HsOptions& opt, Exec exec) {
    require(T > 0.0 && R > 0.0, "hs_norm_estimate: T and R must be positive");
    require(opt.outer >= 2 && opt.inner >= 2, "hs_norm_estimate: need samples");
    HsEstimate out;
    std::vector<UnitTangent> v;
    sample_domain_tangents(lattice, window, opt.outer, derive_seed(seed, 11), exec, v, out.domain_volume);

    const double S = 2.0 * T;
    const double cS = std::cosh(S) - 1.0;
    const std::uint64_t radius_seed = derive_seed(seed, 12);
    const std::uint64_t inner_a = derive_seed(seed, 13), inner_b = derive_seed(seed, 14);
    // The inner estimates are serial inside each outer sample; two independent
    // copies make the product an unbiased estimate of |K|^2.
    const std::vector<double> x = map_indices(
        opt.outer,
        [&](std::size_t i) {
            CounterRng rng(radius_seed, i);
            const double r = std::acosh(1.0 + rng.uniform() * cS);
            const Point z1 = geom::geodesic_flow(v[i], -0.5 * r).base;
            const Point z2 = geom::geodesic_flow(v[i], 0.5 * r).base;
            const double k1 =
                time_averaged_kernel(a, z1, z2, T, opt.inner, derive_seed(inner_a, i), opt.t_nodes, Exec::serial)
                    .value;
            const double k2 =
                time_averaged_kernel(a, z1, z2, T, opt.inner, derive_seed(inner_b, i), opt.t_nodes, Exec::serial)
                    .value;
            return k1 * k2;
        },
        exec);
    const Estimate m = scaled_mean(x, out.domain_volume * geom::two_pi * cS);
    out.main = m.value;
    out.main_error = m.error;

    out.sup_kernel = a.sup_bound *
                     quad::composite_gauss<16>([](double t) { return ball_volume(t) / std::cosh(t); }, 0.0, T, 8) / T;
    out.systole = fuchsian::systole(lattice.spec(), opt.systole_search).value;
    out.thin_fraction =
        fuchsian::thin_part_fraction(lattice, R, opt.thin_samples, derive_seed(seed, 15), window, exec).value;
    out.remainder_bound = std::exp(2.0 * R) / out.systole * out.thin_fraction * out.domain_volume *
                          out.sup_kernel * out.sup_kernel;
    return out;
}

DecayTable ergodic_average_decay(const fuchsian::Lattice& lattice, const Observable& a,
                                 const std::vector<double>& t_list, double r, double window,
                                 std::size_t outer, std::size_t inner, std::uint64_t seed, Exec exec) {
    require(!t_list.empty(), "ergodic_average_decay: empty t list");
    require(r > 0.0 && r < 2.0 * *std::min_element(t_list.begin(), t_list.end()),
            "ergodic_average_decay: need 0 < r < 2 min t");
    require(outer >= 2 && inner >= 2, "ergodic_average_decay: need samples");
    DecayTable out;

    const fuchsian::DomainSample ms = fuchsian::sample_domain(lattice, window, 4 * outer, derive_seed(seed, 21), exec);
    const std::vector<double> av = map_indices(ms.points.size(), [&](std::size_t i) { return a(ms.points[i]); }, exec);
    out.mean_removed = mean_stat(av).mean;
    const double mean = out.mean_removed;
    const Observable centred{[&a, mean](const Point& z) { return a(z) - mean; }, a.sup_bound + std::abs(mean), true};

    std::vector<UnitTangent> v;
    double unused = 0.0;
    sample_domain_tangents(lattice, window, outer, derive_seed(seed, 22), exec, v, unused);
    {
        const fuchsian::DomainSample check =
            fuchsian::sample_domain(lattice, window, 4 * outer, derive_seed(seed, 23), exec);
        const std::vector<double> cv =
            map_indices(check.points.size(), [&](std::size_t i) { return centred(check.points[i]); }, exec);
        const MeanStat cm = mean_stat(cv);
        out.residual_mean = cm.mean;
        out.residual_mean_error = cm.stderr_;
    }

    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < t_list.size(); ++k) {
        const double t = t_list[k];
        const std::uint64_t sa = derive_seed(seed, 100 + 2 * k), sb = derive_seed(seed, 101 + 2 * k);
        // Lens averages from two independent inner samples; their product is
        // unbiased for the squared average.
        auto average = [&](const Point& z1, const Point& z2, std::uint64_t s) {
            const LensEstimate e = lens_integral(centred, z1, z2, t, inner, s, Exec::serial);
            return e.volume > 0.0 ? e.value / e.volume : 0.0;
        };
        const std::vector<double> prod = map_indices(
            outer,
            [&](std::size_t i) {
                const Point z1 = geom::geodesic_flow(v[i], -0.5 * r).base;
                const Point z2 = geom::geodesic_flow(v[i], 0.5 * r).base;
                return average(z1, z2, derive_seed(sa, i)) * average(z1, z2, derive_seed(sb, i));
            },
            exec);
        const MeanStat m = mean_stat(prod);
        DecayRow row;
        row.t = t;
        row.volume = lens_volume(t, r);
        row.deviation = std::sqrt(std::max(0.0, m.mean));
        row.deviation_error = row.deviation > 0.0 ? m.stderr_ / (2.0 * row.deviation) : std::sqrt(m.stderr_);
        out.rows.push_back(row);
        if (row.deviation > 0.0) {
            lx.push_back(std::log(row.volume));
            ly.push_back(std::log(row.deviation));
        }
    }
    if (lx.size() >= 2) {
        out.fit = least_squares(lx, ly);
        out.exponent = -out.fit.slope;
    }
    return out;
}

}  // namespace hyplab::propagator
