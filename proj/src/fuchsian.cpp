#include "hyplab/fuchsian.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "hyplab/errors.hpp"
#include "hyplab/rng.hpp"
#include "json.hpp"

namespace hyplab::fuchsian {

using geom::hyp_dist;
using geom::mobius_apply;
using json = nlohmann::json;

GroupSpec parse_group_spec(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("group spec: ") + e.what());
    }
    GroupSpec s;
    s.name = j.value("name", std::string("unnamed"));
    require(j.contains("generators") && j["generators"].is_array() && !j["generators"].empty(),
            "group spec: 'generators' must be a nonempty list of 2x2 matrices");
    for (const auto& m : j["generators"]) {
        require(m.is_array() && m.size() == 2 && m[0].size() == 2 && m[1].size() == 2,
                "group spec: each generator must be [[a,b],[c,d]]");
        s.generators.emplace_back(m[0][0].get<double>(), m[0][1].get<double>(),
                                  m[1][0].get<double>(), m[1][1].get<double>());
    }
    if (j.contains("base_point")) {
        const auto& b = j["base_point"];
        require(b.is_array() && b.size() == 2, "group spec: base_point must be [x,y]");
        s.base_point = {b[0].get<double>(), b[1].get<double>()};
    }
    require(s.base_point.valid(), "group spec: base_point must lie in the upper half-plane");
    s.max_word_length = j.value("max_word_length", 32);
    require(s.max_word_length >= 1, "group spec: max_word_length must be >= 1");
    s.prune_margin = j.value("prune_margin", -1.0);
    return s;
}

GroupSpec load_group_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open group spec " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_group_spec(buf.str());
}

std::string group_spec_to_json(const GroupSpec& spec) {
    json j;
    j["name"] = spec.name;
    j["generators"] = json::array();
    for (const auto& g : spec.generators)
        j["generators"].push_back({{g.a(), g.b()}, {g.c(), g.d()}});
    j["base_point"] = {spec.base_point.x, spec.base_point.y};
    j["max_word_length"] = spec.max_word_length;
    if (spec.prune_margin >= 0.0) j["prune_margin"] = spec.prune_margin;
    return j.dump(2);
}

std::vector<Mobius> alphabet(const GroupSpec& spec) {
    std::vector<Mobius> out = spec.generators;
    for (const auto& g : spec.generators) {
        const Mobius inv = g.inverse();
        const bool listed = std::any_of(out.begin(), out.end(),
                                        [&](const Mobius& h) { return h.approx_equal(inv); });
        if (!listed) out.push_back(inv);
    }
    return out;
}

namespace {

// Orbit points of distinct elements are at least a systole apart, so two
// products are the same element when their orbit points agree. Long words
// accumulate rounding in the matrix entries far beyond 1e-9 of the matrix
// scale, so the matrix comparison only separates elliptic elements sharing a
// fixed point.
class ElementIndex {
public:
    explicit ElementIndex(double cell) : h_(cell) {}

    long find(const Mobius& g, const Point& image, const std::vector<Mobius>& store,
              const std::vector<Point>& images) const {
        const long iu = cell_u(image);
        for (long du = -1; du <= 1; ++du) {
            const double yc = std::exp((iu + du) * h_);
            const long iv = static_cast<long>(std::floor(image.x / (yc * h_)));
            for (long dv = -1; dv <= 1; ++dv) {
                auto it = map_.find(key(iu + du, iv + dv));
                if (it == map_.end()) continue;
                for (long idx : it->second)
                    if (hyp_dist(images[idx], image) < 1e-7 && store[idx].approx_equal(g, 1e-6))
                        return idx;
            }
        }
        return -1;
    }

    void insert(const Point& image, long idx) {
        const long iu = cell_u(image);
        const double yc = std::exp(iu * h_);
        const long iv = static_cast<long>(std::floor(image.x / (yc * h_)));
        map_[key(iu, iv)].push_back(idx);
    }

private:
    long cell_u(const Point& p) const { return static_cast<long>(std::floor(std::log(p.y) / h_)); }
    static std::uint64_t key(long a, long b) {
        return (static_cast<std::uint64_t>(a) << 32) ^ static_cast<std::uint32_t>(b);
    }
    double h_;
    std::unordered_map<std::uint64_t, std::vector<long>> map_;
};

}  // namespace

GroupBall group_ball(const GroupSpec& spec, const Point& z, double R) {
    require(R > 0.0, "group_ball: R must be positive");
    require(z.valid(), "group_ball: invalid point");
    const std::vector<Mobius> letters = alphabet(spec);
    double max_gen = 0.0;
    for (const auto& g : letters) max_gen = std::max(max_gen, hyp_dist(z, mobius_apply(g, z)));
    const double margin = spec.prune_margin >= 0.0
                              ? spec.prune_margin + 2.0 * hyp_dist(z, spec.base_point)
                              : 2.0 * max_gen;
    const double limit = R + margin;

    std::vector<Mobius> mats{Mobius::identity()};
    std::vector<long> parent{-1};
    std::vector<int> letter{-1};
    std::vector<double> disp{0.0};
    std::vector<Point> images{z};
    ElementIndex index(0.05);
    index.insert(z, 0);

    std::vector<long> frontier{0};
    for (int depth = 1; !frontier.empty(); ++depth) {
        std::vector<long> next;
        for (long node : frontier) {
            for (std::size_t k = 0; k < letters.size(); ++k) {
                const Mobius g = mats[node] * letters[k];
                const Point image = mobius_apply(g, z);
                const double d = hyp_dist(z, image);
                if (d > limit) continue;
                if (index.find(g, image, mats, images) >= 0) continue;
                if (depth > spec.max_word_length) {
                    throw EnumerationTruncated(
                        "group_ball: max_word_length " + std::to_string(spec.max_word_length) +
                        " reached with unexplored elements inside the pruning radius");
                }
                const long idx = static_cast<long>(mats.size());
                mats.push_back(g);
                parent.push_back(node);
                letter.push_back(static_cast<int>(k));
                disp.push_back(d);
                images.push_back(image);
                index.insert(image, idx);
                next.push_back(idx);
            }
        }
        frontier = std::move(next);
    }

    GroupBall ball;
    ball.radius = R;
    ball.center = z;
    for (std::size_t i = 1; i < mats.size(); ++i) {
        if (disp[i] > R + 1e-12) continue;
        GroupElement e{mats[i], {}, disp[i]};
        for (long n = static_cast<long>(i); parent[n] >= 0; n = parent[n]) e.word.push_back(letter[n]);
        std::reverse(e.word.begin(), e.word.end());
        ball.elements.push_back(std::move(e));
    }
    std::stable_sort(ball.elements.begin(), ball.elements.end(),
                     [](const GroupElement& a, const GroupElement& b) {
                         return a.displacement < b.displacement;
                     });
    return ball;
}

double lattice_count_bound(double R, double ell) {
    require(ell > 0.0, "lattice_count_bound: ell must be positive");
    return (std::cosh(R + ell) - 1.0) / (std::cosh(ell) - 1.0);
}

InjRad injectivity_radius(const GroupSpec& spec, const Point& z, double R_cap) {
    require(R_cap > 0.0, "injectivity_radius: R_cap must be positive");
    const GroupBall ball = group_ball(spec, z, R_cap);
    if (ball.elements.empty()) return {0.5 * R_cap, true};
    return {0.5 * ball.elements.front().displacement, false};
}

Lattice::Lattice(GroupSpec spec, double radius) : spec_(std::move(spec)), radius_(radius) {
    elements_ = group_ball(spec_, spec_.base_point, radius_).elements;
    inverses_.reserve(elements_.size());
    for (const auto& e : elements_) inverses_.push_back(e.g.inverse());
    letters_ = alphabet(spec_);
}

std::span<const GroupElement> Lattice::within(double r) const {
    auto it = std::upper_bound(elements_.begin(), elements_.end(), r,
                               [](double v, const GroupElement& e) { return v < e.displacement; });
    return {elements_.data(), static_cast<std::size_t>(it - elements_.begin())};
}

bool Lattice::dirichlet_contains(const Point& z) const {
    const Point& z0 = base();
    const double d = hyp_dist(z0, z);
    const double need = 2.0 * d + 1e-6;
    if (need > radius_)
        throw EnumerationTruncated("dirichlet_contains: cached ball radius " +
                                   std::to_string(radius_) + " below required " +
                                   std::to_string(need));
    // d(z0, g z) = d(g^-1 z0, z); the ball is closed under inverses.
    for (const auto& e : within(need))
        if (hyp_dist(z0, mobius_apply(e.g, z)) <= d) return false;
    return true;
}

Lattice::Reduced Lattice::reduce(const Point& z) const {
    const Point& z0 = base();
    Mobius acc = Mobius::identity();
    Point p = z;
    double d = hyp_dist(z0, p);
    for (int iter = 0; iter < 100000; ++iter) {
        const double need = 2.0 * d + 1e-6;
        double best = d;
        const Mobius* best_g = nullptr;
        if (need > radius_) {
            for (const auto& g : letters_) {
                const double dd = hyp_dist(z0, mobius_apply(g, p));
                if (dd < best) {
                    best = dd;
                    best_g = &g;
                }
            }
        } else {
            for (const auto& e : within(need)) {
                const double dd = hyp_dist(z0, mobius_apply(e.g, p));
                if (dd < best) {
                    best = dd;
                    best_g = &e.g;
                }
            }
        }
        if (best_g == nullptr || best >= d - 1e-13) {
            if (need > radius_)
                throw EnumerationTruncated("reduce: generators cannot bring the point within the cached ball");
            return {acc, p};
        }
        acc = *best_g * acc;
        p = mobius_apply(*best_g, p);
        d = best;
    }
    throw NumericalError("reduce: no convergence");
}

InjRad Lattice::injectivity_radius(const Point& z, double R_cap) const {
    require(R_cap > 0.0, "injectivity_radius: R_cap must be positive");
    const Point p = reduce(z).point;
    const double d0 = hyp_dist(base(), p);
    // The minimal displacement at p is realised by some g with
    // d(z0, g z0) <= d(p, g p) + 2 d(z0, p).
    const double need = R_cap + 2.0 * d0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : within(std::min(need, radius_)))
        best = std::min(best, hyp_dist(p, mobius_apply(e.g, p)));
    if (need > radius_ && !(best + 2.0 * d0 <= radius_))
        throw EnumerationTruncated("injectivity_radius: cached ball radius too small for R_cap");
    if (best > R_cap) return {0.5 * R_cap, true};
    return {0.5 * best, false};
}

double Lattice::covering_radius(double cap) const {
    const double hi0 = std::min(cap, 0.5 * radius_ - 1e-6);
    const Point& z0 = base();
    auto boundary = [&](double theta) {
        if (dirichlet_contains(geom::polar_from(z0, theta, hi0))) return hi0;
        double lo = 0.0, hi = hi0;
        for (int it = 0; it < 48; ++it) {
            const double mid = 0.5 * (lo + hi);
            (dirichlet_contains(geom::polar_from(z0, theta, mid)) ? lo : hi) = mid;
        }
        return hi;
    };
    const int n = 256;
    const double step = geom::two_pi / n;
    double best = 0.0, best_theta = 0.0;
    for (int k = 0; k < n; ++k) {
        const double b = boundary(k * step);
        if (b > best) {
            best = b;
            best_theta = k * step;
        }
    }
    if (best >= hi0) return hi0;
    // Golden-section refinement around the best ray.
    double a = best_theta - step, b = best_theta + step;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = boundary(c), fd = boundary(d);
    for (int it = 0; it < 40; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = boundary(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = boundary(d);
        }
    }
    return std::min(hi0, std::max({best, fc, fd}) + 1e-6);
}

int Lattice::translates_in_domain(const Point& z) const {
    int count = dirichlet_contains(z) ? 1 : 0;
    for (const auto& e : elements_) {
        const Point p = mobius_apply(e.g, z);
        if (2.0 * hyp_dist(base(), p) + 1e-6 > radius_) continue;
        if (dirichlet_contains(p)) ++count;
    }
    return count;
}

DomainSample sample_domain(const Lattice& lattice, double window, std::size_t n,
                           std::uint64_t seed, Exec exec) {
    require(window > 0.0, "sample_domain: window must be positive");
    require(n >= 1, "sample_domain: need at least one sample");
    DomainSample out;
    out.window = window;
    out.points.resize(n);
    std::vector<std::uint64_t> proposals(n, 0);
    const Point z0 = lattice.base();
    for_each_index(
        n,
        [&](std::size_t i) {
            CounterRng rng(seed, i);
            for (std::uint64_t k = 1;; ++k) {
                const double u1 = rng.uniform(), u2 = rng.uniform();
                const Point p = geom::ball_point(z0, window, u1, u2);
                if (lattice.dirichlet_contains(p)) {
                    out.points[i] = p;
                    proposals[i] = k;
                    return;
                }
                if (k > 100000) throw NumericalError("sample_domain: acceptance rate too small");
            }
        },
        exec);
    double total = 0.0;
    for (auto k : proposals) total += static_cast<double>(k);
    out.acceptance = static_cast<double>(n) / total;
    const double vb = geom::ball_volume(window);
    out.volume = out.acceptance * vb;
    out.volume_error = vb * std::sqrt(out.acceptance * (1.0 - out.acceptance) / total);
    return out;
}

Systole systole(const GroupSpec& spec, double search_radius) {
    require(search_radius > 0.0, "systole: search_radius must be positive");
    // Every closed geodesic has a conjugate whose axis meets the Dirichlet
    // domain, so its translation length is realised by an element moving the
    // base point by at most length + 2 * covering radius.
    const double probe = 2.0 * search_radius + 1e-3;
    const Lattice small(spec, probe);
    const double rD = small.covering_radius(search_radius);
    const double reach = search_radius + 2.0 * rD;
    const GroupBall ball = group_ball(spec, spec.base_point, reach);
    Systole best{std::numeric_limits<double>::infinity(), Mobius::identity(), reach};
    for (const auto& e : ball.elements) {
        const double len = e.g.translation_length();
        if (len > 0.0 && len < best.value) {
            best.value = len;
            best.element = e.g;
        }
    }
    if (!(best.value <= search_radius))
        throw EnumerationTruncated("systole: no closed geodesic shorter than search_radius " +
                                   std::to_string(search_radius));
    return best;
}

Fraction thin_part_fraction(const Lattice& lattice, double R, std::size_t n, std::uint64_t seed,
                            double window, Exec exec) {
    require(R > 0.0, "thin_part_fraction: R must be positive");
    const DomainSample s = sample_domain(lattice, window, n, seed, exec);
    std::vector<double> hit(n);
    for_each_index(
        n,
        [&](std::size_t i) {
            hit[i] = lattice.injectivity_radius(s.points[i], 2.0 * R).value < R ? 1.0 : 0.0;
        },
        exec);
    const double p = ordered_sum(hit) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

}  // namespace hyplab::fuchsian
