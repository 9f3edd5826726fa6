#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hyplab/geom.hpp"
#include "hyplab/parallel.hpp"

namespace hyplab::fuchsian {

using geom::Mobius;
using geom::Point;

struct GroupSpec {
    std::string name;
    std::vector<Mobius> generators;
    Point base_point{0.0, 1.0};
    int max_word_length = 32;
    // Extra radius explored beyond R before a branch is cut. Negative means the
    // default 2 * (largest generator displacement at the enumeration point).
    // A nonnegative value m is valid for side-pairing generators of the
    // Dirichlet domain at base_point when m >= its covering radius; at a point
    // z the margin used is m + 2 d(z, base_point).
    double prune_margin = -1.0;
};

GroupSpec load_group_spec(const std::string& path);
GroupSpec parse_group_spec(const std::string& json_text);
std::string group_spec_to_json(const GroupSpec& spec);

// Generators followed by the inverses that are not already listed.
std::vector<Mobius> alphabet(const GroupSpec& spec);

struct GroupElement {
    Mobius g;
    std::vector<int> word;  // indices into alphabet(spec)
    double displacement = 0.0;  // d(z, g z) at the enumeration point
};

struct GroupBall {
    std::vector<GroupElement> elements;  // sorted by displacement, identity excluded
    double radius = 0.0;
    Point center;
};

// All non-identity elements with d(z, g z) <= R reachable by the pruned
// breadth-first search. Throws EnumerationTruncated when the word-length cap
// cuts a branch that could still reach the ball.
GroupBall group_ball(const GroupSpec& spec, const Point& z, double R);

// Upper bound on the number of orbit points in a ball of radius R when the
// minimal displacement is ell.
double lattice_count_bound(double R, double ell);

struct InjRad {
    double value = 0.0;
    bool capped = false;
};

InjRad injectivity_radius(const GroupSpec& spec, const Point& z, double R_cap);

// Group elements around the base point, cached once, with Dirichlet-domain
// queries built on top.
class Lattice {
public:
    Lattice(GroupSpec spec, double radius);

    const GroupSpec& spec() const { return spec_; }
    const Point& base() const { return spec_.base_point; }
    double radius() const { return radius_; }
    std::span<const GroupElement> elements() const { return elements_; }
    // Elements with displacement at the base point at most r.
    std::span<const GroupElement> within(double r) const;

    bool dirichlet_contains(const Point& z) const;

    struct Reduced {
        Mobius g;  // g z lies in the Dirichlet domain
        Point point;
    };
    Reduced reduce(const Point& z) const;

    // Injectivity radius at any point (reduced first), capped at R_cap / 2.
    InjRad injectivity_radius(const Point& z, double R_cap) const;

    // Distance from the base point to the farthest point of the Dirichlet
    // domain, estimated by bisection along rays, clipped at `cap`.
    double covering_radius(double cap) const;

    // Number of translates g z (g in the cached ball, identity included) that
    // land in the Dirichlet domain; 1 for almost every z.
    int translates_in_domain(const Point& z) const;

private:
    GroupSpec spec_;
    double radius_;
    std::vector<GroupElement> elements_;
    std::vector<Mobius> inverses_;
    std::vector<Mobius> letters_;
};

// Samples distributed uniformly on the Dirichlet domain intersected with the
// ball B(base, window), drawn by rejection from that ball.
struct DomainSample {
    std::vector<Point> points;
    double window = 0.0;
    double acceptance = 0.0;  // accepted / proposed
    double volume = 0.0;      // acceptance * ball_volume(window)
    double volume_error = 0.0;
};
DomainSample sample_domain(const Lattice& lattice, double window, std::size_t n,
                           std::uint64_t seed, Exec exec = Exec::parallel);

struct Systole {
    double value = 0.0;
    Mobius element;
    double enumeration_radius = 0.0;
};
Systole systole(const GroupSpec& spec, double search_radius);

struct Fraction {
    double value = 0.0;
    double error = 0.0;  // one binomial standard deviation
};

Fraction thin_part_fraction(const Lattice& lattice, double R, std::size_t n, std::uint64_t seed,
                            double window, Exec exec = Exec::parallel);

}  // namespace hyplab::fuchsian
