#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "z2spectra/geometry.hpp"

namespace z2s {

struct MeshParams {
    /// Nominal edge length of the icosahedral background mesh (radians).
    double h_target = 0.05;
    /// Rings sit at radii R (k/N)^grading_exponent, so local size ~ h (r/R)^(1 - 1/grading_exponent).
    double grading_exponent = 2.0;
    /// Annulus radii used for local expansions, in chart units.
    std::vector<double> annuli_radii{0.04, 0.06, 0.09, 0.135};
    /// Minimum number of graded vertex rings strictly inside the smallest annulus.
    int rings = 4;
    /// Geodesic radius of the graded zone around each branch point (capped by spacing).
    double grading_radius = 0.5;
    double max_aspect = 20.0;
};

struct CutArc {
    int a = -1;
    int b = -1;
    std::vector<Vec3> polyline;  // starts at point a, ends at point b
};

/// Disjoint arcs pairing the branch points; the bundle is trivial off the arcs.
struct CutSystem {
    std::vector<CutArc> arcs;
};

using Pairing = std::vector<std::pair<int, int>>;

/// Great-circle arcs for the given pairing; throws MatchingFailed if arcs
/// cross or pass too close to another branch point.
CutSystem cuts_from_pairing(const Configuration& p, const Pairing& pairing);

/// All admissible pairings ordered by total arc length (ties by enumeration
/// order). Exhaustive for up to 12 points, greedy beyond.
std::vector<Pairing> admissible_pairings(const Configuration& p);

/// Shortest admissible non-crossing matching.
CutSystem default_cuts(const Configuration& p);

double total_length(const CutSystem& cuts);

/// Triangulated sphere with a ±1 transition cochain.
///
/// sigma[t][k] belongs to the incidence of triangle t with its edge
/// (v[k], v[k+1]); the transition across an edge is the product of the two
/// incidences. A triangle's local frame is the cut trivialization evaluated on
/// the side of the cuts that contains its anchor point.
struct TwistedMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<std::int8_t, 3>> sigma;
    std::vector<Vec3> anchors;
    std::vector<std::array<int, 3>> neighbors;  // neighbors[t][k] across edge k
    std::vector<int> branch_vertices;           // one per configuration point
    std::vector<double> annuli_radii;
    CutSystem cuts;
    double h_nominal = 0.0;
    int refinement_level = 0;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
    std::size_t edge_count() const { return 3 * triangles.size() / 2; }
    int euler_characteristic() const {
        return static_cast<int>(vertex_count()) - static_cast<int>(edge_count()) +
               static_cast<int>(triangle_count());
    }

    /// Transition sign across edge k of triangle t.
    int transition(int t, int k) const;
    /// Local index of the edge of `neighbors[t][k]` shared with t.
    int mirror_edge(int t, int k) const;
};

TwistedMesh build_mesh(const Configuration& p, const CutSystem& cuts, const MeshParams& params);
inline TwistedMesh build_mesh(const Configuration& p, const MeshParams& params) {
    return build_mesh(p, default_cuts(p), params);
}

/// 1→4 split with midpoints reprojected; transitions and anchors are inherited.
TwistedMesh refine(const TwistedMesh& m);
TwistedMesh refine(const TwistedMesh& m, int levels);

/// Same connectivity and cochain, vertices and cuts moved by `phi`.
TwistedMesh transport(const TwistedMesh& m, const SphereDeformation& phi);

/// Same geometry, cochain recomputed from another cut system.
TwistedMesh with_cuts(const TwistedMesh& m, const CutSystem& cuts);

struct TwistDiagnostics {
    bool pass = true;
    int euler_characteristic = 0;
    std::vector<std::int8_t> holonomy;  // per vertex
    std::vector<std::string> failures;
};

/// Never throws; failures are listed in the result.
TwistDiagnostics validate_twist(const TwistedMesh& m, const Configuration& p);

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double total_spherical_area(const TwistedMesh& m);
double max_edge_length(const TwistedMesh& m);
double max_aspect_ratio(const TwistedMesh& m);

/// True when the short great-circle arcs ab and cd cross.
bool arcs_cross(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Parity of crossings of the segment from x to y with all cut arcs.
int cut_crossing_parity(const CutSystem& cuts, const Vec3& x, const Vec3& y);

}  // namespace z2s
