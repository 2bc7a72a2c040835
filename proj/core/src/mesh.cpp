#include "z2spectra/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "spherical_delaunay.hpp"
#include "z2spectra/errors.hpp"

namespace z2s {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxCutSegment = 0.05;
constexpr int kExhaustiveLimit = 12;

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

Vec3 centroid(const TwistedMesh& m, int t) {
    const auto& v = m.triangles[t];
    return (m.vertices[v[0]] + m.vertices[v[1]] + m.vertices[v[2]]).normalized();
}

std::vector<Vec3> great_arc(const Vec3& a, const Vec3& b) {
    Vec3 dir = b - a.dot(b) * a;
    double angle = geodesic_distance(a, b);
    if (dir.norm() < 1e-9) {
        // Antipodal pair: any meridian works; use the chart's first axis.
        dir = StereoChart::at(a).e1;
    } else {
        dir.normalize();
    }
    const int segments = std::max(2, static_cast<int>(std::ceil(angle / kMaxCutSegment)));
    std::vector<Vec3> pts;
    pts.reserve(segments + 1);
    for (int i = 0; i <= segments; ++i) {
        const double s = angle * i / segments;
        pts.push_back((std::cos(s) * a + std::sin(s) * dir).normalized());
    }
    pts.front() = a;
    pts.back() = b;
    return pts;
}

double segment_distance(const Vec3& x, const Vec3& a, const Vec3& b) {
    const double ends = std::min(geodesic_distance(x, a), geodesic_distance(x, b));
    const Vec3 n = a.cross(b);
    if (n.norm() < 1e-15) return ends;
    const Vec3 nn = n.normalized();
    const Vec3 proj = x - x.dot(nn) * nn;
    if (proj.norm() < 1e-15) return ends;
    const Vec3 q = proj.normalized();
    // q lies on the arc iff it is on the inner side of both endpoints.
    if (a.cross(q).dot(nn) >= 0.0 && q.cross(b).dot(nn) >= 0.0) {
        return std::asin(std::min(1.0, std::abs(x.dot(nn))));
    }
    return ends;
}

double polyline_distance(const Vec3& x, const std::vector<Vec3>& line) {
    double d = kPi;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) d = std::min(d, segment_distance(x, line[i], line[i + 1]));
    return d;
}

bool polylines_cross(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
        for (std::size_t j = 0; j + 1 < q.size(); ++j)
            if (arcs_cross(p[i], p[i + 1], q[j], q[j + 1])) return true;
    return false;
}

double polyline_length(const std::vector<Vec3>& line) {
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) len += geodesic_distance(line[i], line[i + 1]);
    return len;
}

/// Cut segments with bounding caps for fast crossing queries.
class CutIndex {
public:
    explicit CutIndex(const CutSystem& cuts) {
        for (const auto& arc : cuts.arcs) {
            for (std::size_t i = 0; i + 1 < arc.polyline.size(); ++i) {
                const Vec3& a = arc.polyline[i];
                const Vec3& b = arc.polyline[i + 1];
                segs_.push_back({a, b, (a + b).normalized(), 0.5 * geodesic_distance(a, b)});
            }
        }
    }

    int parity(const Vec3& x, const Vec3& y) const {
        if (segs_.empty()) return 0;
        const Vec3 mid = (x + y).normalized();
        const double half = 0.5 * geodesic_distance(x, y);
        int count = 0;
        for (const auto& s : segs_) {
            if (std::acos(std::clamp(mid.dot(s.mid), -1.0, 1.0)) > half + s.half + 1e-9) continue;
            if (arcs_cross(x, y, s.a, s.b)) ++count;
        }
        return count & 1;
    }

private:
    struct Seg {
        Vec3 a, b, mid;
        double half;
    };
    std::vector<Seg> segs_;
};

std::vector<std::array<int, 3>> build_neighbors(const std::vector<std::array<int, 3>>& tris) {
    std::unordered_map<std::uint64_t, std::pair<int, int>> first;
    first.reserve(tris.size() * 2);
    std::vector<std::array<int, 3>> nb(tris.size(), {-1, -1, -1});
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        for (int k = 0; k < 3; ++k) {
            const auto key = edge_key(tris[t][k], tris[t][(k + 1) % 3]);
            auto it = first.find(key);
            if (it == first.end()) {
                first.emplace(key, std::make_pair(t, k));
                continue;
            }
            const auto [s, j] = it->second;
            if (nb[s][j] != -1) throw Error(ErrorCode::QualityFailure, "edge shared by more than two triangles");
            nb[s][j] = t;
            nb[t][k] = s;
        }
    }
    for (const auto& row : nb)
        for (int x : row)
            if (x < 0) throw Error(ErrorCode::QualityFailure, "triangulation is not closed");
    return nb;
}

void compute_sigma(TwistedMesh& m) {
    const CutIndex index(m.cuts);
    m.sigma.assign(m.triangles.size(), {1, 1, 1});
    for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
        for (int k = 0; k < 3; ++k) {
            const int s = m.neighbors[t][k];
            if (s < t) continue;
            const Vec3 mid = (m.vertices[m.triangles[t][k]] + m.vertices[m.triangles[t][(k + 1) % 3]]).normalized();
            const int odd = index.parity(m.anchors[t], mid) ^ index.parity(mid, m.anchors[s]);
            m.sigma[t][k] = odd ? -1 : 1;
        }
    }
}

std::vector<std::string> twist_failures(const TwistedMesh& m, TwistDiagnostics* diag) {
    std::vector<std::string> out;
    const std::size_t nt = m.triangles.size();
    if (m.sigma.size() != nt || m.neighbors.size() != nt || m.anchors.size() != nt) {
        out.push_back("per-triangle arrays have inconsistent sizes");
        return out;
    }
    const int chi = m.euler_characteristic();
    if (diag) diag->euler_characteristic = chi;
    if (chi != 2) out.push_back("Euler characteristic is " + std::to_string(chi) + ", expected 2");

    std::vector<std::int8_t> hol(m.vertices.size(), 1);
    for (int t = 0; t < static_cast<int>(nt); ++t) {
        const auto& v = m.triangles[t];
        if (m.vertices[v[0]].cross(m.vertices[v[1]]).dot(m.vertices[v[2]]) <= 0.0) {
            out.push_back("triangle " + std::to_string(t) + " is inverted");
        }
        for (int k = 0; k < 3; ++k) {
            if (m.sigma[t][k] != 1 && m.sigma[t][k] != -1) {
                out.push_back("sign entry of triangle " + std::to_string(t) + " is not +-1");
                continue;
            }
            const int s = m.neighbors[t][k];
            if (s < t) continue;
            const int g = m.transition(t, k);
            hol[v[k]] = static_cast<std::int8_t>(hol[v[k]] * g);
            hol[v[(k + 1) % 3]] = static_cast<std::int8_t>(hol[v[(k + 1) % 3]] * g);
        }
    }
    std::vector<char> is_branch(m.vertices.size(), 0);
    for (int b : m.branch_vertices) {
        if (b < 0 || b >= static_cast<int>(m.vertices.size())) {
            out.push_back("branch vertex index out of range");
            continue;
        }
        is_branch[b] = 1;
    }
    int bad = 0;
    for (std::size_t v = 0; v < hol.size(); ++v) {
        const int expected = is_branch[v] ? -1 : 1;
        if (hol[v] != expected && bad++ < 8) {
            out.push_back("holonomy at vertex " + std::to_string(v) + " is " + std::to_string(hol[v]) +
                          ", expected " + std::to_string(expected));
        }
    }
    if (bad > 8) out.push_back(std::to_string(bad - 8) + " further holonomy failures");
    if (diag) diag->holonomy = std::move(hol);
    return out;
}

void throw_if_invalid(const TwistedMesh& m) {
    const auto failures = twist_failures(m, nullptr);
    if (failures.empty()) return;
    std::ostringstream os;
    os << "mesh failed twist validation: " << failures.front();
    if (failures.size() > 1) os << " (+" << failures.size() - 1 << " more)";
    throw Error(ErrorCode::QualityFailure, os.str());
}

std::vector<Vec3> icosphere_points(int freq) {
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    std::vector<Vec3> ico;
    for (double s1 : {-1.0, 1.0}) {
        for (double s2 : {-1.0, 1.0}) {
            ico.push_back(Vec3(0.0, s1, s2 * phi).normalized());
            ico.push_back(Vec3(s1, s2 * phi, 0.0).normalized());
            ico.push_back(Vec3(s2 * phi, 0.0, s1).normalized());
        }
    }
    const auto faces = detail::spherical_delaunay(ico);
    std::vector<Vec3> pts = ico;
    std::unordered_map<std::uint64_t, bool> done;
    for (const auto& f : faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = std::min(f[k], f[(k + 1) % 3]);
            const int b = std::max(f[k], f[(k + 1) % 3]);
            if (!done.emplace(edge_key(a, b), true).second) continue;
            for (int i = 1; i < freq; ++i) {
                const double s = static_cast<double>(i) / freq;
                pts.push_back(((1.0 - s) * ico[a] + s * ico[b]).normalized());
            }
        }
        for (int i = 1; i < freq; ++i) {
            for (int j = 1; i + j < freq; ++j) {
                const double u = static_cast<double>(i) / freq;
                const double w = static_cast<double>(j) / freq;
                pts.push_back(((1.0 - u - w) * ico[f[0]] + u * ico[f[1]] + w * ico[f[2]]).normalized());
            }
        }
    }
    return pts;
}

}  // namespace

// ---------------------------------------------------------------- cuts

bool arcs_cross(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Vec3 n1 = a.cross(b);
    const Vec3 n2 = c.cross(d);
    if ((n1.dot(c) >= 0.0) == (n1.dot(d) >= 0.0)) return false;
    if ((n2.dot(a) >= 0.0) == (n2.dot(b) >= 0.0)) return false;
    Vec3 x = n1.cross(n2);
    if (x.dot(a + b) < 0.0) x = -x;
    return x.dot(c + d) > 0.0;
}

int cut_crossing_parity(const CutSystem& cuts, const Vec3& x, const Vec3& y) {
    return CutIndex(cuts).parity(x, y);
}

double total_length(const CutSystem& cuts) {
    double len = 0.0;
    for (const auto& arc : cuts.arcs) len += polyline_length(arc.polyline);
    return len;
}

namespace {

struct PairTable {
    int n = 0;
    std::vector<std::vector<Vec3>> arcs;  // index i * n + j, i < j
    std::vector<double> length;
    std::vector<char> clear;

    int id(int i, int j) const { return i < j ? i * n + j : j * n + i; }
};

PairTable pair_table(const Configuration& p) {
    PairTable t;
    t.n = static_cast<int>(p.size());
    t.arcs.resize(t.n * t.n);
    t.length.assign(t.n * t.n, 0.0);
    t.clear.assign(t.n * t.n, 0);
    const double clearance = 0.5 * p.separation_floor();
    for (int i = 0; i < t.n; ++i) {
        for (int j = i + 1; j < t.n; ++j) {
            const int id = t.id(i, j);
            t.arcs[id] = great_arc(p[i], p[j]);
            t.length[id] = polyline_length(t.arcs[id]);
            bool ok = true;
            for (int k = 0; k < t.n && ok; ++k) {
                if (k == i || k == j) continue;
                ok = polyline_distance(p[k], t.arcs[id]) >= clearance;
            }
            t.clear[id] = ok;
        }
    }
    return t;
}

}  // namespace

std::vector<Pairing> admissible_pairings(const Configuration& p) {
    const int n = static_cast<int>(p.size());
    if (n == 0) return {Pairing{}};
    const PairTable table = pair_table(p);
    std::unordered_map<std::uint64_t, bool> cross_cache;
    auto crosses = [&](int a, int b) {
        const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
        auto it = cross_cache.find(key);
        if (it != cross_cache.end()) return it->second;
        const bool c = polylines_cross(table.arcs[a], table.arcs[b]);
        cross_cache.emplace(key, c);
        return c;
    };

    std::vector<std::pair<double, Pairing>> found;
    if (n <= kExhaustiveLimit) {
        std::vector<char> used(n, 0);
        Pairing current;
        std::vector<int> ids;
        std::function<void()> recurse = [&]() {
            int i = 0;
            while (i < n && used[i]) ++i;
            if (i == n) {
                double len = 0.0;
                for (int id : ids) len += table.length[id];
                found.emplace_back(len, current);
                return;
            }
            used[i] = 1;
            for (int j = i + 1; j < n; ++j) {
                if (used[j]) continue;
                const int id = table.id(i, j);
                if (!table.clear[id]) continue;
                bool ok = true;
                for (int other : ids) {
                    if (crosses(id, other)) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) continue;
                used[j] = 1;
                current.emplace_back(i, j);
                ids.push_back(id);
                recurse();
                ids.pop_back();
                current.pop_back();
                used[j] = 0;
            }
            used[i] = 0;
        };
        recurse();
    } else {
        std::vector<std::pair<double, int>> cand;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (table.clear[table.id(i, j)]) cand.emplace_back(table.length[table.id(i, j)], table.id(i, j));
        std::stable_sort(cand.begin(), cand.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        std::vector<char> used(n, 0);
        std::vector<int> ids;
        Pairing pairing;
        double len = 0.0;
        for (const auto& [l, id] : cand) {
            const int i = id / n, j = id % n;
            if (used[i] || used[j]) continue;
            bool ok = true;
            for (int other : ids) ok = ok && !crosses(id, other);
            if (!ok) continue;
            used[i] = used[j] = 1;
            ids.push_back(id);
            pairing.emplace_back(i, j);
            len += l;
        }
        if (static_cast<int>(pairing.size()) * 2 == n) found.emplace_back(len, pairing);
    }
    std::stable_sort(found.begin(), found.end(), [](const auto& x, const auto& y) { return x.first < y.first - 1e-12; });
    std::vector<Pairing> out;
    out.reserve(found.size());
    for (auto& f : found) out.push_back(std::move(f.second));
    return out;
}

CutSystem cuts_from_pairing(const Configuration& p, const Pairing& pairing) {
    const int n = static_cast<int>(p.size());
    if (static_cast<int>(pairing.size()) * 2 != n) {
        throw Error(ErrorCode::MatchingFailed, "pairing does not cover every branch point");
    }
    std::vector<char> used(n, 0);
    CutSystem cuts;
    const double clearance = 0.5 * p.separation_floor();
    for (const auto& [a, b] : pairing) {
        if (a < 0 || b < 0 || a >= n || b >= n || a == b || used[a] || used[b]) {
            throw Error(ErrorCode::MatchingFailed, "pairing is not a perfect matching");
        }
        used[a] = used[b] = 1;
        CutArc arc{a, b, great_arc(p[a], p[b])};
        for (int k = 0; k < n; ++k) {
            if (k != a && k != b && polyline_distance(p[k], arc.polyline) < clearance) {
                throw Error(ErrorCode::MatchingFailed, "cut arc passes too close to point " + std::to_string(k));
            }
        }
        for (const auto& other : cuts.arcs) {
            if (polylines_cross(arc.polyline, other.polyline)) {
                throw Error(ErrorCode::MatchingFailed, "cut arcs cross");
            }
        }
        cuts.arcs.push_back(std::move(arc));
    }
    return cuts;
}

CutSystem default_cuts(const Configuration& p) {
    const auto pairings = admissible_pairings(p);
    if (pairings.empty()) throw Error(ErrorCode::MatchingFailed, "no admissible non-crossing matching found");
    return cuts_from_pairing(p, pairings.front());
}

// ---------------------------------------------------------------- mesh

int TwistedMesh::mirror_edge(int t, int k) const {
    const int s = neighbors[t][k];
    const int a = triangles[t][k];
    const int b = triangles[t][(k + 1) % 3];
    for (int j = 0; j < 3; ++j) {
        if (triangles[s][j] == b && triangles[s][(j + 1) % 3] == a) return j;
    }
    throw Error(ErrorCode::QualityFailure, "inconsistent triangle orientation");
}

int TwistedMesh::transition(int t, int k) const {
    return sigma[t][k] * sigma[neighbors[t][k]][mirror_edge(t, k)];
}

TwistedMesh build_mesh(const Configuration& p, const CutSystem& cuts, const MeshParams& params) {
    if (!(params.h_target > 0.0) || params.h_target > 1.0) {
        throw Error(ErrorCode::InvalidConfiguration, "h_target must lie in (0, 1]");
    }
    if (!(params.grading_exponent >= 1.0)) {
        throw Error(ErrorCode::InvalidConfiguration, "grading exponent must be at least 1");
    }
    if (params.rings < 1) throw Error(ErrorCode::InvalidConfiguration, "rings must be positive");
    if (cuts.arcs.size() * 2 != p.size()) throw Error(ErrorCode::MatchingFailed, "cut system does not match configuration");

    const double h = params.h_target;
    const double mu = params.grading_exponent;
    const int nb = static_cast<int>(p.size());
    const double dmin = nb >= 2 ? p.min_pairwise_distance() : kPi;
    const double zone = std::min(params.grading_radius, 0.45 * dmin);
    double inner = 0.25 * zone;
    if (!params.annuli_radii.empty()) {
        inner = 2.0 * std::atan(*std::min_element(params.annuli_radii.begin(), params.annuli_radii.end()));
    }

    std::vector<Vec3> pts = p.points();
    if (nb > 0) {
        const double x = std::pow(std::min(1.0, inner / zone), 1.0 / mu);
        const int rings = std::max(static_cast<int>(std::ceil(mu * zone / h)),
                                   static_cast<int>(std::ceil((params.rings + 1) / x)) + 1);
        std::vector<double> rho(rings + 1);
        for (int k = 0; k <= rings; ++k) rho[k] = zone * std::pow(static_cast<double>(k) / rings, mu);
        for (int j = 0; j < nb; ++j) {
            const StereoChart chart = StereoChart::at(p[j]);
            for (int k = 1; k <= rings; ++k) {
                const double dr = rho[k] - rho[k - 1];
                const int count = std::max(6, static_cast<int>(std::lround(2.0 * kPi * std::sin(rho[k]) / dr)));
                const double phase = (0.6180339887498949 * k) - std::floor(0.6180339887498949 * k);
                for (int i = 0; i < count; ++i) {
                    const double a = 2.0 * kPi * (i + phase) / count;
                    pts.push_back(std::cos(rho[k]) * p[j] +
                                  std::sin(rho[k]) * (std::cos(a) * chart.e1 + std::sin(a) * chart.e2));
                }
            }
        }
    }
    const int freq = std::max(1, static_cast<int>(std::ceil(1.1071487177940904 / h)));
    const double exclude = zone + 0.5 * h;
    for (const auto& x : icosphere_points(freq)) {
        bool keep = true;
        for (int j = 0; j < nb && keep; ++j) keep = geodesic_distance(x, p[j]) >= exclude;
        if (keep) pts.push_back(x);
    }

    TwistedMesh m;
    m.vertices = std::move(pts);
    m.triangles = detail::spherical_delaunay(m.vertices);
    m.neighbors = build_neighbors(m.triangles);
    m.branch_vertices.resize(nb);
    for (int j = 0; j < nb; ++j) m.branch_vertices[j] = j;
    m.annuli_radii = params.annuli_radii;
    m.cuts = cuts;
    m.h_nominal = h;
    m.anchors.resize(m.triangles.size());
    for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) m.anchors[t] = centroid(m, t);

    const double aspect = max_aspect_ratio(m);
    if (aspect > params.max_aspect) {
        throw Error(ErrorCode::QualityFailure,
                    "worst triangle aspect ratio " + std::to_string(aspect) + " exceeds the limit");
    }
    compute_sigma(m);
    throw_if_invalid(m);
    return m;
}

TwistedMesh refine(const TwistedMesh& m) {
    TwistedMesh r;
    r.vertices = m.vertices;
    r.branch_vertices = m.branch_vertices;
    r.annuli_radii = m.annuli_radii;
    r.cuts = m.cuts;
    r.h_nominal = 0.5 * m.h_nominal;
    r.refinement_level = m.refinement_level + 1;
    std::unordered_map<std::uint64_t, int> mids;
    mids.reserve(m.edge_count());
    auto midpoint = [&](int a, int b) {
        const auto key = edge_key(a, b);
        auto it = mids.find(key);
        if (it != mids.end()) return it->second;
        const int idx = static_cast<int>(r.vertices.size());
        r.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
        mids.emplace(key, idx);
        return idx;
    };
    r.triangles.reserve(4 * m.triangles.size());
    r.sigma.reserve(4 * m.triangles.size());
    r.anchors.reserve(4 * m.triangles.size());
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const auto [a, b, c] = m.triangles[t];
        const auto s = m.sigma[t];
        const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
        const std::int8_t one = 1;
        r.triangles.push_back({a, ab, ca});
        r.sigma.push_back({s[0], one, s[2]});
        r.triangles.push_back({ab, b, bc});
        r.sigma.push_back({s[0], s[1], one});
        r.triangles.push_back({ca, bc, c});
        r.sigma.push_back({one, s[1], s[2]});
        r.triangles.push_back({ab, bc, ca});
        r.sigma.push_back({one, one, one});
        for (int i = 0; i < 4; ++i) r.anchors.push_back(m.anchors[t]);
    }
    r.neighbors = build_neighbors(r.triangles);
    return r;
}

TwistedMesh refine(const TwistedMesh& m, int levels) {
    TwistedMesh r = m;
    for (int i = 0; i < levels; ++i) r = refine(r);
    return r;
}

TwistedMesh transport(const TwistedMesh& m, const SphereDeformation& phi) {
    TwistedMesh r = m;
    for (auto& x : r.vertices) x = phi.apply(x);
    for (auto& x : r.anchors) x = phi.apply(x);
    for (auto& arc : r.cuts.arcs)
        for (auto& x : arc.polyline) x = phi.apply(x);
    return r;
}

TwistedMesh with_cuts(const TwistedMesh& m, const CutSystem& cuts) {
    if (cuts.arcs.size() * 2 != m.branch_vertices.size()) {
        throw Error(ErrorCode::MatchingFailed, "cut system does not match the branch set");
    }
    TwistedMesh r = m;
    r.cuts = cuts;
    for (int t = 0; t < static_cast<int>(r.triangles.size()); ++t) r.anchors[t] = centroid(r, t);
    compute_sigma(r);
    throw_if_invalid(r);
    return r;
}

TwistDiagnostics validate_twist(const TwistedMesh& m, const Configuration& p) {
    TwistDiagnostics d;
    try {
        d.failures = twist_failures(m, &d);
        if (m.branch_vertices.size() != p.size()) {
            d.failures.push_back("mesh has " + std::to_string(m.branch_vertices.size()) + " branch vertices, expected " +
                                 std::to_string(p.size()));
        } else {
            for (std::size_t j = 0; j < p.size(); ++j) {
                const int v = m.branch_vertices[j];
                if (v >= 0 && v < static_cast<int>(m.vertices.size()) && (m.vertices[v] - p[j]).norm() > 1e-9) {
                    d.failures.push_back("branch vertex " + std::to_string(j) + " is not at its configuration point");
                }
            }
        }
    } catch (const std::exception& e) {
        d.failures.push_back(e.what());
    }
    d.pass = d.failures.empty();
    return d;
}

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double num = std::abs(a.dot(b.cross(c)));
    const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    return 2.0 * std::atan2(num, den);
}

double total_spherical_area(const TwistedMesh& m) {
    double s = 0.0;
    for (const auto& t : m.triangles) s += spherical_triangle_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
    return s;
}

double max_edge_length(const TwistedMesh& m) {
    double h = 0.0;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) h = std::max(h, geodesic_distance(m.vertices[t[k]], m.vertices[t[(k + 1) % 3]]));
    return h;
}

double max_aspect_ratio(const TwistedMesh& m) {
    double worst = 1.0;
    for (const auto& t : m.triangles) {
        const Vec3& a = m.vertices[t[0]];
        const Vec3& b = m.vertices[t[1]];
        const Vec3& c = m.vertices[t[2]];
        const double l0 = (b - a).norm(), l1 = (c - b).norm(), l2 = (a - c).norm();
        const double area = 0.5 * (b - a).cross(c - a).norm();
        if (area <= 0.0) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::max({l0, l1, l2}) * (l0 + l1 + l2) / (4.0 * std::sqrt(3.0) * area));
    }
    return worst;
}

}  // namespace z2s
