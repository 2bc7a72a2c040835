#include "spherical_delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "z2spectra/errors.hpp"

namespace z2s::detail {

namespace {

struct Face {
    std::array<int, 3> v;
    std::array<int, 3> nb;  // nb[k] lies across edge (v[k], v[k+1])
    bool alive = true;
};

double orient(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& q) {
    return (b - a).cross(c - a).dot(q - a);
}

class Hull {
public:
    explicit Hull(const std::vector<Vec3>& pts) : p_(pts), vertex_stamp_(pts.size(), 0), start_face_(pts.size(), -1) {}

    void build() {
        const int n = static_cast<int>(p_.size());
        if (n < 4) throw Error(ErrorCode::QualityFailure, "triangulation needs at least four points");
        const auto seed = initial_tetrahedron();
        std::vector<char> used(p_.size(), 0);
        for (int s : seed) used[s] = 1;
        for (int i = 0; i < n; ++i) {
            if (!used[i]) insert(i);
        }
    }

    std::vector<std::array<int, 3>> triangles() const {
        std::vector<std::array<int, 3>> out;
        out.reserve(faces_.size());
        for (const auto& f : faces_)
            if (f.alive) out.push_back(f.v);
        return out;
    }

private:
    std::array<int, 4> initial_tetrahedron() {
        // Tetrahedral directions in a few generic orientations; symmetric point
        // sets (icosahedra, rings) otherwise produce ties and flat seeds.
        for (int attempt = 0; attempt < 8; ++attempt) {
            const Mat3 r = axis_angle_matrix(Vec3(0.3 + attempt, 0.7, -0.5 + 0.37 * attempt).normalized() *
                                             (0.4123 + 0.7 * attempt));
            if (try_seed(r)) return seed_;
        }
        throw Error(ErrorCode::QualityFailure, "point set does not surround the origin");
    }

    bool try_seed(const Mat3& rot) {
        const double s = 1.0 / std::sqrt(3.0);
        const std::array<Vec3, 4> dirs{Vec3{s, s, s}, Vec3{s, -s, -s}, Vec3{-s, s, -s}, Vec3{-s, -s, s}};
        std::array<int, 4> idx{-1, -1, -1, -1};
        for (int k = 0; k < 4; ++k) {
            const Vec3 d = rot * dirs[k];
            double best = -2.0;
            for (int i = 0; i < static_cast<int>(p_.size()); ++i) {
                if (std::find(idx.begin(), idx.end(), i) != idx.end()) continue;
                const double val = p_[i].dot(d);
                if (val > best) {
                    best = val;
                    idx[k] = i;
                }
            }
        }
        // The origin must lie strictly inside the seed tetrahedron.
        const std::array<std::array<int, 3>, 4> tri{{{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}}};
        std::vector<Face> faces;
        for (const auto& t : tri) {
            std::array<int, 3> v{idx[t[0]], idx[t[1]], idx[t[2]]};
            if (orient(p_[v[0]], p_[v[1]], p_[v[2]], Vec3::Zero()) > 0.0) std::swap(v[1], v[2]);
            if (orient(p_[v[0]], p_[v[1]], p_[v[2]], Vec3::Zero()) > -1e-9) return false;
            // The fourth vertex has to be on the inner side as well.
            const int other = idx[6 - t[0] - t[1] - t[2]];
            if (orient(p_[v[0]], p_[v[1]], p_[v[2]], p_[other]) > -1e-9) return false;
            faces.push_back(Face{v, {-1, -1, -1}, true});
        }
        faces_ = std::move(faces);
        for (int f = 0; f < 4; ++f) {
            for (int k = 0; k < 3; ++k) {
                const int a = faces_[f].v[k], b = faces_[f].v[(k + 1) % 3];
                for (int g = 0; g < 4; ++g) {
                    if (g == f) continue;
                    for (int m = 0; m < 3; ++m) {
                        if (faces_[g].v[m] == b && faces_[g].v[(m + 1) % 3] == a) faces_[f].nb[k] = g;
                    }
                }
            }
        }
        last_ = 0;
        seed_ = idx;
        return true;
    }

    double visibility(int f, const Vec3& q) const {
        const auto& v = faces_[f].v;
        return orient(p_[v[0]], p_[v[1]], p_[v[2]], q);
    }

    int locate(const Vec3& q) {
        int f = last_;
        if (!faces_[f].alive) f = first_alive();
        const int max_steps = 4 * static_cast<int>(faces_.size()) + 16;
        int rot = 0;
        for (int step = 0; step < max_steps; ++step) {
            bool moved = false;
            for (int kk = 0; kk < 3; ++kk) {
                const int k = (kk + rot) % 3;
                const auto& v = faces_[f].v;
                if (p_[v[k]].cross(p_[v[(k + 1) % 3]]).dot(q) < 0.0) {
                    f = faces_[f].nb[k];
                    moved = true;
                    break;
                }
            }
            rot = (rot + 1) % 3;
            if (!moved) break;
        }
        if (visibility(f, q) > 0.0) return f;
        // Degenerate walk; fall back to the most visible face.
        int best = -1;
        double best_val = 0.0;
        for (int g = 0; g < static_cast<int>(faces_.size()); ++g) {
            if (!faces_[g].alive) continue;
            const double val = visibility(g, q);
            if (val > best_val) {
                best_val = val;
                best = g;
            }
        }
        if (best < 0) throw Error(ErrorCode::QualityFailure, "duplicate or interior point in triangulation");
        return best;
    }

    int first_alive() const {
        for (int f = 0; f < static_cast<int>(faces_.size()); ++f)
            if (faces_[f].alive) return f;
        return -1;
    }

    void insert(int qi) {
        const Vec3& q = p_[qi];
        const int f0 = locate(q);
        ++stamp_;
        region_.clear();
        auto add = [&](int f) {
            region_.push_back(f);
            region_stamp(f) = stamp_;
            for (int v : faces_[f].v) vertex_stamp_[v] = stamp_;
        };
        add(f0);
        for (std::size_t r = 0; r < region_.size(); ++r) {
            const int f = region_[r];
            for (int k = 0; k < 3; ++k) {
                const int g = faces_[f].nb[k];
                if (region_stamp(g) == stamp_ || visibility(g, q) <= 0.0) continue;
                int shared = 0;
                for (int m = 0; m < 3; ++m)
                    if (region_stamp(faces_[g].nb[m]) == stamp_) ++shared;
                // Grow as a topological disk whose vertices all stay on the boundary.
                if (shared != 1) continue;
                int apex = -1;
                for (int m = 0; m < 3; ++m) {
                    if (region_stamp(faces_[g].nb[m]) == stamp_) apex = faces_[g].v[(m + 2) % 3];
                }
                if (vertex_stamp_[apex] == stamp_) continue;
                add(g);
            }
        }
        horizon_.clear();
        for (int f : region_) {
            for (int k = 0; k < 3; ++k) {
                const int g = faces_[f].nb[k];
                if (region_stamp(g) == stamp_) continue;
                horizon_.push_back({faces_[f].v[k], faces_[f].v[(k + 1) % 3], g});
            }
        }
        std::vector<int> created;
        created.reserve(horizon_.size());
        for (const auto& h : horizon_) {
            const int nf = new_face(Face{{h.a, h.b, qi}, {h.outside, -1, -1}, true});
            auto& out = faces_[h.outside];
            for (int m = 0; m < 3; ++m)
                if (out.v[m] == h.b && out.v[(m + 1) % 3] == h.a) out.nb[m] = nf;
            start_face_[h.a] = nf;
            created.push_back(nf);
        }
        for (int f : region_) {
            faces_[f].alive = false;
            free_.push_back(f);
        }
        for (int nf : created) {
            const int b = faces_[nf].v[1];
            const int next = start_face_[b];
            faces_[nf].nb[1] = next;
            faces_[next].nb[2] = nf;
        }
        last_ = created.front();
    }

    int new_face(const Face& f) {
        if (!free_.empty()) {
            const int idx = free_.back();
            free_.pop_back();
            faces_[idx] = f;
            face_stamp_[idx] = 0;
            return idx;
        }
        faces_.push_back(f);
        return static_cast<int>(faces_.size()) - 1;
    }

    int& region_stamp(int f) {
        if (face_stamp_.size() < faces_.size()) face_stamp_.resize(faces_.size() + 1024, 0);
        return face_stamp_[f];
    }

    struct HorizonEdge {
        int a, b, outside;
    };

    const std::vector<Vec3>& p_;
    std::vector<Face> faces_;
    std::vector<int> free_;
    std::vector<int> face_stamp_;
    std::vector<int> vertex_stamp_;
    std::vector<int> start_face_;
    std::vector<int> region_;
    std::vector<HorizonEdge> horizon_;
    std::array<int, 4> seed_{};
    int stamp_ = 0;
    int last_ = 0;
};

}  // namespace

std::vector<std::array<int, 3>> spherical_delaunay(const std::vector<Vec3>& points) {
    Hull hull(points);
    hull.build();
    return hull.triangles();
}

}  // namespace z2s::detail
