#include "z2spectra/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "z2spectra/errors.hpp"

namespace z2s {

namespace {

constexpr double kPi = std::numbers::pi;

// Walks across edges toward x; returns the triangle containing x and its
// barycentric coordinates (central projection onto the flat triangle).
std::pair<int, Vec3> locate(const TwistedMesh& m, int start, const Vec3& x) {
    int t = start;
    const int limit = 4 * static_cast<int>(m.triangle_count()) + 16;
    for (int step = 0; step < limit; ++step) {
        const auto& v = m.triangles[t];
        int exit = -1;
        double worst = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double d = m.vertices[v[k]].cross(m.vertices[v[(k + 1) % 3]]).dot(x);
            if (d < worst) {
                worst = d;
                exit = k;
            }
        }
        if (exit < 0) {
            Mat3 a;
            a << m.vertices[v[0]], m.vertices[v[1]], m.vertices[v[2]];
            Vec3 lam = a.partialPivLu().solve(x);
            lam /= lam.sum();
            return {t, lam};
        }
        t = m.neighbors[t][exit];
    }
    throw Error(ErrorCode::LiftPrecondition, "point location did not terminate");
}

double fit_two_term(const std::vector<double>& r, const std::vector<cplx>& y, cplx& c0, cplx& c2,
                    double& num, double& den) {
    // y_k ≈ c0 + c2 r_k², least squares with a real design.
    const int n = static_cast<int>(r.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::MatrixXcd b(n, 1);
    for (int k = 0; k < n; ++k) {
        a(k, 0) = 1.0;
        a(k, 1) = r[k] * r[k];
        b(k, 0) = y[k];
    }
    const Eigen::MatrixXcd sol = a.cast<cplx>().colPivHouseholderQr().solve(b);
    c0 = sol(0, 0);
    c2 = sol(1, 0);
    for (int k = 0; k < n; ++k) {
        num += std::norm(y[k] - c0 - c2 * (r[k] * r[k]));
        den += std::norm(y[k]);
    }
    return num;
}

LocalExpansion fit_profiles(const std::vector<double>& radii, const std::vector<cplx>& a1,
                            const std::vector<cplx>& a3) {
    LocalExpansion e;
    e.radii = radii;
    e.a_profile = a1;
    e.b_profile = a3;
    std::vector<cplx> ya(radii.size()), yb(radii.size());
    for (std::size_t k = 0; k < radii.size(); ++k) {
        ya[k] = a1[k] / std::sqrt(radii[k]);
        yb[k] = a3[k] / std::pow(radii[k], 1.5);
    }
    double num = 0.0, den = 0.0;
    cplx a2, b2;
    fit_two_term(radii, ya, e.a, a2, num, den);
    fit_two_term(radii, yb, e.b, b2, num, den);
    e.residual = den > 1e-300 ? std::sqrt(num / den) : 0.0;
    return e;
}

double high_frequency_share(const Eigen::MatrixXd& values) {
    // Half-integer frequencies m/2 with m > S/2 count as high.
    const int n = static_cast<int>(values.cols());
    const int s = n / 2;
    double hi = 0.0, total = 0.0;
    for (Eigen::Index k = 0; k < values.rows(); ++k) {
        for (int m = 0; m <= n / 2; ++m) {
            cplx c{};
            for (int j = 0; j < n; ++j) c += values(k, j) * std::polar(1.0, -2.0 * kPi * m * j / n);
            const double w = (m == 0 || 2 * m == n) ? 1.0 : 2.0;
            total += w * std::norm(c);
            if (m > s / 2) hi += w * std::norm(c);
        }
    }
    return total > 0.0 ? hi / total : 0.0;
}

void check_residual(const LocalExpansion& e, double bound, const std::string& what) {
    if (!(e.residual <= bound)) {
        throw Error(ErrorCode::PoorFit, what + ": relative fit residual " + std::to_string(e.residual) +
                                            " exceeds " + std::to_string(bound));
    }
}

}  // namespace

LocalExpansion extract_coeffs(const AnnulusLift& lift, double max_residual) {
    const Eigen::Index n = lift.values.cols();
    if (lift.radii.size() < 3 || static_cast<Eigen::Index>(lift.radii.size()) != lift.values.rows() ||
        static_cast<Eigen::Index>(lift.angles.size()) != n || n < 2) {
        throw Error(ErrorCode::LiftPrecondition, "lift needs at least three radii and matching sample angles");
    }
    // Samples cover [base, base + 4π) uniformly, so the frequency-m/2 projection
    // is a plain sum with weight 2/(number of samples per 2π).
    const double w = 4.0 / static_cast<double>(n);
    std::vector<cplx> a1(lift.radii.size()), a3(lift.radii.size());
    for (std::size_t k = 0; k < lift.radii.size(); ++k) {
        cplx s1{}, s3{};
        for (Eigen::Index s = 0; s < n; ++s) {
            const double f = lift.values(static_cast<Eigen::Index>(k), s);
            s1 += f * std::polar(1.0, -0.5 * lift.angles[s]);
            s3 += f * std::polar(1.0, -1.5 * lift.angles[s]);
        }
        a1[k] = 0.5 * w * s1;
        a3[k] = 0.5 * w * s3;
    }
    LocalExpansion e = fit_profiles(lift.radii, a1, a3);
    check_residual(e, max_residual, "branch point " + std::to_string(lift.branch));
    return e;
}

TraceOperator::TraceOperator(const TwistedMesh& mesh, const DiscreteOperatorPair& ops, const Configuration& p,
                             const ExpansionOptions& opts)
    : samples_(opts.samples), max_residual_(opts.max_residual) {
    const std::size_t np = p.size();
    if (mesh.branch_vertices.size() != np) {
        throw Error(ErrorCode::DimensionMismatch, "mesh and configuration disagree on the number of points");
    }
    radii_ = opts.radii.empty() ? mesh.annuli_radii : opts.radii;
    std::sort(radii_.begin(), radii_.end());
    if (radii_.size() < 3) throw Error(ErrorCode::LiftPrecondition, "at least three annulus radii are required");
    if (samples_ < 64) throw Error(ErrorCode::LiftPrecondition, "at least 64 samples per circle are required");
    if (radii_.front() <= 0.0) throw Error(ErrorCode::LiftPrecondition, "annulus radii must be positive");
    if (!opts.frame_angles.empty() && opts.frame_angles.size() != np) {
        throw Error(ErrorCode::DimensionMismatch, "one frame angle per point is required");
    }
    if (!opts.reference_base_angles.empty() && opts.reference_base_angles.size() != np) {
        throw Error(ErrorCode::DimensionMismatch, "one reference base angle per point is required");
    }
    const double outer = 2.0 * std::atan(radii_.back());
    for (std::size_t j = 0; j < np; ++j) {
        for (std::size_t i = 0; i < np; ++i) {
            if (i != j && geodesic_distance(p[i], p[j]) <= outer) {
                throw Error(ErrorCode::LiftPrecondition, "outer annulus of point " + std::to_string(j) +
                                                             " reaches point " + std::to_string(i));
            }
        }
    }

    // One starting triangle per branch vertex.
    std::vector<int> start(mesh.vertex_count(), -1);
    for (int t = 0; t < static_cast<int>(mesh.triangle_count()); ++t)
        for (int v : mesh.triangles[t]) start[v] = t;

    const int S = samples_;
    const int R = static_cast<int>(radii_.size());
    const auto n = static_cast<Eigen::Index>(ops.size());
    base_angles_.assign(np, 0.0);
    branches_.resize(np);

    for (std::size_t j = 0; j < np; ++j) {
        StereoChart chart = StereoChart::at(p[j]);
        if (!opts.frame_angles.empty()) chart = chart.rotated(opts.frame_angles[j]);

        // The base ray points away from the incident cut, so the sampling seam
        // sits on the far side of the circle from the cut crossing.
        double base = 0.0;
        for (const auto& arc : mesh.cuts.arcs) {
            if (arc.polyline.size() < 2) continue;
            if (arc.a == static_cast<int>(j)) base = std::arg(chart.project(arc.polyline[1])) + kPi;
            if (arc.b == static_cast<int>(j)) base = std::arg(chart.project(arc.polyline[arc.polyline.size() - 2])) + kPi;
        }
        if (!opts.reference_base_angles.empty()) {
            const double ref = opts.reference_base_angles[j];
            base += 2.0 * kPi * std::round((ref - base) / (2.0 * kPi));
        }
        base_angles_[j] = base;

        Branch& br = branches_[j];
        br.angles.resize(2 * S);
        // Sample positions lie on a fixed angular grid; the base only decides
        // where the covering angle starts, so changing cuts moves no sample.
        const double first = std::ceil(base * S / (2.0 * kPi) - 0.5);
        for (int s = 0; s < 2 * S; ++s) br.angles[s] = 2.0 * kPi * (first + s + 0.5) / S;

        std::vector<Eigen::Triplet<double>> sample_trips;
        std::vector<Eigen::Triplet<cplx>> profile_trips;
        int t = start[mesh.branch_vertices[j]];
        for (int k = 0; k < R; ++k) {
            int eps = 1;
            Vec3 prev;
            Vec3 first;
            for (int s = 0; s < S; ++s) {
                const Vec3 x = chart.unproject(std::polar(radii_[k], br.angles[s]));
                if (s == 0) {
                    first = x;
                } else if (cut_crossing_parity(mesh.cuts, prev, x)) {
                    eps = -eps;
                }
                prev = x;
                const auto [tri, bary] = locate(mesh, t, x);
                t = tri;
                const int side = cut_crossing_parity(mesh.cuts, mesh.anchors[tri], x) ? -1 : 1;
                const double sign = static_cast<double>(eps * side);
                const cplx e1 = std::polar(1.0, -0.5 * br.angles[s]) * (2.0 / S);
                const cplx e3 = std::polar(1.0, -1.5 * br.angles[s]) * (2.0 / S);
                for (int i = 0; i < 3; ++i) {
                    const int d = ops.dof_of_vertex[mesh.triangles[tri][i]];
                    if (d < 0) continue;
                    const double w = sign * bary[i] * ops.corner_sign[tri][i];
                    sample_trips.emplace_back(k * S + s, d, w);
                    profile_trips.emplace_back(2 * k, d, w * e1);
                    profile_trips.emplace_back(2 * k + 1, d, w * e3);
                }
            }
            // Closing the loop must flip the sign exactly once mod 2.
            if (cut_crossing_parity(mesh.cuts, prev, first)) eps = -eps;
            if (eps != -1) {
                throw Error(ErrorCode::LiftInconsistent, "sign lift around point " + std::to_string(j) +
                                                             " on radius " + std::to_string(radii_[k]) +
                                                             " does not change sign");
            }
        }
        br.samples.resize(R * S, n);
        br.samples.setFromTriplets(sample_trips.begin(), sample_trips.end());
        br.profile.resize(2 * R, n);
        br.profile.setFromTriplets(profile_trips.begin(), profile_trips.end());
    }
}

AnnulusLift TraceOperator::lift(const Eigen::VectorXd& u, int j) const {
    const Branch& br = branches_.at(static_cast<std::size_t>(j));
    const int S = samples_;
    const int R = static_cast<int>(radii_.size());
    const Eigen::VectorXd f = br.samples * u;
    AnnulusLift out;
    out.branch = j;
    out.radii = radii_;
    out.base_angle = base_angles_[j];
    out.angles = br.angles;
    out.values.resize(R, 2 * S);
    for (int k = 0; k < R; ++k) {
        for (int s = 0; s < S; ++s) {
            out.values(k, s) = f[k * S + s];
            out.values(k, s + S) = -f[k * S + s];
        }
    }
    out.high_frequency_share = high_frequency_share(out.values);
    return out;
}

LocalExpansion TraceOperator::expand_unchecked(const Eigen::VectorXd& u, int j) const {
    const Branch& br = branches_.at(static_cast<std::size_t>(j));
    const Eigen::VectorXcd c = br.profile * u.cast<cplx>();
    const std::size_t R = radii_.size();
    std::vector<cplx> a1(R), a3(R);
    for (std::size_t k = 0; k < R; ++k) {
        a1[k] = c[static_cast<Eigen::Index>(2 * k)];
        a3[k] = c[static_cast<Eigen::Index>(2 * k + 1)];
    }
    return fit_profiles(radii_, a1, a3);
}

LocalExpansion TraceOperator::expand(const Eigen::VectorXd& u, int j) const {
    LocalExpansion e = expand_unchecked(u, j);
    check_residual(e, max_residual_, "branch point " + std::to_string(j));
    return e;
}

std::vector<LocalExpansion> TraceOperator::expand_all(const Eigen::VectorXd& u) const {
    std::vector<LocalExpansion> out;
    out.reserve(points());
    for (std::size_t j = 0; j < points(); ++j) out.push_back(expand(u, static_cast<int>(j)));
    return out;
}

Eigen::VectorXcd TraceOperator::trace(const Eigen::VectorXd& u) const {
    Eigen::VectorXcd a(static_cast<Eigen::Index>(points()));
    for (std::size_t j = 0; j < points(); ++j) a[static_cast<Eigen::Index>(j)] = expand_unchecked(u, static_cast<int>(j)).a;
    return a;
}

Eigen::VectorXcd TraceOperator::b_vector(const Eigen::VectorXd& u) const {
    Eigen::VectorXcd b(static_cast<Eigen::Index>(points()));
    for (std::size_t j = 0; j < points(); ++j) b[static_cast<Eigen::Index>(j)] = expand_unchecked(u, static_cast<int>(j)).b;
    return b;
}

Eigen::VectorXd TraceOperator::realified_trace(const Eigen::VectorXd& u) const { return realify(trace(u)); }

Eigen::MatrixXd TraceOperator::trace_matrix(const Eigen::MatrixXd& basis) const {
    const auto np = static_cast<Eigen::Index>(points());
    Eigen::MatrixXd t(2 * np, basis.cols());
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
        const Eigen::VectorXd u = basis.col(c);
        for (Eigen::Index j = 0; j < np; ++j) {
            const LocalExpansion e = expand_unchecked(u, static_cast<int>(j));
            check_residual(e, max_residual_,
                           "column " + std::to_string(c) + " at branch point " + std::to_string(j));
            t(2 * j, c) = e.a.real();
            t(2 * j + 1, c) = e.a.imag();
        }
    }
    return t;
}

Eigen::VectorXd realify(const Eigen::VectorXcd& c) {
    Eigen::VectorXd x(2 * c.size());
    for (Eigen::Index j = 0; j < c.size(); ++j) {
        x[2 * j] = c[j].real();
        x[2 * j + 1] = c[j].imag();
    }
    return x;
}

Eigen::VectorXcd complexify(const Eigen::VectorXd& x) {
    if (x.size() % 2 != 0) throw Error(ErrorCode::DimensionMismatch, "realified vector has odd length");
    Eigen::VectorXcd c(x.size() / 2);
    for (Eigen::Index j = 0; j < c.size(); ++j) c[j] = cplx(x[2 * j], x[2 * j + 1]);
    return c;
}

double criticality_gap(const Eigen::MatrixXd& trace_matrix) {
    if (trace_matrix.cols() == 0) return 0.0;
    if (trace_matrix.cols() > trace_matrix.rows()) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(trace_matrix);
    return svd.singularValues()[svd.singularValues().size() - 1];
}

Eigen::VectorXd critical_direction(const Eigen::MatrixXd& trace_matrix) {
    if (trace_matrix.cols() == 0) throw Error(ErrorCode::RankDeficient, "empty trace matrix");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(trace_matrix, Eigen::ComputeFullV);
    const Eigen::Index k = trace_matrix.cols() - 1;
    if (trace_matrix.cols() > trace_matrix.rows()) {
        // Any vector in the kernel; the last right singular vector is one.
        return svd.matrixV().col(k);
    }
    return svd.matrixV().col(svd.singularValues().size() - 1);
}

}  // namespace z2s
