#include "z2spectra/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/SparseCholesky>

#include "z2spectra/errors.hpp"
#include "z2spectra/parallel.hpp"
#include "z2spectra/random.hpp"

namespace z2s {

namespace {

using Triplet = Eigen::Triplet<double>;
using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

void corner_signs(const TwistedMesh& m, DiscreteOperatorPair& ops) {
    const std::size_t nv = m.vertex_count();
    std::vector<int> first_tri(nv, -1), first_loc(nv, -1);
    for (int t = 0; t < static_cast<int>(m.triangle_count()); ++t) {
        for (int i = 0; i < 3; ++i) {
            const int v = m.triangles[t][i];
            if (first_tri[v] < 0) {
                first_tri[v] = t;
                first_loc[v] = i;
            }
        }
    }
    ops.corner_sign.assign(m.triangle_count(), {1, 1, 1});
    for (std::size_t v = 0; v < nv; ++v) {
        if (ops.dof_of_vertex[v] < 0 || first_tri[v] < 0) continue;
        // Walk the fan: edge i of a triangle leaves v towards the next corner.
        int t = first_tri[v], i = first_loc[v], s = 1;
        const std::size_t guard = 4 * m.triangle_count();
        for (std::size_t step = 0;; ++step) {
            ops.corner_sign[t][i] = static_cast<std::int8_t>(s);
            s *= m.transition(t, i);
            const int next = m.neighbors[t][i];
            const int mirror = m.mirror_edge(t, i);
            t = next;
            i = (mirror + 1) % 3;  // v is the second corner of the mirrored edge
            if (t == first_tri[v]) break;
            if (step > guard) throw Error(ErrorCode::QualityFailure, "vertex fan does not close");
        }
        if (s != 1) throw Error(ErrorCode::QualityFailure, "non-branch vertex has holonomy -1");
    }
}

struct Factor {
    std::unique_ptr<Ldlt> ldlt;
    double shift = 0.0;
    int negatives = 0;
};

/// Factorizes K - shift M; returns false on a (near) zero pivot.
bool try_factor(const DiscreteOperatorPair& ops, double shift, Factor& out) {
    SparseMatrix a = ops.K - shift * ops.M;
    auto ldlt = std::make_unique<Ldlt>();
    ldlt->compute(a);
    if (ldlt->info() != Eigen::Success) return false;
    const Eigen::VectorXd d = ldlt->vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(dmax > 0.0) || d.cwiseAbs().minCoeff() <= 1e-14 * dmax) return false;
    out.ldlt = std::move(ldlt);
    out.shift = shift;
    out.negatives = static_cast<int>((d.array() < 0.0).count());
    return true;
}

Factor factor_near(const DiscreteOperatorPair& ops, double shift) {
    Factor f;
    for (int attempt = 0; attempt < 6; ++attempt) {
        const double s = shift + (attempt == 0 ? 0.0 : 1e-9 * std::pow(10.0, attempt) * std::max(1.0, std::abs(shift)));
        if (try_factor(ops, s, f)) return f;
    }
    throw Error(ErrorCode::ShiftSingular, "K - shift*M is singular near shift " + std::to_string(shift));
}

struct RitzPairs {
    std::vector<double> values;
    Eigen::MatrixXd vectors;
    std::vector<double> residuals;
    int iterations = 0;
    bool converged = false;
};

/// Restarted block Lanczos for (K - shift M)^{-1} M, self-adjoint in the M
/// inner product, with full reorthogonalization. Returns the `want` Ritz pairs
/// closest to the shift.
RitzPairs shift_invert_lanczos(const DiscreteOperatorPair& ops, const Factor& fac, int want, const SolverOptions& opts) {
    const Eigen::Index n = ops.size();
    const int block = static_cast<int>(std::min<Eigen::Index>(n, want + 3));
    const int max_basis = static_cast<int>(std::min<Eigen::Index>(n, std::max(60, 8 * block)));

    Eigen::MatrixXd q(n, max_basis), mq(n, max_basis);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(max_basis, max_basis);
    Eigen::MatrixXd op_last(n, 0);  // Op images of the most recent block
    int m = 0;

    CounterRng rng(opts.seed, 0x5EED);
    Eigen::MatrixXd next(n, block);
    for (Eigen::Index j = 0; j < next.cols(); ++j)
        for (Eigen::Index i = 0; i < n; ++i) next(i, j) = rng.normal();

    RitzPairs out;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        out.iterations = iter + 1;
        // Append the new block, orthogonalized twice against the basis.
        std::vector<int> added;
        for (Eigen::Index c = 0; c < next.cols() && m < max_basis; ++c) {
            Eigen::VectorXd w = next.col(c);
            const double norm0 = std::sqrt(std::max(0.0, w.dot(ops.M * w)));
            if (!(norm0 > 0.0)) continue;
            // Classical Gram-Schmidt, repeated while it still removes a large share.
            Eigen::VectorXd mw;
            double nrm = norm0;
            for (int pass = 0; pass < 4; ++pass) {
                if (m > 0) {
                    const Eigen::VectorXd coef = mq.leftCols(m).transpose() * w;
                    w.noalias() -= q.leftCols(m) * coef;
                }
                mw = ops.M * w;
                const double after = std::sqrt(std::max(0.0, w.dot(mw)));
                const bool settled = after > 0.5 * nrm;
                nrm = after;
                if (m == 0 || (settled && pass >= 1)) break;
            }
            if (nrm <= 1e-13 * norm0) continue;
            q.col(m) = w / nrm;
            mq.col(m) = mw / nrm;
            added.push_back(m);
            ++m;
        }
        if (added.empty()) {
            // Krylov space stagnated; inject fresh random directions.
            for (Eigen::Index j = 0; j < next.cols(); ++j)
                for (Eigen::Index i = 0; i < n; ++i) next(i, j) = rng.normal();
            if (m >= max_basis) m = 0;
            continue;
        }
        op_last.resize(n, static_cast<Eigen::Index>(added.size()));
        for (std::size_t k = 0; k < added.size(); ++k) {
            const int j = added[k];
            op_last.col(static_cast<Eigen::Index>(k)) = fac.ldlt->solve(mq.col(j));
            const Eigen::VectorXd row = mq.leftCols(m).transpose() * op_last.col(static_cast<Eigen::Index>(k));
            t.block(0, j, m, 1) = row;
            t.block(j, 0, 1, m) = row.transpose();
        }

        const Eigen::MatrixXd tm = 0.5 * (t.topLeftCorner(m, m) + t.topLeftCorner(m, m).transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tm);
        std::vector<int> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return std::abs(eig.eigenvalues()[a]) > std::abs(eig.eigenvalues()[b]);
        });
        const int have = std::min(want, m);
        out.values.assign(have, 0.0);
        out.residuals.assign(have, 0.0);
        out.vectors.resize(n, have);
        bool all = have == want;
        for (int k = 0; k < have; ++k) {
            Eigen::VectorXd u = q.leftCols(m) * eig.eigenvectors().col(order[k]);
            const Eigen::VectorXd mu = ops.M * u;
            const double unorm = std::sqrt(u.dot(mu));
            u /= unorm;
            const Eigen::VectorXd ku = ops.K * u;
            const double lam = u.dot(ku) / u.dot(ops.M * u);
            const double res = (ku - lam * (mu / unorm)).norm();
            out.values[k] = lam;
            out.vectors.col(k) = u;
            out.residuals[k] = res;
            all = all && res <= opts.tol;
        }
        if (all) {
            out.converged = true;
            return out;
        }
        if (m + block > max_basis) {
            // Restart from the best Ritz vectors.
            const int keep = std::min(m, want + block);
            next.resize(n, keep);
            for (int k = 0; k < keep; ++k) next.col(k) = q.leftCols(m) * eig.eigenvectors().col(order[k]);
            m = 0;
            t.setZero();
        } else {
            next = op_last;
        }
    }
    return out;
}

SpectralWindow finish(RitzPairs&& r, double center, double half_width, int certified) {
    SpectralWindow w;
    w.center = center;
    w.half_width = half_width;
    w.certified_count = certified;
    w.iterations = r.iterations;
    std::vector<int> order(r.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r.values[a] < r.values[b]; });
    w.vectors.resize(r.vectors.rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
        w.values.push_back(r.values[order[k]]);
        w.residuals.push_back(r.residuals[order[k]]);
        w.vectors.col(static_cast<Eigen::Index>(k)) = r.vectors.col(order[k]);
    }
    normalize_signs(w.vectors);
    return w;
}

}  // namespace

double DiscreteOperatorPair::evaluate(const TwistedMesh& m, const Eigen::VectorXd& u, int t, const Vec3& bary) const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        const int d = dof_of_vertex[m.triangles[t][i]];
        if (d >= 0) s += bary[i] * corner_sign[t][i] * u[d];
    }
    return s;
}

Eigen::VectorXd DiscreteOperatorPair::vertex_values(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof_of_vertex.size()));
    for (std::size_t v = 0; v < dof_of_vertex.size(); ++v)
        if (dof_of_vertex[v] >= 0) out[static_cast<Eigen::Index>(v)] = u[dof_of_vertex[v]];
    return out;
}

DiscreteOperatorPair assemble(const TwistedMesh& m, const AssemblyOptions& opts) {
    DiscreteOperatorPair ops;
    const std::size_t nv = m.vertex_count();
    ops.dof_of_vertex.assign(nv, 0);
    for (int b : m.branch_vertices) ops.dof_of_vertex[b] = -1;
    ops.constrained = m.branch_vertices;
    std::sort(ops.constrained.begin(), ops.constrained.end());
    int ndof = 0;
    for (std::size_t v = 0; v < nv; ++v) {
        if (ops.dof_of_vertex[v] < 0) continue;
        ops.dof_of_vertex[v] = ndof++;
        ops.vertex_of_dof.push_back(static_cast<int>(v));
    }
    corner_signs(m, ops);

    // Local matrices in fixed slots so the result is independent of the thread count.
    const std::size_t nt = m.triangle_count();
    std::vector<std::array<double, 9>> kloc(nt), mloc(nt);
    std::vector<char> bad(nt, 0);
    parallel_for(nt, opts.threads, [&](std::size_t t) {
        const auto& tri = m.triangles[t];
        const Vec3& x0 = m.vertices[tri[0]];
        const Vec3& x1 = m.vertices[tri[1]];
        const Vec3& x2 = m.vertices[tri[2]];
        const std::array<Vec3, 3> e{x2 - x1, x0 - x2, x1 - x0};
        const double flat = 0.5 * e[2].cross(-e[1]).norm();
        const double sph = spherical_triangle_area(x0, x1, x2);
        if (!(flat > 1e-300) || !(sph > 0.0)) {
            bad[t] = 1;
            return;
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                kloc[t][3 * i + j] = e[i].dot(e[j]) / (4.0 * flat);
                if (opts.quadrature == MassQuadrature::ThreePoint) {
                    mloc[t][3 * i + j] = sph * (i == j ? 2.0 : 1.0) / 12.0;
                } else {
                    mloc[t][3 * i + j] = i == j ? sph / 3.0 : 0.0;
                }
            }
        }
    });
    for (std::size_t t = 0; t < nt; ++t) {
        if (bad[t]) throw Error(ErrorCode::SingularMass, "degenerate triangle " + std::to_string(t));
    }

    std::vector<Triplet> kt, mt;
    kt.reserve(9 * nt);
    mt.reserve(9 * nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& tri = m.triangles[t];
        for (int i = 0; i < 3; ++i) {
            const int di = ops.dof_of_vertex[tri[i]];
            if (di < 0) continue;
            for (int j = 0; j < 3; ++j) {
                const int dj = ops.dof_of_vertex[tri[j]];
                if (dj < 0) continue;
                const double s = ops.corner_sign[t][i] * ops.corner_sign[t][j];
                kt.emplace_back(di, dj, s * kloc[t][3 * i + j]);
                if (mloc[t][3 * i + j] != 0.0) mt.emplace_back(di, dj, s * mloc[t][3 * i + j]);
            }
        }
    }
    ops.K.resize(ndof, ndof);
    ops.M.resize(ndof, ndof);
    ops.K.setFromTriplets(kt.begin(), kt.end());
    ops.M.setFromTriplets(mt.begin(), mt.end());
    SparseMatrix kt_t = ops.K.transpose();
    ops.K = 0.5 * (ops.K + kt_t);
    SparseMatrix mt_t = ops.M.transpose();
    ops.M = 0.5 * (ops.M + mt_t);
    ops.K.makeCompressed();
    ops.M.makeCompressed();
    return ops;
}

int count_below(const DiscreteOperatorPair& ops, double shift) {
    Factor f;
    for (int attempt = 0; attempt < 6; ++attempt) {
        // An eigenvalue sitting on the shift counts as not below it.
        const double s = shift - (attempt == 0 ? 0.0 : 1e-12 * std::pow(10.0, attempt) * std::max(1.0, std::abs(shift)));
        if (try_factor(ops, s, f)) return f.negatives;
    }
    throw Error(ErrorCode::ShiftSingular, "inertia count failed near " + std::to_string(shift));
}

void normalize_signs(Eigen::MatrixXd& vectors) {
    for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
        Eigen::Index idx = 0;
        vectors.col(k).cwiseAbs().maxCoeff(&idx);
        if (vectors(idx, k) < 0.0) vectors.col(k) *= -1.0;
    }
}

SpectralWindow solve_window(const DiscreteOperatorPair& ops, double center, double half_width, int k_max,
                            const SolverOptions& opts) {
    if (!(half_width > 0.0) || !(center >= 0.0) || k_max < 1) {
        throw Error(ErrorCode::InvalidConfiguration, "window needs center >= 0, half width > 0 and k_max >= 1");
    }
    const int lo = count_below(ops, center - half_width);
    const int hi = count_below(ops, center + half_width);
    const int certified = hi - lo;
    if (certified == 0) {
        SpectralWindow w;
        w.center = center;
        w.half_width = half_width;
        w.vectors.resize(ops.size(), 0);
        return w;
    }
    const int want = std::min(certified, k_max);
    const Factor fac = factor_near(ops, center);
    RitzPairs r = shift_invert_lanczos(ops, fac, want, opts);
    if (!r.converged) {
        throw Error(ErrorCode::NotConverged, "window solve did not converge for " + std::to_string(want) + " eigenpairs");
    }
    for (double v : r.values) {
        if (std::abs(v - center) >= half_width) {
            throw Error(ErrorCode::NotConverged, "converged Ritz value lies outside the certified window");
        }
    }
    SpectralWindow w = finish(std::move(r), center, half_width, certified);
    w.truncated = certified > k_max;
    return w;
}

SpectralWindow solve_lowest(const DiscreteOperatorPair& ops, int k, const SolverOptions& opts) {
    if (k < 1 || k > ops.size()) {
        throw Error(ErrorCode::DimensionMismatch, "requested " + std::to_string(k) + " eigenpairs of a pencil of size " +
                                                      std::to_string(ops.size()));
    }
    const Factor fac = factor_near(ops, -0.1);
    RitzPairs r = shift_invert_lanczos(ops, fac, k, opts);
    if (!r.converged) throw Error(ErrorCode::NotConverged, "lowest-eigenpair solve did not converge");
    const double top = *std::max_element(r.values.begin(), r.values.end());
    const double delta = 1e-8 * std::max(1.0, std::abs(top));
    const int below = count_below(ops, top - delta);
    const int found_below = static_cast<int>(std::count_if(r.values.begin(), r.values.end(),
                                                           [&](double v) { return v < top - delta; }));
    if (below != found_below) throw Error(ErrorCode::NotConverged, "lowest-eigenpair solve missed an eigenvalue");
    SpectralWindow w = finish(std::move(r), 0.5 * top, 0.5 * top + delta, below);
    w.certified_count = k;
    return w;
}

}  // namespace z2s
