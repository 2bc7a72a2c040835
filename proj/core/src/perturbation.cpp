#include "z2spectra/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "z2spectra/errors.hpp"

namespace z2s {

PerturbationForm bilinear_form(const std::vector<Eigen::VectorXcd>& traces, const ConfigTangent& v, double scale) {
    const auto n = static_cast<Eigen::Index>(traces.size());
    PerturbationForm form;
    form.v = v;
    form.B = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : traces) {
        if (static_cast<std::size_t>(t.size()) != v.size()) {
            throw Error(ErrorCode::DimensionMismatch, "trace length differs from the tangent length");
        }
    }
    const double c = scale * std::numbers::pi / 2.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = i; k < n; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                s += std::real(v[j] * traces[i][jj] * traces[k][jj]);
            }
            form.B(i, k) = form.B(k, i) = c * s;
        }
    }
    return form;
}

double simple_derivative(const Eigen::VectorXcd& trace, const ConfigTangent& v, double scale) {
    return bilinear_form({trace}, v, scale).B(0, 0);
}

std::vector<double> predicted_splitting(const PerturbationForm& form) {
    if (form.B.size() == 0) return {};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form.B, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd e = es.eigenvalues();
    return {e.data(), e.data() + e.size()};
}

TwistedMesh transported_mesh(const TwistedMesh& reference, const Configuration& from, const Configuration& to) {
    return transport(reference, SphereDeformation::equivariant(from, to));
}

std::vector<double> paired_slopes(const std::vector<double>& plus, const std::vector<double>& minus, double t) {
    if (plus.size() != minus.size()) {
        throw Error(ErrorCode::WindowDrift, "window multiplicity changed between the two probes");
    }
    const std::size_t n = plus.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (plus[i] - minus[n - 1 - i]) / (2.0 * t);
    return out;
}

std::vector<double> predicted_paired_slopes(const std::vector<double>& values, const Eigen::MatrixXd& B, double t) {
    const auto n = static_cast<Eigen::Index>(values.size());
    const Eigen::MatrixXd d = Eigen::Map<const Eigen::VectorXd>(values.data(), n).asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(d + t * B, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(d - t * B, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd a = ep.eigenvalues(), b = em.eigenvalues();
    return paired_slopes({a.data(), a.data() + n}, {b.data(), b.data() + n}, t);
}

Eigen::VectorXd rotational_derivative(const TwistedMesh& m, const DiscreteOperatorPair& ops, const Eigen::VectorXd& f,
                                      int i) {
    if (i < 0 || i > 2) throw Error(ErrorCode::InvalidConfiguration, "rotation index must be 0, 1 or 2");
    const Vec3 axis = Vec3::Unit(i);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(ops.size());
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(ops.size());
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        const auto& tri = m.triangles[t];
        const Vec3& x0 = m.vertices[tri[0]];
        const Vec3& x1 = m.vertices[tri[1]];
        const Vec3& x2 = m.vertices[tri[2]];
        const Vec3 cr = (x1 - x0).cross(x2 - x0);
        const double twice_area = cr.norm();
        const Vec3 n = cr / twice_area;
        const std::array<Vec3, 3> x{x0, x1, x2};
        Vec3 grad = Vec3::Zero();
        std::array<double, 3> w{};
        for (int k = 0; k < 3; ++k) {
            const int d = ops.dof_of_vertex[tri[k]];
            w[k] = d >= 0 ? ops.corner_sign[t][k] * f[d] : 0.0;
            // Gradient of the hat function: rotate the opposite edge by 90° in the plane.
            grad += w[k] * n.cross(x[(k + 2) % 3] - x[(k + 1) % 3]) / twice_area;
        }
        const Vec3 c = (x0 + x1 + x2).normalized();
        const double value = grad.dot(axis.cross(c));
        for (int k = 0; k < 3; ++k) {
            const int d = ops.dof_of_vertex[tri[k]];
            if (d < 0) continue;
            acc[d] += twice_area * ops.corner_sign[t][k] * value;
            weight[d] += twice_area;
        }
    }
    for (Eigen::Index d = 0; d < acc.size(); ++d) acc[d] /= weight[d];
    return acc;
}

WindowDerivative window_rotational_derivative(const TwistedMesh& m, const DiscreteOperatorPair& ops,
                                              const SpectralWindow& win, const Eigen::VectorXd& f, int i) {
    WindowDerivative out;
    out.raw = rotational_derivative(m, ops, f, i);
    out.projected = win.vectors * (win.vectors.transpose() * (ops.M * out.raw));
    const double raw = std::sqrt(ops.m_inner(out.raw, out.raw));
    const double proj = std::sqrt(ops.m_inner(out.projected, out.projected));
    out.closure = raw > 0.0 ? proj / raw : 1.0;
    out.commutator = std::sqrt(std::max(0.0, 1.0 - out.closure * out.closure));
    return out;
}

Eigen::MatrixXd gamma_matrix(const Eigen::VectorXcd& b) {
    const Eigen::Index n = b.size();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const cplx c = 1.5 * b[j];
        g(2 * j, 2 * j) = c.real();
        g(2 * j, 2 * j + 1) = -c.imag();
        g(2 * j + 1, 2 * j) = c.imag();
        g(2 * j + 1, 2 * j + 1) = c.real();
    }
    return g;
}

Eigen::MatrixXd h1_basis(const Configuration& p) {
    const auto gens = rotation_generators(p);
    Eigen::MatrixXd h(2 * static_cast<Eigen::Index>(p.size()), 3);
    for (int i = 0; i < 3; ++i) h.col(i) = gens[i].realify();
    return h;
}

std::vector<double> principal_angles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "subspaces live in different spaces");
    const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
                               Eigen::MatrixXd::Identity(a.rows(), a.cols());
    const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ() *
                               Eigen::MatrixXd::Identity(b.rows(), b.cols());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
    std::vector<double> out;
    for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
        out.push_back(std::acos(std::clamp(svd.singularValues()[k], -1.0, 1.0)));
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

double relative_smin(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0.0;
    return s[s.size() - 1] / s[0];
}

}  // namespace

SubspacePair h_subspaces(const Configuration& p, const std::array<Eigen::VectorXcd, 3>& rotational_traces,
                         const Eigen::VectorXcd& b, double rank_tol) {
    if (static_cast<std::size_t>(b.size()) != p.size()) {
        throw Error(ErrorCode::DimensionMismatch, "b-vector length differs from the point count");
    }
    SubspacePair s;
    s.H1 = h1_basis(p);
    s.H2.resize(2 * b.size(), 3);
    for (int i = 0; i < 3; ++i) {
        if (rotational_traces[i].size() != b.size()) {
            throw Error(ErrorCode::DimensionMismatch, "rotational trace length differs from the point count");
        }
        s.H2.col(i) = realify(rotational_traces[i]);
    }
    s.gamma_H1 = gamma_matrix(b) * s.H1;
    s.h1_smin = relative_smin(s.H1);
    s.h2_smin = relative_smin(s.H2);
    if (s.h1_smin < rank_tol) throw Error(ErrorCode::RankDeficient, "rotation generators have rank below 3");
    if (s.h2_smin < rank_tol) throw Error(ErrorCode::RankDeficient, "rotational traces have rank below 3");
    s.angles = principal_angles(s.gamma_H1, s.H2);
    return s;
}

ConstantCalibration calibrate_constant(const MeshParams& params, double delta, double step) {
    ConstantCalibration c;
    c.delta = delta;
    const double sd = std::sin(delta), cd = std::cos(delta);
    const Configuration p = Configuration::calibration({Vec3(sd, 0, cd), Vec3(sd, 0, -cd)});
    const TwistedMesh m = build_mesh(p, params);
    const DiscreteOperatorPair ops = assemble(m);
    const SpectralWindow w = solve_lowest(ops, 1);
    c.eigenvalue = w.values[0];
    const TraceOperator tr(m, ops, p);
    const std::vector<Vec3> dirs{Vec3(cd, 0, -sd), Vec3(cd, 0, sd)};
    const ConfigTangent v = tangent_from_ambient(p, dirs);
    c.predicted = simple_derivative(tr.trace(w.vectors.col(0)), v);
    double lam[2];
    for (int s = 0; s < 2; ++s) {
        const Configuration q = exp_step(p, v, s == 0 ? step : -step);
        lam[s] = solve_lowest(assemble(transported_mesh(m, p, q)), 1).values[0];
    }
    c.observed = (lam[0] - lam[1]) / (2.0 * step);
    if (c.predicted == 0.0) throw Error(ErrorCode::RankDeficient, "calibration direction has zero predicted slope");
    c.scale = c.observed / c.predicted;
    return c;
}

BranchProfile critical_branch(const TwistedMesh& m, const Configuration& p, const SpectralWindow& win,
                              const Eigen::VectorXd& f0, const ConfigTangent& v, const std::vector<double>& steps,
                              const SolverOptions& solver) {
    const DiscreteOperatorPair ops0 = assemble(m);
    const Eigen::VectorXd mf0 = ops0.M * f0;
    // Rayleigh quotient of f0 projected onto the window. Near an avoided
    // crossing the individual eigenvectors mix, but this stays smooth and its
    // slope at t = 0 is the first-order slope of f0 itself.
    auto projected = [&](const SpectralWindow& w, double& captured) {
        if (w.multiplicity() == 0) throw Error(ErrorCode::WindowDrift, "window is empty along the probe");
        const Eigen::VectorXd c = w.vectors.transpose() * mf0;
        double num = 0.0;
        for (int k = 0; k < w.multiplicity(); ++k) num += w.values[k] * c[k] * c[k];
        captured = std::sqrt(c.squaredNorm() / mf0.dot(f0));
        return num / c.squaredNorm();
    };
    BranchProfile out;
    double c0 = 0.0;
    out.base = projected(win, c0);
    for (double t : steps) {
        const Configuration q = exp_step(p, v, t);
        const SpectralWindow w =
            solve_window(assemble(transported_mesh(m, p, q)), win.center, win.half_width, 16, solver);
        if (w.multiplicity() != win.multiplicity()) {
            throw Error(ErrorCode::WindowDrift, "window multiplicity changed at step " + std::to_string(t));
        }
        double c = 0.0;
        out.steps.push_back(t);
        out.shifts.push_back(projected(w, c) - out.base);
        out.overlaps.push_back(c);
    }
    return out;
}

StationarityFit stationarity_fit(const std::vector<double>& steps, const std::vector<double>& shifts) {
    if (steps.size() != shifts.size() || steps.size() < 4) {
        throw Error(ErrorCode::DimensionMismatch, "stationarity fit needs at least four matching samples");
    }
    const auto n = static_cast<Eigen::Index>(steps.size());
    Eigen::MatrixXd a(n, 3), al(n, 4);
    Eigen::VectorXd y(n);
    StationarityFit fit;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double t = steps[k];
        a.row(k) << t * t, t * t * t, t * t * t * t;
        al.row(k) << t, t * t, t * t * t, t * t * t * t;
        y[k] = shifts[k];
        fit.bound_constant = std::max(fit.bound_constant, std::abs(shifts[k]) / (t * t));
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
    const double ss = y.squaredNorm();
    fit.r2 = ss > 0.0 ? 1.0 - (y - a * c).squaredNorm() / ss : 1.0;
    fit.coefficients = {c[0], c[1], c[2]};
    fit.linear_slope = al.colPivHouseholderQr().solve(y)[0];
    return fit;
}

}  // namespace z2s
