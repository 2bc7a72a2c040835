#include "z2spectra/rigidity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "z2spectra/errors.hpp"
#include "z2spectra/parallel.hpp"
#include "z2spectra/random.hpp"

namespace z2s {

namespace {

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& a) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::Index r = qr.rank();
    const Eigen::MatrixXd q = qr.householderQ();
    return q.leftCols(r);
}

Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& a) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::Index r = qr.rank();
    const Eigen::MatrixXd q = qr.householderQ();
    return q.rightCols(a.rows() - r);
}

void align_sign(Eigen::VectorXd& u) {
    Eigen::Index k = 0;
    u.cwiseAbs().maxCoeff(&k);
    if (u[k] < 0.0) u = -u;
}

}  // namespace

SolvedConfiguration solve_configuration(const Configuration& p, const WindowPolicy& policy) {
    TwistedMesh mesh = refine(build_mesh(p, policy.mesh), policy.refinement);
    DiscreteOperatorPair ops = assemble(mesh);
    SpectralWindow window = solve_window(ops, policy.center, policy.half_width, policy.k_max, policy.solver);
    return complete_configuration(p, std::move(mesh), std::move(ops), std::move(window), policy);
}

SolvedConfiguration complete_configuration(const Configuration& p, TwistedMesh mesh, DiscreteOperatorPair ops,
                                           SpectralWindow window, const WindowPolicy& policy) {
    SolvedConfiguration s;
    s.p = p;
    s.mesh = std::move(mesh);
    s.ops = std::move(ops);
    s.window = std::move(window);
    if (s.window.multiplicity() == 0) {
        throw Error(ErrorCode::WindowDrift, "no eigenvalue in the window around " + std::to_string(policy.center));
    }
    const TraceOperator tr(s.mesh, s.ops, p, policy.expansion);
    s.trace_matrix = tr.trace_matrix(s.window.vectors);
    s.s_min = criticality_gap(s.trace_matrix);
    s.critical = s.window.vectors * critical_direction(s.trace_matrix);
    align_sign(s.critical);
    return s;
}

Eigen::VectorXd distinguished_coefficients(const Eigen::MatrixXd& pairing, const Eigen::VectorXd& reference,
                                           double rank_tol) {
    const Eigen::Index n = pairing.cols();
    if (pairing.rows() != 3 || n < 4 || reference.size() != n) {
        throw Error(ErrorCode::DimensionMismatch, "pairing matrix must be 3 × N with N ≥ 4");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(pairing, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    if (s[0] == 0.0 || s[2] / s[0] < rank_tol) {
        throw Error(ErrorCode::FunctionalRankDeficient, "rotational pairings have rank below 3");
    }
    const Eigen::MatrixXd kernel = svd.matrixV().rightCols(n - 3);
    Eigen::VectorXd c = kernel * (kernel.transpose() * reference);
    if (c.norm() < 1e-3 * reference.norm()) {
        // The reference barely reaches the kernel; fall back to the last singular direction.
        c = kernel.col(kernel.cols() - 1);
        if (c.dot(reference) < 0.0) c = -c;
    }
    return c.normalized();
}

ThetaMap::ThetaMap(const SolvedConfiguration& reference, const Eigen::VectorXd& f0, const WindowPolicy& policy)
    : ref_(std::make_shared<SolvedConfiguration>(reference)),
      p0_(reference.p),
      f0_(f0),
      policy_(policy),
      trace0_(reference.mesh, reference.ops, reference.p, policy.expansion) {
    const double norm = std::sqrt(ref_->ops.m_inner(f0_, f0_));
    f0_ /= norm;
    const Eigen::VectorXd mf0 = ref_->ops.M * f0_;
    pairing_rows_.resize(3, ref_->ops.size());
    for (int i = 0; i < 3; ++i) {
        lf0_[i] = window_rotational_derivative(ref_->mesh, ref_->ops, ref_->window, f0_, i);
        // Exact orthogonality to f0 makes the kernel at p0 contain f0 itself.
        const Eigen::VectorXd r = lf0_[i].projected - mf0.dot(lf0_[i].projected) * f0_;
        pairing_rows_.row(i) = (ref_->ops.M * r).transpose();
    }
    for (std::size_t j = 0; j < p0_.size(); ++j) e1_.push_back(StereoChart::at(p0_[j]).e1);
}

ThetaMap::Moved ThetaMap::move_to(const Configuration& p) const {
    if (p.size() != p0_.size()) throw Error(ErrorCode::DimensionMismatch, "configuration size changed");
    const SphereDeformation phi = SphereDeformation::equivariant(p0_, p);
    Moved m;
    m.mesh = transport(ref_->mesh, phi);
    m.ops = assemble(m.mesh);
    m.window = solve_window(m.ops, ref_->window.center, ref_->window.half_width, policy_.k_max, policy_.solver);
    if (m.window.multiplicity() != ref_->window.multiplicity()) {
        throw Error(ErrorCode::WindowDrift, "window multiplicity changed from " +
                                                std::to_string(ref_->window.multiplicity()) + " to " +
                                                std::to_string(m.window.multiplicity()));
    }
    m.frame_angles.resize(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        const Vec3 e = phi.core_rotation(j) * e1_[j];
        const StereoChart chart = StereoChart::at(p[j]);
        m.frame_angles[j] = std::atan2(e.dot(chart.e2), e.dot(chart.e1));
    }
    return m;
}

TraceOperator ThetaMap::moved_trace(const Moved& m, const Configuration& p) const {
    ExpansionOptions opt = policy_.expansion;
    opt.frame_angles = m.frame_angles;
    opt.reference_base_angles = trace0_.base_angles();
    return TraceOperator(m.mesh, m.ops, p, opt);
}

ThetaMap::Sample ThetaMap::evaluate(const Configuration& p) const {
    const Moved m = move_to(p);
    Sample s;
    s.p = p;
    s.window = m.window;
    const Eigen::MatrixXd pairing = pairing_rows_ * s.window.vectors;
    const Eigen::VectorXd reference = s.window.vectors.transpose() * (ref_->ops.M * f0_);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(pairing);
    s.pairing_smin = svd.singularValues()[2];
    const Eigen::VectorXd c = distinguished_coefficients(pairing, reference);
    s.section = s.window.vectors * c;

    const TraceOperator tr = moved_trace(m, p);
    s.a.resize(static_cast<Eigen::Index>(p.size()));
    s.b.resize(static_cast<Eigen::Index>(p.size()));
    for (std::size_t j = 0; j < p.size(); ++j) {
        const LocalExpansion e = tr.expand(s.section, static_cast<int>(j));
        const double alpha = m.frame_angles[j];
        s.a[static_cast<Eigen::Index>(j)] = e.a * std::polar(1.0, -0.5 * alpha);
        s.b[static_cast<Eigen::Index>(j)] = e.b * std::polar(1.0, -1.5 * alpha);
    }
    return s;
}

Eigen::MatrixXd ThetaMap::aligned_trace_matrix(const Configuration& p) const {
    const Moved m = move_to(p);
    const Eigen::MatrixXd overlap = m.window.vectors.transpose() * (ref_->ops.M * ref_->window.vectors);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd basis = m.window.vectors * (svd.matrixU() * svd.matrixV().transpose());
    Eigen::MatrixXd t = moved_trace(m, p).trace_matrix(basis);
    for (std::size_t j = 0; j < p.size(); ++j) {
        const auto r = static_cast<Eigen::Index>(2 * j);
        const cplx rot = std::polar(1.0, -0.5 * m.frame_angles[j]);
        for (Eigen::Index k = 0; k < t.cols(); ++k) {
            const cplx z = cplx(t(r, k), t(r + 1, k)) * rot;
            t(r, k) = z.real();
            t(r + 1, k) = z.imag();
        }
    }
    return t;
}

int slice_dimension(const Configuration& p) { return 4 * static_cast<int>(p.size() / 2) - 3; }

ConfigTangent slice_tangent(const Configuration& p, const Eigen::VectorXd& x) {
    if (x.size() != slice_dimension(p)) throw Error(ErrorCode::DimensionMismatch, "slice coordinate count mismatch");
    ConfigTangent v(p.size());
    v[1] = cplx(x[0], 0.0);
    for (std::size_t j = 2; j < p.size(); ++j) {
        const auto k = static_cast<Eigen::Index>(1 + 2 * (j - 2));
        v[j] = cplx(x[k], x[k + 1]);
    }
    return v;
}

SearchResult find_critical(const SearchParams& params) {
    WindowPolicy policy = params.policy;
    Configuration p = gauge_fix(params.initial).second;
    SearchResult out;
    out.trust_radius = params.trust_radius;
    SolvedConfiguration cur = solve_configuration(p, policy);
    const int mult = cur.window.multiplicity();
    out.history.push_back(cur.s_min);
    const double tol = params.tol_crit / std::pow(2.0, policy.refinement);
    const int dim = slice_dimension(p);
    double mu = 1e-3;
    double trust = params.trust_radius;

    for (int it = 0; it < params.max_iterations; ++it) {
        if (cur.s_min < tol) break;
        out.iterations = it + 1;
        // Gauss-Newton on T(p)·c = 0 over slice coordinates and window coefficients,
        // with the window basis aligned to the current one so T is smooth in p.
        const ThetaMap theta(cur, cur.critical, policy);
        const Eigen::VectorXd c0 = critical_direction(cur.trace_matrix);
        const Eigen::Index nw = c0.size();
        const Eigen::Index rows = cur.trace_matrix.rows();

        std::vector<Eigen::MatrixXd> cols(static_cast<std::size_t>(2 * dim));
        parallel_for(static_cast<std::size_t>(2 * dim), params.threads, [&](std::size_t k) {
            Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
            x[static_cast<Eigen::Index>(k / 2)] = (k % 2 == 0 ? 1.0 : -1.0) * params.fd_step;
            cols[k] = theta.aligned_trace_matrix(exp_step(p, slice_tangent(p, x), 1.0));
        });
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows + 1, dim + nw);
        for (int k = 0; k < dim; ++k) {
            jac.col(k).head(rows) = (cols[2 * k] - cols[2 * k + 1]) * c0 / (2.0 * params.fd_step);
        }
        jac.block(0, dim, rows, nw) = cur.trace_matrix;
        jac.block(rows, dim, 1, nw) = c0.transpose();
        Eigen::VectorXd r0 = Eigen::VectorXd::Zero(rows + 1);
        r0.head(rows) = cur.trace_matrix * c0;
        const Eigen::Index unknowns = dim + nw;

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r0;
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += mu * jtj.diagonal() + Eigen::VectorXd::Constant(unknowns, 1e-14 * jtj.trace());
            const Eigen::VectorXd full = -a.ldlt().solve(g);
            Eigen::VectorXd step = full.head(dim);
            if (step.norm() > trust) step *= trust / step.norm();
            try {
                const Configuration trial = gauge_fix(exp_step(p, slice_tangent(p, step), 1.0)).second;
                SolvedConfiguration cand = solve_configuration(trial, policy);
                if (cand.window.multiplicity() != mult) {
                    throw Error(ErrorCode::WindowDrift, "window multiplicity changed during the search");
                }
                if (cand.s_min < cur.s_min) {
                    p = trial;
                    cur = std::move(cand);
                    out.history.push_back(cur.s_min);
                    mu = std::max(mu / 3.0, 1e-9);
                    accepted = true;
                    // Track the window: re-centre on the current eigenvalues.
                    policy.center = std::accumulate(cur.window.values.begin(), cur.window.values.end(), 0.0) /
                                    static_cast<double>(cur.window.values.size());
                    continue;
                }
            } catch (const Error& e) {
                if (e.code() == ErrorCode::WindowDrift) throw;
                if (e.code() != ErrorCode::SeparationViolation && e.code() != ErrorCode::QualityFailure &&
                    e.code() != ErrorCode::MatchingFailed && e.code() != ErrorCode::PoorFit &&
                    e.code() != ErrorCode::LiftPrecondition) {
                    throw;
                }
            }
            mu *= 4.0;
            trust *= 0.5;
            if (trust < 1e-8) {
                throw Error(ErrorCode::NotFound, "trust region exhausted at s_min = " + std::to_string(cur.s_min));
            }
        }
    }
    if (!(cur.s_min < tol)) {
        throw Error(ErrorCode::NotFound, "no critical configuration within " + std::to_string(params.max_iterations) +
                                             " iterations (s_min = " + std::to_string(cur.s_min) + ")");
    }
    out.trust_radius = trust;
    out.f0 = cur.critical;
    out.solution = std::move(cur);
    return out;
}

Eigen::MatrixXd complement_projector(const Eigen::MatrixXd& h) {
    const Eigen::MatrixXd q = orthonormal_basis(h);
    return Eigen::MatrixXd::Identity(h.rows(), h.rows()) - q * q.transpose();
}

ThetaDerivative theta_derivative_fd(const ThetaMap& theta, const ConfigTangent& v, const std::vector<double>& steps,
                                    const Eigen::MatrixXd& h2, double scale) {
    if (steps.empty()) throw Error(ErrorCode::InvalidConfiguration, "at least one step is required");
    const Eigen::MatrixXd proj = complement_projector(h2);
    ThetaDerivative d;
    d.steps = steps;
    for (double t : steps) {
        const Eigen::VectorXd plus = theta.realified(exp_step(theta.base(), v, t));
        const Eigen::VectorXd minus = theta.realified(exp_step(theta.base(), v, -t));
        d.central.push_back(proj * (plus - minus) / (2.0 * t));
        d.growth.push_back((proj * plus).norm());
    }
    std::vector<Eigen::VectorXd> level = d.central;
    std::vector<double> h = steps;
    while (level.size() > 1) {
        std::vector<Eigen::VectorXd> next;
        for (std::size_t k = 0; k + 1 < level.size(); ++k) {
            const double q2 = (h[k] / h[k + 1]) * (h[k] / h[k + 1]);
            next.push_back((q2 * level[k + 1] - level[k]) / (q2 - 1.0));
        }
        d.richardson.push_back(next.back());
        level = std::move(next);
        h.erase(h.begin());
    }
    d.value = d.richardson.empty() ? d.central.back() : d.richardson.back();
    d.norm = d.value.norm();
    if (d.central.size() >= 3) {
        // First-level extrapolants from the two finest pairs.
        const std::size_t n = d.central.size();
        auto rich = [&](std::size_t k) {
            const double q2 = (steps[k] / steps[k + 1]) * (steps[k] / steps[k + 1]);
            return Eigen::VectorXd((q2 * d.central[k + 1] - d.central[k]) / (q2 - 1.0));
        };
        const Eigen::VectorXd r1 = rich(n - 3), r2 = rich(n - 2);
        d.level_disagreement = (r2 - r1).norm() / std::max(r2.norm(), scale);
    } else if (d.central.size() == 2) {
        d.level_disagreement =
            (d.central[1] - d.central[0]).norm() / std::max(d.central[1].norm(), scale);
    }
    if (d.level_disagreement > 0.2) {
        throw Error(ErrorCode::StepTooLarge, "Richardson levels disagree by " +
                                                 std::to_string(100.0 * d.level_disagreement) + "%");
    }
    return d;
}

double quotient_smin(const Eigen::VectorXcd& b, const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2) {
    const Eigen::MatrixXd c1 = orthonormal_complement(h1);
    const Eigen::MatrixXd c2 = orthonormal_complement(h2);
    const Eigen::MatrixXd q = c2.transpose() * gamma_matrix(b) * c1;
    if (q.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(q);
    const auto& s = svd.singularValues();
    return s.size() < std::min(q.rows(), q.cols()) ? 0.0 : s[s.size() - 1];
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Rigid: return "rigid";
        case Verdict::NotMinimal: return "not-minimal";
        case Verdict::Degenerate: return "degenerate";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

Verdict classify(const VerdictInputs& in) {
    if (in.multiplicity != 4) return Verdict::NotMinimal;
    if (!(in.s_min < in.tol_crit)) return Verdict::Inconclusive;
    if (!(in.min_b > in.tol_b) || !(in.s_q > in.tol_t)) return Verdict::Degenerate;
    if (!in.growth_consistent) return Verdict::Inconclusive;
    return Verdict::Rigid;
}

std::vector<Eigen::VectorXd> transverse_directions(const Configuration& p, int count, std::uint64_t seed) {
    const Eigen::MatrixXd proj = complement_projector(h1_basis(p));
    CounterRng rng(seed, 0x7472616e73ULL);
    std::vector<Eigen::VectorXd> out;
    const auto n = static_cast<Eigen::Index>(2 * p.size());
    while (static_cast<int>(out.size()) < count) {
        Eigen::VectorXd x(n);
        for (Eigen::Index k = 0; k < n; ++k) x[k] = rng.normal();
        x = proj * x;
        if (x.norm() < 1e-6) continue;
        out.push_back(x.normalized());
    }
    return out;
}

double orbit_distance(const Configuration& a, const Configuration& b) {
    return max_point_distance(gauge_fix(a).second, gauge_fix(b).second);
}

RigidityReport verify_rigidity(const SolvedConfiguration& solved, const Eigen::VectorXd& f0,
                               const WindowPolicy& policy, const RigidityOptions& opts) {
    RigidityReport r;
    r.p = solved.p;
    r.window_values = solved.window.values;
    r.multiplicity = solved.window.multiplicity();
    r.s_min = solved.s_min;
    r.tol_crit = opts.tol_crit / std::pow(2.0, policy.refinement);
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(solved.trace_matrix);
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
            r.trace_singular_values.push_back(svd.singularValues()[k]);
            if (svd.singularValues()[k] > r.tol_crit) ++r.trace_rank;
        }
    }
    const double fn = std::sqrt(solved.ops.m_inner(f0, f0));
    const Eigen::VectorXd f = f0 / fn;
    r.lambda0 = f.dot(solved.ops.K * f);

    auto finish = [&](bool growth) {
        r.verdict = classify({r.multiplicity, r.s_min, r.tol_crit, r.min_b, r.tol_b, r.s_q, r.tol_t, growth});
        return r;
    };
    if (r.multiplicity != 4) {
        r.notes.push_back("window multiplicity is " + std::to_string(r.multiplicity));
        return finish(false);
    }

    const ThetaMap theta(solved, f, policy);
    const TraceOperator& tr = theta.reference_trace();
    r.a = tr.trace(f);
    r.b = tr.b_vector(f);
    r.min_b = r.b.cwiseAbs().minCoeff();
    r.tol_b = opts.tol_b_rel * r.b.cwiseAbs().maxCoeff();
    r.tol_t = opts.tol_t_rel * 1.5 * r.min_b;

    std::array<Eigen::VectorXcd, 3> rot;
    for (int i = 0; i < 3; ++i) {
        rot[i] = tr.trace(theta.rotational()[i].projected);
        r.closure.push_back(theta.rotational()[i].closure);
    }
    SubspacePair sub;
    try {
        sub = h_subspaces(r.p, rot, r.b);
    } catch (const Error& e) {
        r.notes.push_back(e.what());
        return finish(false);
    }
    r.angles = sub.angles;
    r.h2_smin = sub.h2_smin;
    r.s_q = quotient_smin(r.b, sub.H1, sub.H2);
    if (!(r.s_min < r.tol_crit) || !(r.min_b > r.tol_b) || !(r.s_q > r.tol_t)) return finish(false);

    const Eigen::MatrixXd proj2 = complement_projector(sub.H2);
    const Eigen::MatrixXd gamma = gamma_matrix(r.b);
    const auto dirs = transverse_directions(r.p, opts.probes, opts.seed);
    r.probes.resize(dirs.size());
    std::vector<std::string> errors(dirs.size());
    parallel_for(dirs.size(), opts.threads, [&](std::size_t k) {
        Probe& pr = r.probes[k];
        pr.v = dirs[k];
        pr.predicted = proj2 * gamma * pr.v;
        try {
            pr.observed = theta_derivative_fd(theta, ConfigTangent::from_real(pr.v), opts.steps, sub.H2,
                                              pr.predicted.norm());
            pr.relative_error = (pr.observed.value - pr.predicted).norm() / pr.predicted.norm();
            pr.growth_ok = true;
            for (std::size_t s = 0; s < opts.steps.size(); ++s) {
                if (pr.observed.growth[s] < 0.5 * r.s_q * opts.steps[s]) pr.growth_ok = false;
            }
        } catch (const Error& e) {
            errors[k] = e.what();
            pr.relative_error = std::numeric_limits<double>::infinity();
        }
    });
    for (std::size_t k = 0; k < errors.size(); ++k) {
        if (!errors[k].empty()) r.notes.push_back("probe " + std::to_string(k) + ": " + errors[k]);
    }
    double scale = 0.0;
    for (const auto& pr : r.probes) scale += pr.predicted.norm();
    r.generic_scale = r.probes.empty() ? 0.0 : scale / static_cast<double>(r.probes.size());

    r.h1_probes.resize(3);
    parallel_for(3, opts.threads, [&](std::size_t i) {
        Probe& pr = r.h1_probes[i];
        pr.v = sub.H1.col(static_cast<Eigen::Index>(i)).normalized();
        pr.predicted = proj2 * gamma * pr.v;
        try {
            pr.observed = theta_derivative_fd(theta, ConfigTangent::from_real(pr.v), opts.steps, sub.H2,
                                              r.generic_scale);
            pr.relative_error = pr.observed.norm / r.generic_scale;
        } catch (const Error& e) {
            pr.relative_error = std::numeric_limits<double>::infinity();
        }
    });

    bool growth = !r.probes.empty();
    for (const auto& pr : r.probes) {
        r.max_probe_error = std::max(r.max_probe_error, pr.relative_error);
        growth = growth && pr.growth_ok && pr.relative_error <= opts.slope_tol;
    }
    for (const auto& pr : r.h1_probes) {
        r.max_h1_ratio = std::max(r.max_h1_ratio, pr.relative_error);
        growth = growth && pr.relative_error <= opts.slope_tol;
    }
    return finish(growth);
}

}  // namespace z2s
