#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "z2spectra/errors.hpp"
#include "z2spectra/expansion.hpp"
#include "z2spectra/laplace.hpp"
#include "z2spectra/mesh.hpp"

using namespace z2s;

namespace {

MeshParams params(double h) {
    MeshParams mp;
    mp.h_target = h;
    return mp;
}

AnnulusLift analytic_lift(cplx a, cplx b, double base, int samples, const std::vector<double>& radii) {
    AnnulusLift l;
    l.branch = 0;
    l.radii = radii;
    l.base_angle = base;
    l.values.resize(static_cast<Eigen::Index>(radii.size()), 2 * samples);
    for (int s = 0; s < 2 * samples; ++s) l.angles.push_back(base + 2.0 * std::numbers::pi * (s + 0.5) / samples);
    for (std::size_t k = 0; k < radii.size(); ++k) {
        for (int s = 0; s < 2 * samples; ++s) {
            const double r = radii[k], t = l.angles[s];
            l.values(static_cast<Eigen::Index>(k), s) =
                (a * std::polar(std::sqrt(r), 0.5 * t) + b * std::polar(std::pow(r, 1.5), 1.5 * t)).real();
        }
    }
    return l;
}

struct Antipodal {
    TwistedMesh mesh;
    DiscreteOperatorPair ops;
    SpectralWindow w;
};

const Antipodal& antipodal() {
    static const Antipodal a = [] {
        Antipodal x;
        x.mesh = build_mesh(antipodal_pair(), params(0.07));
        x.ops = assemble(x.mesh);
        x.w = solve_lowest(x.ops, 2);
        return x;
    }();
    return a;
}

}  // namespace

TEST(Expansion, SyntheticRecovery) {
    const cplx a0(1.0, 2.0), b0(0.0, -3.0);
    const auto lift = analytic_lift(a0, b0, 0.7, 128, {0.04, 0.06, 0.09, 0.135});
    const auto e = extract_coeffs(lift);
    EXPECT_LT(std::abs(e.a - a0), 1e-8);
    EXPECT_LT(std::abs(e.b - b0), 1e-8);
    EXPECT_LT(e.residual, 1e-10);
}

TEST(Expansion, SyntheticBaseShiftFlipsSign) {
    const cplx a0(0.3, -1.0), b0(2.0, 0.5);
    const auto l1 = analytic_lift(a0, b0, 0.2, 96, {0.05, 0.08, 0.12});
    auto l2 = l1;
    for (auto& t : l2.angles) t += 2.0 * std::numbers::pi;
    const auto e1 = extract_coeffs(l1);
    const auto e2 = extract_coeffs(l2);
    EXPECT_LT(std::abs(e1.a + e2.a), 1e-10);
    EXPECT_LT(std::abs(e1.b + e2.b), 1e-10);
}

TEST(Expansion, SyntheticPoorFit) {
    auto lift = analytic_lift(1.0, 1.0, 0.0, 128, {0.04, 0.06, 0.09, 0.135});
    lift.values.row(2) *= 3.0;
    EXPECT_THROW(extract_coeffs(lift), Error);
    try {
        extract_coeffs(lift);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PoorFit);
    }
}

TEST(Expansion, Preconditions) {
    const auto& a = antipodal();
    const Configuration p = antipodal_pair();
    ExpansionOptions o;
    o.samples = 32;
    EXPECT_THROW(TraceOperator(a.mesh, a.ops, p, o), Error);
    o = {};
    o.radii = {0.05, 0.1};
    EXPECT_THROW(TraceOperator(a.mesh, a.ops, p, o), Error);
    // Two close points: the outer annulus would reach the neighbour.
    const Configuration q = Configuration::make({Vec3(0, 0, 1), Vec3(0.2, 0, 1), Vec3(0, 0, -1), Vec3(1, 0, 0)});
    const auto mq = build_mesh(q, params(0.2));
    const auto oq = assemble(mq);
    try {
        TraceOperator(mq, oq, q, ExpansionOptions{});
        ADD_FAILURE() << "expected LiftPrecondition";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LiftPrecondition);
    }
}

TEST(Expansion, AntipodalLiftIsSmooth) {
    const auto& a = antipodal();
    const TraceOperator tr(a.mesh, a.ops, antipodal_pair());
    for (int k = 0; k < 2; ++k) {
        const Eigen::VectorXd u = a.w.vectors.col(k);
        for (int j = 0; j < 2; ++j) {
            const auto lift = tr.lift(u, j);
            EXPECT_LT(lift.high_frequency_share, 1e-3);
            const auto e = tr.expand(u, j);
            const auto e2 = extract_coeffs(lift);
            EXPECT_LT(std::abs(e.a - e2.a), 1e-10 * std::max(1.0, std::abs(e.a)));
            EXPECT_GT(std::abs(e.a), 1e-3);
        }
    }
}

// The lowest antipodal eigenspace is spanned by y(θ)cos(φ/2), y(θ)sin(φ/2) on
// the double cover, so |a| agrees at both poles for every unit vector in it
// and the realified trace matrix has full rank 2.
TEST(Expansion, AntipodalTraceMatrix) {
    const auto& a = antipodal();
    const TraceOperator tr(a.mesh, a.ops, antipodal_pair());
    const Eigen::MatrixXd t = tr.trace_matrix(a.w.vectors);
    ASSERT_EQ(t.rows(), 4);
    ASSERT_EQ(t.cols(), 2);
    EXPECT_GT(criticality_gap(t), 1e-2);
    for (int k = 0; k < 2; ++k) {
        const auto c = complexify(t.col(k));
        EXPECT_NEAR(std::abs(c[0]), std::abs(c[1]), 0.02 * std::abs(c[0]));
    }
    // Rotating inside the eigenspace rotates the phase of a by half the angle.
    const Eigen::VectorXcd c0 = complexify(t.col(0)), c1 = complexify(t.col(1));
    EXPECT_NEAR(std::abs(c0[0]), std::abs(c1[0]), 0.02 * std::abs(c0[0]));
}

TEST(Expansion, AlternateCutsPreserveModuli) {
    const Configuration p = Configuration::make(
        {Vec3(0, 0, 1), Vec3(1, 0, 0.2), Vec3(-0.5, 0.8, -0.3), Vec3(-0.3, -0.9, -0.4)});
    const auto m = build_mesh(p, params(0.08));
    const auto pairings = admissible_pairings(p);
    ASSERT_GE(pairings.size(), 2u);
    const auto m2 = with_cuts(m, cuts_from_pairing(p, pairings[1]));
    const auto o1 = assemble(m), o2 = assemble(m2);
    const auto w1 = solve_lowest(o1, 1), w2 = solve_lowest(o2, 1);
    const TraceOperator t1(m, o1, p), t2(m2, o2, p);
    for (int j = 0; j < 4; ++j) {
        const auto e1 = t1.expand(w1.vectors.col(0), j);
        const auto e2 = t2.expand(w2.vectors.col(0), j);
        EXPECT_NEAR(std::abs(e1.a), std::abs(e2.a), 1e-6 * std::max(1.0, std::abs(e1.a)));
        EXPECT_NEAR(std::abs(e1.b), std::abs(e2.b), 1e-6 * std::max(1.0, std::abs(e1.b)));
    }
}

TEST(Expansion, FrameRotationPhase) {
    const auto& a = antipodal();
    const Configuration p = antipodal_pair();
    const TraceOperator base(a.mesh, a.ops, p);
    ExpansionOptions o;
    o.frame_angles = {0.4, -0.3};
    o.reference_base_angles = {base.base_angles()[0] - 0.4, base.base_angles()[1] + 0.3};
    const TraceOperator rot(a.mesh, a.ops, p, o);
    const Eigen::VectorXd u = a.w.vectors.col(0);
    for (int j = 0; j < 2; ++j) {
        const auto e0 = base.expand(u, j);
        const auto e1 = rot.expand(u, j);
        // z' = e^{-iα} z, so a' = a e^{iα/2} and b' = b e^{3iα/2}.
        const double alpha = o.frame_angles[j];
        EXPECT_LT(std::abs(e1.a - e0.a * std::polar(1.0, 0.5 * alpha)), 0.02 * std::abs(e0.a));
        EXPECT_LT(std::abs(e1.b - e0.b * std::polar(1.0, 1.5 * alpha)), 0.05 * std::abs(e0.b) + 1e-3 * std::abs(e0.a));
    }
}

TEST(Expansion, RadiusRobustness) {
    const auto& a = antipodal();
    const Configuration p = antipodal_pair();
    const TraceOperator t1(a.mesh, a.ops, p);
    ExpansionOptions o;
    o.radii = {0.05, 0.075, 0.11, 0.16};
    o.reference_base_angles = t1.base_angles();
    const TraceOperator t2(a.mesh, a.ops, p, o);
    const Eigen::VectorXd u = a.w.vectors.col(0);
    for (int j = 0; j < 2; ++j) {
        const cplx x = t1.expand(u, j).a, y = t2.expand(u, j).a;
        EXPECT_LT(std::abs(x - y), 0.02 * std::abs(x));
    }
}
