#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "z2spectra/errors.hpp"
#include "z2spectra/laplace.hpp"
#include "z2spectra/mesh.hpp"
#include "z2spectra/random.hpp"

using namespace z2s;

namespace {

MeshParams params(double h) {
    MeshParams mp;
    mp.h_target = h;
    return mp;
}

const DiscreteOperatorPair& untwisted_ops() {
    static const DiscreteOperatorPair ops = assemble(build_mesh(Configuration::calibration({}), params(0.05)));
    return ops;
}

Configuration random_four(std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<Vec3> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized());
    return Configuration::make(pts);
}

void check_window_contracts(const DiscreteOperatorPair& ops, const SpectralWindow& w) {
    const Eigen::MatrixXd g = w.vectors.transpose() * ops.M * w.vectors;
    EXPECT_LT((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-10);
    for (int k = 0; k < w.multiplicity(); ++k) {
        const Eigen::VectorXd u = w.vectors.col(k);
        const double rq = u.dot(ops.K * u) / u.dot(ops.M * u);
        EXPECT_LE(std::abs(rq - w.values[k]), 1e-10 * std::max(1.0, std::abs(w.values[k])));
        EXPECT_LE((ops.K * u - w.values[k] * (ops.M * u)).norm(), 1e-10);
        if (k > 0) EXPECT_LE(w.values[k - 1], w.values[k]);
    }
}

}  // namespace

TEST(Assemble, UntwistedInvariants) {
    const auto& ops = untwisted_ops();
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(ops.size());
    EXPECT_LT((ops.K * one).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(one.dot(ops.M * one), 4.0 * std::numbers::pi, 1e-9);
    const SparseMatrix kt = ops.K.transpose();
    EXPECT_EQ((ops.K - kt).norm(), 0.0);
    CounterRng rng(2);
    Eigen::VectorXd x(ops.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
    EXPECT_GT(x.dot(ops.M * x), 0.0);
}

TEST(Assemble, LumpedMassIsDiagonal) {
    AssemblyOptions o;
    o.quadrature = MassQuadrature::OnePoint;
    const auto ops = assemble(build_mesh(Configuration::calibration({}), params(0.2)), o);
    EXPECT_EQ(ops.M.nonZeros(), ops.size());
    EXPECT_NEAR(Eigen::VectorXd::Ones(ops.size()).dot(ops.M * Eigen::VectorXd::Ones(ops.size())),
                4.0 * std::numbers::pi, 1e-9);
}

TEST(Assemble, ThreadCountDoesNotChangeResult) {
    const auto m = build_mesh(regular_tetrahedron(), params(0.15));
    AssemblyOptions one, four;
    four.threads = 4;
    const auto a = assemble(m, one);
    const auto b = assemble(m, four);
    EXPECT_EQ((a.K - b.K).norm(), 0.0);
    EXPECT_EQ((a.M - b.M).norm(), 0.0);
}

TEST(Solve, UntwistedLowestIsConstant) {
    const auto& ops = untwisted_ops();
    const auto w = solve_lowest(ops, 1);
    ASSERT_EQ(w.multiplicity(), 1);
    EXPECT_NEAR(w.values[0], 0.0, 1e-10);
    const Eigen::VectorXd u = w.vectors.col(0);
    EXPECT_LT((u.array() - u.mean()).abs().maxCoeff(), 1e-8);
    check_window_contracts(ops, w);
}

TEST(Solve, SphericalHarmonicOracle) {
    const auto& ops = untwisted_ops();
    for (int l : {1, 2}) {
        const auto [lambda, mult] = oracle::sphere_level(l);
        const auto w = solve_window(ops, lambda, 0.2 * lambda);
        ASSERT_EQ(w.multiplicity(), mult);
        for (double v : w.values) EXPECT_NEAR(v, lambda, 0.01 * lambda);
        check_window_contracts(ops, w);
    }
}

TEST(Solve, EmptyWindow) {
    const auto w = solve_window(untwisted_ops(), 4.0, 0.5);
    EXPECT_EQ(w.multiplicity(), 0);
}

TEST(Solve, TooManyRequested) {
    const auto ops = assemble(build_mesh(Configuration::calibration({}), params(1.0)));
    EXPECT_THROW(solve_lowest(ops, static_cast<int>(ops.size()) + 1), Error);
}

TEST(Solve, AntipodalShootingOracle) {
    const double exact = oracle::antipodal_lowest();
    EXPECT_NEAR(exact, 0.75, 1e-8);
    const auto ops = assemble(build_mesh(antipodal_pair(), params(0.05)));
    const auto w = solve_lowest(ops, 3);
    EXPECT_NEAR(w.values[0], exact, 0.01 * exact);
    EXPECT_NEAR(w.values[1], exact, 0.01 * exact);
    EXPECT_GT(w.values[2], 1.1 * exact);
    EXPECT_GT(w.values[0], 0.0);
    const auto win = solve_window(ops, exact, 0.2);
    EXPECT_EQ(win.multiplicity(), 2);
    check_window_contracts(ops, win);
}

TEST(Solve, CutGaugeInvariance) {
    const auto p = random_four(41);
    const auto m = build_mesh(p, params(0.1));
    const auto pairings = admissible_pairings(p);
    ASSERT_GE(pairings.size(), 2u);
    const auto m2 = with_cuts(m, cuts_from_pairing(p, pairings[1]));
    const auto a = solve_lowest(assemble(m), 6);
    const auto b = solve_lowest(assemble(m2), 6);
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(a.values[k], b.values[k], 1e-10 * a.values[k]);
}

TEST(Solve, RotationInvariance) {
    const auto p = random_four(43);
    CounterRng rng(44);
    const Rotation r = Rotation::from_axis_angle(Vec3(rng.normal(), rng.normal(), rng.normal()));
    const auto a = solve_lowest(assemble(build_mesh(p, params(0.1))), 4);
    const auto b = solve_lowest(assemble(build_mesh(r.apply(p), params(0.1))), 4);
    const auto fine = solve_lowest(assemble(refine(build_mesh(p, params(0.1)))), 4);
    for (int k = 0; k < 4; ++k) {
        const double disc = std::abs(a.values[k] - fine.values[k]);
        EXPECT_LE(std::abs(a.values[k] - b.values[k]), std::max(disc, 1e-6));
    }
}

TEST(Solve, Deterministic) {
    const auto ops = assemble(build_mesh(regular_tetrahedron(), params(0.15)));
    SolverOptions o;
    o.seed = 5;
    const auto a = solve_lowest(ops, 4, o);
    const auto b = solve_lowest(ops, 4, o);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ((a.vectors - b.vectors).norm(), 0.0);
}
