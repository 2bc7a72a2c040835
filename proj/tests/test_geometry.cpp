#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "z2spectra/errors.hpp"
#include "z2spectra/geometry.hpp"
#include "z2spectra/random.hpp"

using namespace z2s;

namespace {

Vec3 random_unit(CounterRng& rng) {
    Vec3 x{rng.normal(), rng.normal(), rng.normal()};
    return x.normalized();
}

Rotation random_rotation(CounterRng& rng) {
    return Rotation::from_axis_angle(random_unit(rng) * (std::numbers::pi * rng.uniform()));
}

Configuration random_config(CounterRng& rng, int n) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back(random_unit(rng));
    return Configuration::make(pts);
}

}  // namespace

TEST(Configuration, RejectsOddAndSmallAndClose) {
    EXPECT_THROW(Configuration::make({Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}), Error);
    EXPECT_THROW(Configuration::make({Vec3::UnitX(), -Vec3::UnitX()}), Error);
    try {
        Configuration::make({Vec3::UnitX(), Vec3(1, 1e-4, 0), Vec3::UnitY(), Vec3::UnitZ()});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SeparationViolation);
    }
}

TEST(Configuration, NormalizesPoints) {
    const auto p = Configuration::make({Vec3(2, 0, 0), Vec3(0, 3, 0), Vec3(0, 0, 4), Vec3(-1, -1, -1)});
    for (const auto& x : p.points()) EXPECT_NEAR(x.norm(), 1.0, 1e-12);
}

TEST(StereoChart, ProjectsNorthFrameOracle) {
    const auto chart = StereoChart::at(Vec3::UnitZ());
    EXPECT_NEAR(std::abs(chart.project(Vec3::UnitZ())), 0.0, 1e-15);
    const cplx z = chart.project(Vec3::UnitX());
    // (x1 + i x2) / (1 + x3) at the equator point (1, 0, 0).
    EXPECT_NEAR(z.real(), 1.0, 1e-15);
    EXPECT_NEAR(z.imag(), 0.0, 1e-15);
    EXPECT_NEAR(chart.unproject(cplx{1.0, 0.0}).dot(chart.center), 0.0, 1e-12);
    EXPECT_LT((chart.unproject(cplx{1e8, 0.0}) + chart.center).norm(), 1e-7);
}

TEST(StereoChart, MetricFactorByPullback) {
    // |dx|² = 4|dz|²/(1+|z|²)² checked with finite differences in z.
    const auto chart = StereoChart::at(Vec3(0.3, -0.4, 0.8).normalized());
    for (cplx z : {cplx{0.2, 0.1}, cplx{-0.7, 0.5}, cplx{1.3, -0.2}}) {
        const double h = 1e-6;
        const Vec3 dx = (chart.unproject(z + h) - chart.unproject(z - h)) / (2 * h);
        const Vec3 dy = (chart.unproject(z + cplx{0, h}) - chart.unproject(z - cplx{0, h})) / (2 * h);
        const double factor = 4.0 / std::pow(1.0 + std::norm(z), 2);
        EXPECT_NEAR(dx.squaredNorm(), factor, 1e-8);
        EXPECT_NEAR(dy.squaredNorm(), factor, 1e-8);
        EXPECT_NEAR(dx.dot(dy), 0.0, 1e-8);
    }
}

TEST(StereoChart, RoundTrip) {
    CounterRng rng(7);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto chart = StereoChart::at(random_unit(rng));
        Vec3 x = random_unit(rng);
        if (x.dot(chart.center) < -0.99) x = -x;
        worst = std::max(worst, (chart.unproject(chart.project(x)) - x).norm());
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(StereoChart, FrameOrientationAndSouthPole) {
    CounterRng rng(3);
    for (int i = 0; i < 50; ++i) {
        const auto c = StereoChart::at(random_unit(rng));
        EXPECT_NEAR(c.e1.dot(c.center), 0.0, 1e-14);
        EXPECT_NEAR((c.e1.cross(c.e2) - c.center).norm(), 0.0, 1e-14);
    }
    const auto s = StereoChart::at(-Vec3::UnitZ());
    EXPECT_NEAR((s.e1.cross(s.e2) - s.center).norm(), 0.0, 1e-14);
    EXPECT_THROW(s.project(Vec3::UnitZ()), Error);
}

TEST(StereoChart, PhaseCovariance) {
    const auto c = StereoChart::at(Vec3(1, 2, 3).normalized());
    const double alpha = 0.7;
    const auto r = c.rotated(alpha);
    const Vec3 x = Vec3(1.2, 2.1, 2.9).normalized();
    const cplx expected = c.project(x) * std::polar(1.0, -alpha);
    EXPECT_NEAR(std::abs(r.project(x) - expected), 0.0, 1e-14);
    const Vec3 t = c.e1 * 0.3 - c.e2 * 0.8;
    EXPECT_NEAR(std::abs(r.velocity_of(t) - c.velocity_of(t) * std::polar(1.0, -alpha)), 0.0, 1e-14);
}

TEST(GaugeFix, NormalFormAndUniqueness) {
    CounterRng rng(11);
    const auto p = random_config(rng, 6);
    const auto [r, q] = gauge_fix(p);
    EXPECT_NEAR((q[0] - Vec3::UnitZ()).norm(), 0.0, 1e-12);
    EXPECT_NEAR(q[1].y(), 0.0, 1e-12);
    EXPECT_GT(q[1].x(), 0.0);
    const auto [r2, q2] = gauge_fix(q);
    EXPECT_LT((r2.matrix() - Mat3::Identity()).norm(), 1e-12);
    const Rotation s = random_rotation(rng);
    const auto [r3, q3] = gauge_fix(s.apply(q));
    EXPECT_LT((r3.matrix() - s.inverse().matrix()).norm(), 1e-10);
    EXPECT_LT(max_point_distance(q3, q), 1e-10);
}

TEST(GaugeFix, AntipodalPairRejected) {
    const auto p = Configuration::make({Vec3::UnitZ(), -Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()});
    try {
        gauge_fix(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AntipodalPair);
    }
}

TEST(RotationGenerators, NorthPoleEntries) {
    const auto p = Configuration::make({Vec3::UnitZ(), Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY()});
    const auto gens = rotation_generators(p);
    // Differentiating (x1 + i x2)/(1 + x3) along e1 × north = (0, -1, 0).
    EXPECT_NEAR(std::abs(gens[0][0] - cplx{0.0, -0.5}), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(gens[2][0]), 0.0, 1e-15);
}

TEST(RotationGenerators, FiniteDifference) {
    CounterRng rng(5);
    const auto p = random_config(rng, 4);
    const auto gens = rotation_generators(p);
    const double t = 1e-5;
    for (int i = 0; i < 3; ++i) {
        const Mat3 rot = axis_angle_matrix(Vec3::Unit(i) * t);
        for (std::size_t j = 0; j < p.size(); ++j) {
            const cplx fd = StereoChart::at(p[j]).project(rot * p[j]) / t;
            EXPECT_LT(std::abs(fd - gens[i][j]), 1e-4);
        }
    }
}

TEST(RotationGenerators, Equivariance) {
    CounterRng rng(9);
    const auto p = random_config(rng, 4);
    const Rotation r = random_rotation(rng);
    const auto rp = r.apply(p);
    const auto g = rotation_generators(p);
    const auto gr = rotation_generators(rp);
    // L_i at R·p is R-conjugate of the generator R⁻¹ e_i at p.
    for (int i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            const Vec3 ambient = Vec3::Unit(i).cross(rp[j]);
            const Vec3 pulled = r.inverse() * ambient;
            // Express in the transported frame R·(frame at p_j).
            const auto c = StereoChart::at(p[j]);
            const auto cr = StereoChart::at(rp[j]);
            const cplx in_transported = 0.5 * cplx{pulled.dot(c.e1), pulled.dot(c.e2)};
            const Vec3 re1 = r * c.e1;
            const double phase = std::atan2(re1.dot(cr.e2), re1.dot(cr.e1));
            EXPECT_LT(std::abs(gr[i][j] - in_transported * std::polar(1.0, phase)), 1e-10);
        }
    }
    (void)g;
}

TEST(ExpStep, TrivialCases) {
    CounterRng rng(13);
    const auto p = random_config(rng, 4);
    ConfigTangent v(4);
    for (std::size_t j = 0; j < 4; ++j) v[j] = cplx{rng.normal(), rng.normal()};
    EXPECT_EQ(max_point_distance(exp_step(p, v, 0.0), p), 0.0);
    EXPECT_EQ(max_point_distance(exp_step(p, ConfigTangent(4), 0.3), p), 0.0);
}

TEST(ExpStep, SecondOrderAgainstChart) {
    CounterRng rng(17);
    const auto p = random_config(rng, 4);
    ConfigTangent v(4);
    for (std::size_t j = 0; j < 4; ++j) v[j] = cplx{rng.normal(), rng.normal()};
    for (double t : {1e-2, 1e-3}) {
        const auto q = exp_step(p, v, t);
        for (std::size_t j = 0; j < 4; ++j) {
            const Vec3 chart_point = StereoChart::at(p[j]).unproject(t * v[j]);
            EXPECT_LT(geodesic_distance(q[j], chart_point), 20.0 * t * t);
        }
    }
}

TEST(SphereDeformation, MapsConfigurationAndIsEquivariant) {
    CounterRng rng(21);
    const auto p = regular_tetrahedron();
    ConfigTangent v(4);
    for (std::size_t j = 0; j < 4; ++j) v[j] = cplx{rng.normal(), rng.normal()};
    const auto q = exp_step(p, v, 0.02);
    const auto phi = SphereDeformation::equivariant(p, q);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_LT((phi.apply(p[j]) - q[j]).norm(), 1e-12);
    const Rotation r = random_rotation(rng);
    const auto rot = SphereDeformation::equivariant(p, r.apply(p));
    for (int i = 0; i < 20; ++i) {
        const Vec3 x = random_unit(rng);
        EXPECT_LT((rot.apply(x) - r * x).norm(), 1e-12);
    }
    const auto id = SphereDeformation::equivariant(p, p);
    const Vec3 x = random_unit(rng);
    EXPECT_LT((id.apply(x) - x).norm(), 1e-14);
}
