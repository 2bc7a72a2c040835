#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace z2s {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using cplx = std::complex<double>;

inline constexpr double kDefaultSeparationFloor = 1e-3;

double geodesic_distance(const Vec3& a, const Vec3& b);

/// Rotation about the unit axis `omega/|omega|` by angle `|omega|` (Rodrigues).
Mat3 axis_angle_matrix(const Vec3& omega);

/// Ordered branch-point set on the unit sphere.
///
/// Strict configurations hold an even number of at least four points. The
/// calibration constructor also admits the empty set and antipodal-style pairs
/// used by the oracle models.
class Configuration {
public:
    Configuration() = default;

    /// Points are normalized to unit length; throws InvalidConfiguration or
    /// SeparationViolation.
    static Configuration make(std::vector<Vec3> points, double separation_floor = kDefaultSeparationFloor);
    static Configuration calibration(std::vector<Vec3> points,
                                     double separation_floor = kDefaultSeparationFloor);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Vec3& operator[](std::size_t j) const { return points_[j]; }
    const std::vector<Vec3>& points() const { return points_; }
    double separation_floor() const { return floor_; }
    bool is_calibration() const { return calibration_; }
    double min_pairwise_distance() const;

    /// Same validation mode and floor, new points.
    Configuration with_points(std::vector<Vec3> points) const;

private:
    std::vector<Vec3> points_;
    double floor_ = kDefaultSeparationFloor;
    bool calibration_ = false;
};

Configuration regular_tetrahedron();
Configuration antipodal_pair();

class Rotation {
public:
    Rotation() : m_(Mat3::Identity()) {}
    /// Throws InvalidConfiguration unless RᵀR = I and det R = 1 within 1e-12.
    static Rotation from_matrix(const Mat3& m);
    static Rotation from_axis_angle(const Vec3& omega) { return Rotation(axis_angle_matrix(omega)); }

    const Mat3& matrix() const { return m_; }
    Vec3 operator*(const Vec3& x) const { return m_ * x; }
    Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
    Rotation inverse() const { return Rotation(m_.transpose()); }
    Configuration apply(const Configuration& p) const;

private:
    explicit Rotation(const Mat3& m) : m_(m) {}
    Mat3 m_;
};

/// Stereographic chart centred at `center`, projecting from the antipode.
/// z = (x·e1 + i x·e2) / (1 + x·center); round metric is 4|dz|²/(1+|z|²)².
struct StereoChart {
    Vec3 center;
    Vec3 e1;
    Vec3 e2;

    /// Conventional frame: the north-pole frame (x̂, ŷ) parallel transported
    /// along the great circle from the north pole to `p`.
    static StereoChart at(const Vec3& p);
    /// Same centre, frame rotated by `alpha` (z picks up e^{-i alpha}).
    StereoChart rotated(double alpha) const;

    cplx project(const Vec3& x) const;
    Vec3 unproject(cplx z) const;

    /// Ambient tangent vector at the centre <-> chart velocity (factor 1/2 at z = 0).
    cplx velocity_of(const Vec3& tangent) const;
    Vec3 tangent_of(cplx velocity) const;
};

/// Per-point chart velocities, one complex entry per branch point.
struct ConfigTangent {
    std::vector<cplx> v;

    ConfigTangent() = default;
    explicit ConfigTangent(std::size_t n) : v(n, cplx{}) {}
    explicit ConfigTangent(std::vector<cplx> values) : v(std::move(values)) {}

    std::size_t size() const { return v.size(); }
    cplx& operator[](std::size_t j) { return v[j]; }
    cplx operator[](std::size_t j) const { return v[j]; }

    /// (Re v1, Im v1, Re v2, ...).
    Eigen::VectorXd realify() const;
    static ConfigTangent from_real(const Eigen::VectorXd& x);

    ConfigTangent operator*(double s) const;
    ConfigTangent operator+(const ConfigTangent& o) const;
};

/// Unique rotation with R·p1 = north pole and R·p2 in {y = 0, x > 0}.
std::pair<Rotation, Configuration> gauge_fix(const Configuration& p);

/// Chart velocities of every point under the three rotation fields L1, L2, L3.
std::array<ConfigTangent, 3> rotation_generators(const Configuration& p);

ConfigTangent tangent_from_ambient(const Configuration& p, std::span<const Vec3> tangents);
std::vector<Vec3> ambient_from_tangent(const Configuration& p, const ConfigTangent& v);

/// Moves every point along its great circle with initial chart velocity v_j for time t.
Configuration exp_step(const Configuration& p, const ConfigTangent& v, double t);

/// Largest per-point geodesic distance between two equally sized configurations.
double max_point_distance(const Configuration& a, const Configuration& b);

/// Smooth sphere diffeomorphism carrying one configuration onto another.
///
/// Each point's geodesic cap (radius a fraction of the minimal pairwise
/// distance) is rotated rigidly near its centre and blended to the identity at
/// the cap boundary. The equivariant variant first factors out the SO(3) part
/// through gauge fixing, so that a rigidly rotated target yields exactly that
/// rotation.
class SphereDeformation {
public:
    static SphereDeformation identity();
    static SphereDeformation cap_blend(const Configuration& from, const Configuration& to,
                                       double cap_fraction = 1.0 / 3.0);
    static SphereDeformation equivariant(const Configuration& from, const Configuration& to,
                                         double cap_fraction = 1.0 / 3.0);

    Vec3 apply(const Vec3& x) const;
    /// Radius of the rigidly moved core of each cap.
    double rigid_radius() const { return 0.5 * cap_radius_; }
    /// The rotation applied inside the rigid core around source point j.
    Mat3 core_rotation(std::size_t j) const;
    std::size_t point_count() const { return centers_.size(); }

private:
    Mat3 pre_ = Mat3::Identity();
    Mat3 post_ = Mat3::Identity();
    std::vector<Vec3> centers_;
    std::vector<Vec3> omegas_;
    double cap_radius_ = 0.0;
};

}  // namespace z2s
