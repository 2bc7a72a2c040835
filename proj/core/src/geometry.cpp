#include "z2spectra/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "z2spectra/errors.hpp"

namespace z2s {

namespace {

const Vec3 kNorth{0.0, 0.0, 1.0};

void validate_points(std::vector<Vec3>& pts, double floor, bool calibration) {
    if (pts.size() % 2 != 0) {
        throw Error(ErrorCode::InvalidConfiguration,
                    "configuration must hold an even number of points, got " + std::to_string(pts.size()));
    }
    if (!calibration && pts.size() < 4) {
        throw Error(ErrorCode::InvalidConfiguration, "configuration needs at least four points");
    }
    if (!(floor > 0.0)) throw Error(ErrorCode::InvalidConfiguration, "separation floor must be positive");
    for (auto& x : pts) {
        const double n = x.norm();
        if (!std::isfinite(n) || n < 1e-12) {
            throw Error(ErrorCode::InvalidConfiguration, "configuration point is zero or not finite");
        }
        x /= n;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if (geodesic_distance(pts[i], pts[j]) <= floor) {
                throw Error(ErrorCode::SeparationViolation,
                            "points " + std::to_string(i) + " and " + std::to_string(j) +
                                " are closer than the separation floor");
            }
        }
    }
}

double smoother_step(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

}  // namespace

double geodesic_distance(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

Mat3 axis_angle_matrix(const Vec3& omega) {
    const double theta = omega.norm();
    Mat3 k;
    k << 0.0, -omega.z(), omega.y(), omega.z(), 0.0, -omega.x(), -omega.y(), omega.x(), 0.0;
    if (theta < 1e-8) {
        // Second-order series keeps the map smooth through zero.
        return Mat3::Identity() + k + 0.5 * k * k;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * k + b * k * k;
}

// ---------------------------------------------------------------- Configuration

Configuration Configuration::make(std::vector<Vec3> points, double separation_floor) {
    validate_points(points, separation_floor, false);
    Configuration c;
    c.points_ = std::move(points);
    c.floor_ = separation_floor;
    return c;
}

Configuration Configuration::calibration(std::vector<Vec3> points, double separation_floor) {
    validate_points(points, separation_floor, true);
    Configuration c;
    c.points_ = std::move(points);
    c.floor_ = separation_floor;
    c.calibration_ = true;
    return c;
}

Configuration Configuration::with_points(std::vector<Vec3> points) const {
    return calibration_ ? calibration(std::move(points), floor_) : make(std::move(points), floor_);
}

double Configuration::min_pairwise_distance() const {
    double d = std::numbers::pi;
    for (std::size_t i = 0; i < points_.size(); ++i)
        for (std::size_t j = i + 1; j < points_.size(); ++j)
            d = std::min(d, geodesic_distance(points_[i], points_[j]));
    return d;
}

Configuration regular_tetrahedron() {
    const double s = 1.0 / std::sqrt(3.0);
    return Configuration::make({Vec3{s, s, s}, Vec3{s, -s, -s}, Vec3{-s, s, -s}, Vec3{-s, -s, s}});
}

Configuration antipodal_pair() {
    return Configuration::calibration({Vec3{0, 0, 1}, Vec3{0, 0, -1}});
}

// ---------------------------------------------------------------- Rotation

Rotation Rotation::from_matrix(const Mat3& m) {
    const double orth = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-12 || std::abs(m.determinant() - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidConfiguration, "matrix is not a rotation");
    }
    return Rotation(m);
}

Configuration Rotation::apply(const Configuration& p) const {
    std::vector<Vec3> q;
    q.reserve(p.size());
    for (const auto& x : p.points()) q.push_back(m_ * x);
    return p.with_points(std::move(q));
}

// ---------------------------------------------------------------- charts

StereoChart StereoChart::at(const Vec3& p) {
    const Vec3 c = p.normalized();
    Mat3 r;
    if ((c - (-kNorth)).norm() < 1e-6) {
        // Meridian through (1,0,0), then snap the frame to the tangent plane.
        r = axis_angle_matrix(Vec3{0.0, geodesic_distance(kNorth, c), 0.0});
    } else {
        const Vec3 axis = kNorth.cross(c);
        const double s = axis.norm();
        r = (s < 1e-300) ? Mat3::Identity() : axis_angle_matrix(axis / s * std::atan2(s, c.z()));
    }
    Vec3 e1 = r.col(0);
    e1 = (e1 - e1.dot(c) * c).normalized();
    const Vec3 e2 = c.cross(e1);
    return StereoChart{c, e1, e2};
}

StereoChart StereoChart::rotated(double alpha) const {
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    return StereoChart{center, ca * e1 + sa * e2, -sa * e1 + ca * e2};
}

cplx StereoChart::project(const Vec3& x) const {
    const double denom = 1.0 + x.dot(center);
    if (denom < 1e-12) throw Error(ErrorCode::AntipodalPoint, "point is antipodal to the chart centre");
    return cplx{x.dot(e1), x.dot(e2)} / denom;
}

Vec3 StereoChart::unproject(cplx z) const {
    const double r2 = std::norm(z);
    return (2.0 * z.real() * e1 + 2.0 * z.imag() * e2 + (1.0 - r2) * center) / (1.0 + r2);
}

cplx StereoChart::velocity_of(const Vec3& tangent) const {
    return 0.5 * cplx{tangent.dot(e1), tangent.dot(e2)};
}

Vec3 StereoChart::tangent_of(cplx velocity) const {
    return 2.0 * (velocity.real() * e1 + velocity.imag() * e2);
}

// ---------------------------------------------------------------- tangents

Eigen::VectorXd ConfigTangent::realify() const {
    Eigen::VectorXd x(2 * v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        x[2 * j] = v[j].real();
        x[2 * j + 1] = v[j].imag();
    }
    return x;
}

ConfigTangent ConfigTangent::from_real(const Eigen::VectorXd& x) {
    ConfigTangent t(static_cast<std::size_t>(x.size() / 2));
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = cplx{x[2 * j], x[2 * j + 1]};
    return t;
}

ConfigTangent ConfigTangent::operator*(double s) const {
    ConfigTangent r = *this;
    for (auto& c : r.v) c *= s;
    return r;
}

ConfigTangent ConfigTangent::operator+(const ConfigTangent& o) const {
    if (o.size() != size()) throw Error(ErrorCode::DimensionMismatch, "tangent sizes differ");
    ConfigTangent r = *this;
    for (std::size_t j = 0; j < size(); ++j) r[j] += o[j];
    return r;
}

std::pair<Rotation, Configuration> gauge_fix(const Configuration& p) {
    if (p.size() < 2) throw Error(ErrorCode::InvalidConfiguration, "gauge fixing needs two points");
    const Vec3& p1 = p[0];
    const Vec3& p2 = p[1];
    Vec3 u = p2 - p2.dot(p1) * p1;
    if (u.norm() < 1e-9) throw Error(ErrorCode::AntipodalPair, "first two points are antipodal");
    u.normalize();
    const Vec3 w = p1.cross(u);
    Mat3 r;
    r.row(0) = u.transpose();
    r.row(1) = w.transpose();
    r.row(2) = p1.transpose();
    // Re-orthonormalize through the polar factor to keep RᵀR = I at round-off.
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
    const Rotation rot = Rotation::from_matrix(r);
    std::vector<Vec3> q;
    q.reserve(p.size());
    for (const auto& x : p.points()) q.push_back(r * x);
    q[0] = kNorth;
    q[1] = Vec3{std::sqrt(std::max(0.0, 1.0 - q[1].z() * q[1].z())), 0.0, q[1].z()};
    return {rot, p.with_points(std::move(q))};
}

std::array<ConfigTangent, 3> rotation_generators(const Configuration& p) {
    std::array<ConfigTangent, 3> gens{ConfigTangent(p.size()), ConfigTangent(p.size()), ConfigTangent(p.size())};
    for (std::size_t j = 0; j < p.size(); ++j) {
        const StereoChart chart = StereoChart::at(p[j]);
        for (int i = 0; i < 3; ++i) {
            gens[i][j] = chart.velocity_of(Vec3::Unit(i).cross(p[j]));
        }
    }
    return gens;
}

ConfigTangent tangent_from_ambient(const Configuration& p, std::span<const Vec3> tangents) {
    if (tangents.size() != p.size()) throw Error(ErrorCode::DimensionMismatch, "tangent count mismatch");
    ConfigTangent v(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        const Vec3 t = tangents[j] - tangents[j].dot(p[j]) * p[j];
        v[j] = StereoChart::at(p[j]).velocity_of(t);
    }
    return v;
}

std::vector<Vec3> ambient_from_tangent(const Configuration& p, const ConfigTangent& v) {
    if (v.size() != p.size()) throw Error(ErrorCode::DimensionMismatch, "tangent count mismatch");
    std::vector<Vec3> out;
    out.reserve(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) out.push_back(StereoChart::at(p[j]).tangent_of(v[j]));
    return out;
}

Configuration exp_step(const Configuration& p, const ConfigTangent& v, double t) {
    const auto u = ambient_from_tangent(p, v);
    std::vector<Vec3> q;
    q.reserve(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double speed = u[j].norm();
        const double s = speed * t;
        if (speed == 0.0 || s == 0.0) {
            q.push_back(p[j]);
            continue;
        }
        q.push_back((std::cos(s) * p[j] + std::sin(s) * (u[j] / speed)).normalized());
    }
    return p.with_points(std::move(q));
}

double max_point_distance(const Configuration& a, const Configuration& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "configuration sizes differ");
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, geodesic_distance(a[j], b[j]));
    return d;
}

// ---------------------------------------------------------------- deformations

SphereDeformation SphereDeformation::identity() { return SphereDeformation{}; }

SphereDeformation SphereDeformation::cap_blend(const Configuration& from, const Configuration& to,
                                               double cap_fraction) {
    if (from.size() != to.size()) throw Error(ErrorCode::DimensionMismatch, "configuration sizes differ");
    SphereDeformation d;
    d.centers_ = from.points();
    d.cap_radius_ = from.size() >= 2 ? cap_fraction * from.min_pairwise_distance() : 0.0;
    d.omegas_.reserve(from.size());
    for (std::size_t j = 0; j < from.size(); ++j) {
        const Vec3 axis = from[j].cross(to[j]);
        const double s = axis.norm();
        const double angle = std::atan2(s, from[j].dot(to[j]));
        d.omegas_.push_back(s < 1e-300 ? Vec3::Zero() : Vec3(axis * (angle / s)));
    }
    return d;
}

SphereDeformation SphereDeformation::equivariant(const Configuration& from, const Configuration& to,
                                                 double cap_fraction) {
    const auto [r_from, q_from] = gauge_fix(from);
    const auto [r_to, q_to] = gauge_fix(to);
    SphereDeformation d = cap_blend(q_from, q_to, cap_fraction);
    d.pre_ = r_from.matrix();
    d.post_ = r_to.matrix().transpose();
    return d;
}

Mat3 SphereDeformation::core_rotation(std::size_t j) const {
    if (centers_.empty()) return post_ * pre_;
    return post_ * axis_angle_matrix(omegas_.at(j)) * pre_;
}

Vec3 SphereDeformation::apply(const Vec3& x) const {
    Vec3 y = pre_ * x;
    for (std::size_t j = 0; j < centers_.size(); ++j) {
        const double dist = geodesic_distance(y, centers_[j]);
        if (dist >= cap_radius_) continue;
        const double s = dist / cap_radius_;
        const double weight = s <= 0.5 ? 1.0 : 1.0 - smoother_step((s - 0.5) / 0.5);
        y = axis_angle_matrix(weight * omegas_[j]) * y;
        break;
    }
    return (post_ * y).normalized();
}

}  // namespace z2s
