#pragma once

// Quaternion and Euler-angle algebra shared by the estimator, the plant
// integrator and the scenario harness.
//
// Conventions:
//  - quaternions are stored (w, x, y, z) and rotate body vectors into the
//    world frame (q * v_body * q^-1 = v_world);
//  - Euler angles are the ZYX (yaw, pitch, roll) decomposition, radians;
//  - world frame is NED, so gravity points along +z.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "bicopter/errors.hpp"

namespace bicopter {

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

inline constexpr double deg2rad(double deg) { return deg * kDegToRad; }
inline constexpr double rad2deg(double rad) { return rad * kRadToDeg; }

struct Quaternion {
    double w{1.0};
    double x{0.0};
    double y{0.0};
    double z{0.0};

    double squared_norm() const { return w * w + x * x + y * y + z * z; }
    double norm() const { return std::sqrt(squared_norm()); }

    Quaternion conjugate() const { return {w, -x, -y, -z}; }
    Quaternion operator-() const { return {-w, -x, -y, -z}; }

    friend Quaternion operator*(const Quaternion& a, const Quaternion& b)
    {
        return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
                a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
    }
};

struct EulerAngles {
    double roll{0.0};   // phi, about body x
    double pitch{0.0};  // theta, about body y
    double yaw{0.0};    // psi, about world z
};

// Unit direction of gravity expressed in the body frame.
struct GravityVector {
    double x{0.0};
    double y{0.0};
    double z{1.0};

    Eigen::Vector3d vec() const { return {x, y, z}; }
};

struct EulerResult {
    EulerAngles angles;
    bool gimbal_lock{false};
};

// Tolerance used to decide whether a quaternion is "unit" on entry to the
// conversions. Loose enough for single renormalization round-off.
constexpr double kUnitNormTolerance = 1e-6;
constexpr double kGimbalLockMargin = 1e-6;

inline Quaternion normalize(const Quaternion& q)
{
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw AttitudeError("degenerate quaternion");
    }
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

namespace detail {
inline void require_unit(const Quaternion& q)
{
    if (std::abs(q.squared_norm() - 1.0) > kUnitNormTolerance) {
        throw AttitudeError("quaternion is not unit norm (|q|^2 = " +
                            std::to_string(q.squared_norm()) + ")");
    }
}
}  // namespace detail

// Body-frame gravity direction: third row of R(q), i.e. R(q)^T * (0, 0, 1).
inline GravityVector quat_to_gravity(const Quaternion& q)
{
    detail::require_unit(q);
    return {2.0 * (q.x * q.z - q.w * q.y),
            2.0 * (q.y * q.z + q.w * q.x),
            q.w * q.w - q.x * q.x - q.y * q.y + q.z * q.z};
}

// Wraps to (-pi, pi].
inline double wrap_angle(double a)
{
    if (a > -kPi && a <= kPi) {
        return a;
    }
    constexpr double two_pi = 2.0 * kPi;
    double r = std::fmod(a + kPi, two_pi);
    if (r < 0.0) {
        r += two_pi;
    }
    r -= kPi;
    if (r <= -kPi) {
        r = kPi;
    }
    return r;
}

// ZYX decomposition. Near pitch = +-90 deg roll is pinned to zero and the
// combined heading is reported as yaw with the gimbal_lock flag raised.
inline EulerResult quat_to_euler(const Quaternion& q)
{
    detail::require_unit(q);
    EulerResult out;
    const double sin_pitch = std::clamp(2.0 * (q.w * q.y - q.x * q.z), -1.0, 1.0);
    const double pitch = std::asin(sin_pitch);

    if (kPi / 2.0 - std::abs(pitch) < kGimbalLockMargin) {
        out.gimbal_lock = true;
        out.angles.roll = 0.0;
        out.angles.pitch = std::copysign(kPi / 2.0, sin_pitch);
        const double yaw = sin_pitch > 0.0 ? 2.0 * std::atan2(-q.x, q.w)
                                           : 2.0 * std::atan2(q.x, q.w);
        out.angles.yaw = wrap_angle(yaw);
        return out;
    }

    out.angles.roll = std::atan2(2.0 * (q.w * q.x + q.y * q.z),
                                 1.0 - 2.0 * (q.x * q.x + q.y * q.y));
    out.angles.pitch = pitch;
    out.angles.yaw = std::atan2(2.0 * (q.w * q.z + q.x * q.y),
                                1.0 - 2.0 * (q.y * q.y + q.z * q.z));
    // atan2 returns [-pi, pi]; fold -pi onto pi to keep the half-open range.
    out.angles.roll = wrap_angle(out.angles.roll);
    out.angles.yaw = wrap_angle(out.angles.yaw);
    return out;
}

inline Quaternion euler_to_quat(const EulerAngles& e)
{
    const double cr = std::cos(e.roll / 2.0);
    const double sr = std::sin(e.roll / 2.0);
    const double cp = std::cos(e.pitch / 2.0);
    const double sp = std::sin(e.pitch / 2.0);
    const double cy = std::cos(e.yaw / 2.0);
    const double sy = std::sin(e.yaw / 2.0);
    return {cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy};
}

// Rotation of angle |v| about axis v/|v|.
inline Quaternion quat_from_rotation_vector(const Eigen::Vector3d& v)
{
    const double angle = v.norm();
    if (angle < 1e-12) {
        // second-order small-angle form keeps the result unit to round-off
        return normalize({1.0, v.x() / 2.0, v.y() / 2.0, v.z() / 2.0});
    }
    const double s = std::sin(angle / 2.0) / angle;
    return {std::cos(angle / 2.0), v.x() * s, v.y() * s, v.z() * s};
}

// Exact axis-angle propagation for a rate vector held constant over dt.
// Rates are body-frame, so the increment is applied on the right.
inline Quaternion integrate_gyro(const Quaternion& q, const Eigen::Vector3d& body_rates,
                                 double dt)
{
    if (!(dt > 0.0)) {
        throw AttitudeError("integrate_gyro: dt must be positive");
    }
    return normalize(q * quat_from_rotation_vector(body_rates * dt));
}

// Rotates a body vector into the world frame.
inline Eigen::Vector3d rotate(const Quaternion& q, const Eigen::Vector3d& v)
{
    const Quaternion p{0.0, v.x(), v.y(), v.z()};
    const Quaternion r = q * p * q.conjugate();
    return {r.x, r.y, r.z};
}

// Smallest angle between the rotations represented by a and b (sign-agnostic).
inline double rotation_distance(const Quaternion& a, const Quaternion& b)
{
    const Quaternion d = a.conjugate() * b;
    const double vec = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
    return 2.0 * std::atan2(vec, std::abs(d.w));
}

}  // namespace bicopter
