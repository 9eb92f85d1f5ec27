#pragma once

// Reference computations for the tests. None of these call into the code
// they check: rotations go through Eigen, filters and controllers are
// written out longhand.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "bicopter/attitude_math.hpp"

namespace oracle {

template <class Rng>
bicopter::Quaternion random_unit_quaternion(Rng& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector4d v;
    do {
        v = {n(rng), n(rng), n(rng), n(rng)};
    } while (v.norm() < 1e-6);
    v.normalize();
    return {v(0), v(1), v(2), v(3)};
}

inline Eigen::Matrix3d matrix(const bicopter::Quaternion& q)
{
    return Eigen::Quaterniond(q.w, q.x, q.y, q.z).toRotationMatrix();
}

// R^T (0, 0, 1)
inline Eigen::Vector3d gravity_in_body(const bicopter::Quaternion& q)
{
    return matrix(q).transpose() * Eigen::Vector3d::UnitZ();
}

inline bicopter::EulerAngles euler_from_matrix(const bicopter::Quaternion& q)
{
    const Eigen::Matrix3d r = matrix(q);
    return {std::atan2(r(2, 1), r(2, 2)), -std::asin(std::clamp(r(2, 0), -1.0, 1.0)),
            std::atan2(r(1, 0), r(0, 0))};
}

inline Eigen::Matrix3d zyx_matrix(const bicopter::EulerAngles& e)
{
    return (Eigen::AngleAxisd(e.yaw, Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(e.pitch, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(e.roll, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

// Discrete PID written as explicit sums over the whole history.
inline std::vector<double> pid_reference(const std::vector<double>& e, double kp, double ki,
                                         double kd, double period)
{
    std::vector<double> out(e.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        sum += e[k];
        const double prev = k == 0 ? 0.0 : e[k - 1];
        out[k] = kp * e[k] + ki * period * sum + kd * (e[k] - prev) / period;
    }
    return out;
}

// Continuous PID on e(t) = sin(w t): Kp sin + Ki (1 - cos)/w + Kd w cos.
inline double pid_continuous_sine(double t, double w, double kp, double ki, double kd)
{
    return kp * std::sin(w * t) + ki * (1.0 - std::cos(w * t)) / w + kd * w * std::cos(w * t);
}

}  // namespace oracle
