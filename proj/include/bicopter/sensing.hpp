#pragma once

// Simulated IMU and the two attitude estimators: a complementary filter that
// low-passes accelerometer tilt against integrated gyro rate, and a
// quaternion filter that propagates on the gyro and nudges predicted gravity
// toward the measured specific force.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "bicopter/attitude_math.hpp"
#include "bicopter/dynamics.hpp"
#include "bicopter/errors.hpp"

namespace bicopter {

struct ImuSample {
    Eigen::Vector3d accel{0.0, 0.0, 1.0};      // specific force, g (level at rest reads +1 on z)
    Eigen::Vector3d gyro{Eigen::Vector3d::Zero()};  // body rates, deg/s
    double t{0.0};                             // s
};

struct NoiseModel {
    double accel_std{0.02};   // g
    double gyro_std{0.3};     // deg/s
    Eigen::Vector3d accel_bias{Eigen::Vector3d::Zero()};  // g
    Eigen::Vector3d gyro_bias{Eigen::Vector3d::Zero()};   // deg/s
    std::uint64_t seed{1};
    double accel_range{2.0};    // +-g full scale
    double gyro_range{250.0};   // +-deg/s full scale

    static NoiseModel none()
    {
        NoiseModel n;
        n.accel_std = 0.0;
        n.gyro_std = 0.0;
        return n;
    }
};

inline double alpha_from_cutoff(double cutoff_hz, double dt)
{
    if (!(cutoff_hz > 0.0) || !(dt > 0.0)) {
        throw ConfigError("alpha_from_cutoff: cutoff and sampling period must be positive");
    }
    const double rc = 1.0 / (2.0 * kPi * cutoff_hz);
    return dt / (rc + dt);
}

struct FilterConfig {
    double cutoff_hz{5.0};
    double dt{0.0028};

    double alpha() const { return alpha_from_cutoff(cutoff_hz, dt); }
};

// y_i = a x_i + (1 - a) y_{i-1}
inline double lpf_step(double x, double y_prev, double alpha)
{
    return alpha * x + (1.0 - alpha) * y_prev;
}

// y_i = a y_{i-1} + a (x_i - x_{i-1})
inline double hpf_step(double x, double x_prev, double y_prev, double alpha)
{
    return alpha * y_prev + alpha * (x - x_prev);
}

class LowPassFilter {
public:
    explicit LowPassFilter(double alpha, double initial = 0.0) : alpha_(alpha), y_(initial) {}

    double update(double x)
    {
        y_ = lpf_step(x, y_, alpha_);
        return y_;
    }
    double value() const { return y_; }

private:
    double alpha_;
    double y_;
};

class HighPassFilter {
public:
    explicit HighPassFilter(double alpha) : alpha_(alpha) {}

    // The first sample only primes the input memory.
    double update(double x)
    {
        if (!primed_) {
            x_prev_ = x;
            primed_ = true;
            return y_;
        }
        y_ = hpf_step(x, x_prev_, y_, alpha_);
        x_prev_ = x;
        return y_;
    }
    double value() const { return y_; }

private:
    double alpha_;
    double x_prev_{0.0};
    double y_{0.0};
    bool primed_{false};
};

struct TiltAngles {
    double roll{0.0};
    double pitch{0.0};
};

// Tilt from the gravity direction; free-fall frames carry no tilt information.
inline TiltAngles accel_to_angles(const Eigen::Vector3d& accel)
{
    if (!(accel.norm() > 0.1)) {
        throw AttitudeError("unreliable tilt");
    }
    return {std::atan2(accel.y(), accel.z()),
            std::atan2(-accel.x(), std::hypot(accel.y(), accel.z()))};
}

struct EstimatorState {
    EulerAngles fused{};
    Quaternion q{};

    static EstimatorState at(const EulerAngles& attitude)
    {
        return {attitude, euler_to_quat(attitude)};
    }
};

inline EulerAngles clamp_to_ranges(EulerAngles e)
{
    e.roll = wrap_angle(e.roll);
    e.pitch = std::clamp(e.pitch, -kPi / 2.0, kPi / 2.0);
    e.yaw = wrap_angle(e.yaw);
    return e;
}

// fused <- (1 - a)(fused + gyro dt) + a * accel_angle on roll and pitch;
// yaw has no absolute reference and integrates the gyro alone.
inline EstimatorState cf_update(const EstimatorState& state, const ImuSample& sample,
                                double alpha, double dt)
{
    const double a = alpha;
    const Eigen::Vector3d rates = sample.gyro * kDegToRad;
    EstimatorState next = state;

    const double roll_gyro = state.fused.roll + rates.x() * dt;
    const double pitch_gyro = state.fused.pitch + rates.y() * dt;
    if (sample.accel.norm() > 0.1) {
        const TiltAngles tilt = accel_to_angles(sample.accel);
        next.fused.roll = (1.0 - a) * roll_gyro + a * tilt.roll;
        next.fused.pitch = (1.0 - a) * pitch_gyro + a * tilt.pitch;
    } else {
        next.fused.roll = roll_gyro;
        next.fused.pitch = pitch_gyro;
    }
    next.fused.yaw = state.fused.yaw + rates.z() * dt;
    next.fused = clamp_to_ranges(next.fused);
    next.q = euler_to_quat(next.fused);
    return next;
}

inline EstimatorState cf_update(const EstimatorState& state, const ImuSample& sample,
                                const FilterConfig& cfg)
{
    return cf_update(state, sample, cfg.alpha(), cfg.dt);
}

inline EstimatorState quat_fuse_update(const EstimatorState& state, const ImuSample& sample,
                                       double gain, double dt)
{
    if (gain < 0.0 || gain > 1.0) {
        throw ConfigError("quaternion fusion gain must lie in [0, 1]");
    }
    EstimatorState next = state;
    next.q = integrate_gyro(state.q, sample.gyro * kDegToRad, dt);

    const double accel_norm = sample.accel.norm();
    if (gain > 0.0 && accel_norm > 0.1) {
        const Eigen::Vector3d predicted = quat_to_gravity(next.q).vec();
        const Eigen::Vector3d measured = sample.accel / accel_norm;
        const Eigen::Vector3d axis = predicted.cross(measured);
        const double s = axis.norm();
        if (s > 1e-12) {
            const double angle = std::atan2(s, predicted.dot(measured));
            // Right-multiplying by Rot(n, -b) turns body gravity by +b about n.
            next.q = normalize(next.q * quat_from_rotation_vector(-gain * angle * axis / s));
        }
    }
    next.fused = quat_to_euler(next.q).angles;
    return next;
}

// Body-frame specific force in g (gravity minus kinematic acceleration) and
// body rates in deg/s, with bias, Gaussian noise and full-scale clipping.
template <class Rng>
ImuSample simulate_imu(const RigidBodyState& s, const StateDerivative& deriv,
                       const NoiseModel& noise, double gravity, double t, Rng& rng)
{
    const Quaternion q = euler_to_quat(s.attitude);
    const Eigen::Vector3d world{-deriv.acceleration.x(), -deriv.acceleration.y(),
                                gravity - deriv.acceleration.z()};
    const Eigen::Vector3d specific_force = rotate(q.conjugate(), world) / gravity;
    const Eigen::Vector3d body_rates = euler_rates_to_body(s.attitude, s.rates) * kRadToDeg;

    std::normal_distribution<double> unit(0.0, 1.0);
    ImuSample sample;
    sample.t = t;
    for (int i = 0; i < 3; ++i) {
        const double a = specific_force(i) + noise.accel_bias(i) + noise.accel_std * unit(rng);
        sample.accel(i) = std::clamp(a, -noise.accel_range, noise.accel_range);
    }
    for (int i = 0; i < 3; ++i) {
        const double g = body_rates(i) + noise.gyro_bias(i) + noise.gyro_std * unit(rng);
        sample.gyro(i) = std::clamp(g, -noise.gyro_range, noise.gyro_range);
    }
    return sample;
}

enum class EstimatorKind { complementary, quaternion, truth };

// Owns estimator state and dispatches on the configured kind.
class AttitudeEstimator {
public:
    AttitudeEstimator(EstimatorKind kind, FilterConfig filter, double fusion_gain)
        : kind_(kind), filter_(filter), fusion_gain_(fusion_gain)
    {
    }

    void reset(const EulerAngles& attitude) { state_ = EstimatorState::at(attitude); }

    const EulerAngles& update(const ImuSample& sample, const EulerAngles& truth)
    {
        switch (kind_) {
        case EstimatorKind::complementary:
            state_ = cf_update(state_, sample, filter_);
            break;
        case EstimatorKind::quaternion:
            state_ = quat_fuse_update(state_, sample, fusion_gain_, filter_.dt);
            break;
        case EstimatorKind::truth:
            state_ = EstimatorState::at(truth);
            break;
        }
        return state_.fused;
    }

    const EstimatorState& state() const { return state_; }
    EstimatorKind kind() const { return kind_; }

private:
    EstimatorKind kind_;
    FilterConfig filter_;
    double fusion_gain_;
    EstimatorState state_{};
};

}  // namespace bicopter
