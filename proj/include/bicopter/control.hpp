#pragma once

// Discrete PID attitude/altitude control and the bicopter mixer.
//
// Attitude controllers work on errors in degrees, which is the scale the
// stock gain tables were tuned at. Their outputs are in controller units and
// are converted to normalized throttle / servo radians by OutputScaling just
// before the mixer.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "bicopter/attitude_math.hpp"
#include "bicopter/dynamics.hpp"
#include "bicopter/errors.hpp"

namespace bicopter {

enum class Axis { roll = 0, pitch = 1, yaw = 2, altitude = 3 };

inline const char* to_string(Axis a)
{
    switch (a) {
    case Axis::roll: return "roll";
    case Axis::pitch: return "pitch";
    case Axis::yaw: return "yaw";
    case Axis::altitude: return "altitude";
    }
    return "?";
}

inline Axis axis_from_string(std::string_view s)
{
    if (s == "roll") return Axis::roll;
    if (s == "pitch") return Axis::pitch;
    if (s == "yaw") return Axis::yaw;
    if (s == "altitude") return Axis::altitude;
    throw ConfigError("unknown axis '" + std::string(s) + "'");
}

struct PidGains {
    double kp{0.0};
    double ki{0.0};
    double kd{0.0};

    void validate() const
    {
        if (!(kp >= 0.0) || !(ki >= 0.0) || !(kd >= 0.0)) {
            throw ConfigError("PID gains must be non-negative");
        }
    }

    friend bool operator==(const PidGains&, const PidGains&) = default;
};

struct GainSet {
    PidGains roll;
    PidGains pitch;
    PidGains yaw;
    PidGains altitude{0.11, 0.02, 0.09};

    PidGains& operator[](Axis a)
    {
        switch (a) {
        case Axis::roll: return roll;
        case Axis::pitch: return pitch;
        case Axis::yaw: return yaw;
        default: return altitude;
        }
    }
    const PidGains& operator[](Axis a) const { return const_cast<GainSet&>(*this)[a]; }

    // Gains tuned on the gimballed test rig.
    static GainSet testbed()
    {
        GainSet g;
        g.roll = {3.3, 0.030, 23.0};
        g.pitch = {3.3, 0.030, 23.0};
        g.yaw = {6.8, 0.045, 0.0};
        return g;
    }

    // Gains tuned for untethered indoor flight.
    static GainSet flight()
    {
        GainSet g;
        g.roll = {1.3, 0.030, 20.0};
        g.pitch = {1.3, 0.108, 12.0};
        g.yaw = {0.1, 0.010, 16.0};
        return g;
    }

    static GainSet preset(std::string_view name)
    {
        if (name == "testbed") return testbed();
        if (name == "flight") return flight();
        throw ConfigError("unknown gain preset '" + std::string(name) + "'");
    }
};

struct PidState {
    double error_sum{0.0};
    double prev_error{0.0};
    double prev_measurement{0.0};
    bool has_measurement{false};
    double period{0.0028};  // s

    void reset()
    {
        error_sum = 0.0;
        prev_error = 0.0;
        prev_measurement = 0.0;
        has_measurement = false;
    }
};

// u(k) = Kp e(k) + Ki T sum_0^k e + Kd (e(k) - e(k-1)) / T
inline double pid_step(double error, const PidGains& g, PidState& s)
{
    s.error_sum += error;
    const double out = g.kp * error + g.ki * s.period * s.error_sum +
                      g.kd * (error - s.prev_error) / s.period;
    s.prev_error = error;
    return out;
}

// e = measured - reference; yaw error takes the short way round.
inline double attitude_error(double measured, double reference, Axis axis)
{
    const double e = measured - reference;
    return axis == Axis::yaw ? wrap_angle(e) : e;
}

inline double roll_loop(double measured, double reference, const PidGains& g, PidState& s)
{
    return pid_step(rad2deg(attitude_error(measured, reference, Axis::roll)), g, s);
}

inline double pitch_loop(double measured, double reference, const PidGains& g, PidState& s)
{
    return pid_step(rad2deg(attitude_error(measured, reference, Axis::pitch)), g, s);
}

inline double yaw_loop(double measured, double reference, const PidGains& g, PidState& s)
{
    return pid_step(rad2deg(attitude_error(measured, reference, Axis::yaw)), g, s);
}

// Altitude hold on NED z (m). A positive error means the vehicle sits below
// the reference, so a positive output adds throttle. Disabled on the rig.
inline double altitude_loop(double measured_z, double reference_z, const PidGains& g,
                            PidState& s, FlightMode mode)
{
    if (mode == FlightMode::testbed) {
        return 0.0;
    }
    return pid_step(measured_z - reference_z, g, s);
}

struct PidOptions {
    // Bound on |Ki T sum(e)| in controller output units.
    double integral_limit{std::numeric_limits<double>::infinity()};
    bool derivative_on_measurement{false};
};

// Stateful controller with anti-windup and an optional derivative-on-
// measurement path. With both options at their defaults it reproduces
// pid_step bit for bit.
class PidController {
public:
    PidController() = default;
    PidController(PidGains gains, double period, PidOptions options = {})
        : gains_(gains), options_(options)
    {
        gains_.validate();
        if (!(period > 0.0)) {
            throw ConfigError("PID period must be positive");
        }
        state_.period = period;
    }

    // error and measurement share units; measurement only feeds the
    // derivative-on-measurement path.
    double update(double error, double measurement)
    {
        PidState& s = state_;
        s.error_sum += error;
        if (gains_.ki > 0.0 && std::isfinite(options_.integral_limit)) {
            const double max_sum = options_.integral_limit / (gains_.ki * s.period);
            s.error_sum = std::clamp(s.error_sum, -max_sum, max_sum);
        }
        double delta = error - s.prev_error;
        if (options_.derivative_on_measurement) {
            delta = s.has_measurement ? measurement - s.prev_measurement : 0.0;
        }
        // same evaluation order as pid_step
        const double out =
            gains_.kp * error + gains_.ki * s.period * s.error_sum + gains_.kd * delta / s.period;
        s.prev_error = error;
        s.prev_measurement = measurement;
        s.has_measurement = true;
        return out;
    }

    void set_gains(const PidGains& g, bool reset_state = false)
    {
        g.validate();
        gains_ = g;
        if (reset_state) {
            state_.reset();
        }
    }
    void reset() { state_.reset(); }

    const PidGains& gains() const { return gains_; }
    const PidState& state() const { return state_; }
    const PidOptions& options() const { return options_; }

private:
    PidGains gains_{};
    PidOptions options_{};
    PidState state_{};
};

struct Setpoints {
    double roll{0.0};           // rad
    double pitch{0.0};          // rad
    double yaw{0.0};            // rad
    double altitude{0.0};       // NED z, m
    double throttle_base{0.5};  // normalized
    double center_servo{0.0};   // rad
};

// Controller units -> actuator units.
struct OutputScaling {
    double throttle_per_unit{2.0e-7};   // roll output -> normalized throttle
    double servo_rad_per_unit{2.0e-6};  // pitch/yaw output -> servo rad
};

// Per-axis loop outputs already expressed in actuator units.
struct MixerInput {
    double roll{0.0};      // throttle
    double pitch{0.0};     // servo rad
    double yaw{0.0};       // servo rad
    double altitude{0.0};  // throttle
};

inline MixerInput scale_outputs(double roll, double pitch, double yaw, double altitude,
                                const OutputScaling& k)
{
    return {roll * k.throttle_per_unit, pitch * k.servo_rad_per_unit,
            yaw * k.servo_rad_per_unit, altitude};
}

enum SaturationBit : unsigned {
    kSatThrottleRight = 1u << 0,
    kSatThrottleLeft = 1u << 1,
    kSatServoRight = 1u << 2,
    kSatServoLeft = 1u << 3,
};

struct MixerOutput {
    double throttle_right{0.0};  // [0, 1]
    double throttle_left{0.0};
    double servo_right{0.0};     // rad
    double servo_left{0.0};
    unsigned saturation{0};
};

// Roll is differential throttle about the base; pitch is common servo
// deflection about CenterServo; yaw is differential servo deflection.
// Servo angles are measured with positive = thrust leaning aft.
inline MixerOutput mixer(const MixerInput& in, const Setpoints& sp, const ActuatorLimits& limits)
{
    MixerOutput out;
    const double thr_r = sp.throttle_base + in.altitude - in.roll;
    const double thr_l = sp.throttle_base + in.altitude + in.roll;
    const double srv_r = sp.center_servo + in.pitch + in.yaw;
    const double srv_l = sp.center_servo + in.pitch - in.yaw;

    const auto clamp_flag = [&out](double v, double lo, double hi, unsigned bit) {
        if (v < lo || v > hi) {
            out.saturation |= bit;
        }
        return std::clamp(v, lo, hi);
    };
    out.throttle_right = clamp_flag(thr_r, 0.0, 1.0, kSatThrottleRight);
    out.throttle_left = clamp_flag(thr_l, 0.0, 1.0, kSatThrottleLeft);
    out.servo_right = clamp_flag(srv_r, -limits.tilt_max, limits.tilt_max, kSatServoRight);
    out.servo_left = clamp_flag(srv_l, -limits.tilt_max, limits.tilt_max, kSatServoLeft);
    return out;
}

inline double throttle_to_omega(double throttle, double omega_max)
{
    if (!(throttle >= 0.0 && throttle <= 1.0)) {
        throw ConfigError("throttle must lie in [0, 1]");
    }
    return throttle * omega_max;
}

// Throttle at which the rotors together carry the vehicle weight.
inline double hover_throttle(const BicopterParams& p, const ActuatorLimits& limits)
{
    return hover_omega(p) / limits.omega_max;
}

// Mixer output -> rotor speed and tilt. An aft-leaning servo is a negative
// tilt in the plant's nose-positive convention.
inline ActuatorCommand actuator_command(const MixerOutput& m, const ActuatorLimits& limits)
{
    return {throttle_to_omega(m.throttle_right, limits.omega_max),
            throttle_to_omega(m.throttle_left, limits.omega_max), -m.servo_right,
            -m.servo_left};
}

}  // namespace bicopter
