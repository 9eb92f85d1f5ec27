#pragma once

// Rigid-body plant of the twin-rotor tilt-servo vehicle.
//
// Frames: world is NED (z down), so with zero attitude a positive total
// thrust u1 opposes gravity directly in the vertical equation. A positive
// tilt angle leans the rotor thrust toward the nose (+x).

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "bicopter/attitude_math.hpp"
#include "bicopter/errors.hpp"

namespace bicopter {

enum class FlightMode { testbed, freeflight };

inline const char* to_string(FlightMode m)
{
    return m == FlightMode::testbed ? "testbed" : "freeflight";
}

struct BicopterParams {
    double mass{0.725};            // kg
    double gravity{9.81};          // m/s^2
    double rotor_height{0.042};    // m, vertical CoG to rotor centre (h)
    double arm_length{0.225};      // m, horizontal CoG to rotor centre (L)
    double thrust_coeff{0.1222};   // maps Omega^2 to force
    double ixx{0.116e-3};          // kg m^2
    double iyy{0.0408e-3};
    double izz{0.105e-3};

    void validate() const
    {
        const std::array<std::pair<const char*, double>, 8> fields{{
            {"mass", mass}, {"gravity", gravity}, {"rotor_height", rotor_height},
            {"arm_length", arm_length}, {"thrust_coeff", thrust_coeff},
            {"ixx", ixx}, {"iyy", iyy}, {"izz", izz}}};
        for (const auto& [name, v] : fields) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ConfigError(std::string("params.") + name + " must be positive");
            }
        }
    }

    double weight() const { return mass * gravity; }
};

// Actuator saturation. The thrust coefficient maps Omega^2 directly to
// newtons, so the default speed ceiling gives a thrust-to-weight of ~3.4.
struct ActuatorLimits {
    double omega_max{10.0};           // rad/s
    double tilt_max{deg2rad(45.0)};   // rad

    void validate() const
    {
        if (!(omega_max > 0.0)) throw ConfigError("actuator.omega_max must be positive");
        if (!(tilt_max > 0.0) || tilt_max >= kPi / 2.0) {
            throw ConfigError("actuator.tilt_max must lie in (0, 90) deg");
        }
    }
};

struct ActuatorCommand {
    double omega_right{0.0};  // rad/s
    double omega_left{0.0};
    double tilt_right{0.0};   // rad
    double tilt_left{0.0};
};

struct ControlVector {
    double u1{0.0};  // total thrust, N
    double u2{0.0};  // roll channel
    double u3{0.0};  // pitch channel
    double u4{0.0};  // yaw channel
};

struct BodyForces {
    double fx{0.0};
    double fy{0.0};
    double fz{0.0};
    double thrust_right{0.0};
    double thrust_left{0.0};
};

struct RigidBodyState {
    Eigen::Vector3d position{Eigen::Vector3d::Zero()};  // m, NED
    Eigen::Vector3d velocity{Eigen::Vector3d::Zero()};  // m/s
    EulerAngles attitude{};                             // rad
    Eigen::Vector3d rates{Eigen::Vector3d::Zero()};     // Euler rates, rad/s

    bool finite() const
    {
        return position.allFinite() && velocity.allFinite() && rates.allFinite() &&
               std::isfinite(attitude.roll) && std::isfinite(attitude.pitch) &&
               std::isfinite(attitude.yaw);
    }
};

struct StateDerivative {
    Eigen::Vector3d velocity{Eigen::Vector3d::Zero()};
    Eigen::Vector3d acceleration{Eigen::Vector3d::Zero()};
    Eigen::Vector3d rates{Eigen::Vector3d::Zero()};
    Eigen::Vector3d angular_acceleration{Eigen::Vector3d::Zero()};
};

// External load on the airframe, e.g. wind. Force is world-frame, torque is
// about the body axes.
struct Disturbance {
    Eigen::Vector3d force{Eigen::Vector3d::Zero()};
    Eigen::Vector3d torque{Eigen::Vector3d::Zero()};
};

inline ControlVector control_vector(const ActuatorCommand& cmd, const BicopterParams& p)
{
    const double wr2 = cmd.omega_right * cmd.omega_right;
    const double wl2 = cmd.omega_left * cmd.omega_left;
    const double rc = wr2 * std::cos(cmd.tilt_right);
    const double lc = wl2 * std::cos(cmd.tilt_left);
    const double rs = wr2 * std::sin(cmd.tilt_right);
    const double ls = wl2 * std::sin(cmd.tilt_left);
    return {p.thrust_coeff * (rc + lc), p.thrust_coeff * (rc - lc),
            p.thrust_coeff * (rs + ls), p.thrust_coeff * (rs - ls)};
}

inline BodyForces body_forces(const ActuatorCommand& cmd, const BicopterParams& p)
{
    BodyForces f;
    f.thrust_right = p.thrust_coeff * cmd.omega_right * cmd.omega_right;
    f.thrust_left = p.thrust_coeff * cmd.omega_left * cmd.omega_left;
    f.fx = f.thrust_right * std::sin(cmd.tilt_right) + f.thrust_left * std::sin(cmd.tilt_left);
    f.fy = 0.0;
    f.fz = f.thrust_right * std::cos(cmd.tilt_right) + f.thrust_left * std::cos(cmd.tilt_left);
    return f;
}

struct SaturationFlags {
    bool omega_right{false};
    bool omega_left{false};
    bool tilt_right{false};
    bool tilt_left{false};

    bool any() const { return omega_right || omega_left || tilt_right || tilt_left; }
};

struct Allocation {
    ActuatorCommand command;
    SaturationFlags saturated;
};

// Algebraic inverse of control_vector, followed by saturation to limits.
// Each side sees the force pair (u1 +- u2, u3 +- u4) = 2 C_T Omega^2 (cos, sin).
inline Allocation allocate(const ControlVector& u, const BicopterParams& p,
                           const ActuatorLimits& limits = {})
{
    Allocation out;
    const auto side = [&](double vertical, double horizontal, double& omega, double& tilt,
                          bool& omega_sat, bool& tilt_sat) {
        const double force = std::hypot(vertical, horizontal) / 2.0;
        const double omega_sq = force / p.thrust_coeff;
        omega = std::sqrt(omega_sq);
        tilt = std::atan2(horizontal, vertical);
        if (omega > limits.omega_max) {
            omega = limits.omega_max;
            omega_sat = true;
        }
        // vertical < 0 asks for downward thrust, which lands outside the tilt range
        if (std::abs(tilt) > limits.tilt_max) {
            tilt = std::copysign(limits.tilt_max, tilt);
            tilt_sat = true;
        }
    };
    side(u.u1 + u.u2, u.u3 + u.u4, out.command.omega_right, out.command.tilt_right,
         out.saturated.omega_right, out.saturated.tilt_right);
    side(u.u1 - u.u2, u.u3 - u.u4, out.command.omega_left, out.command.tilt_left,
         out.saturated.omega_left, out.saturated.tilt_left);
    return out;
}

inline ActuatorCommand saturate(const ActuatorCommand& cmd, const ActuatorLimits& limits,
                                SaturationFlags* flags = nullptr)
{
    ActuatorCommand out = cmd;
    SaturationFlags f;
    const auto clamp_into = [](double v, double lo, double hi, bool& hit) {
        if (v < lo) {
            hit = true;
            return lo;
        }
        if (v > hi) {
            hit = true;
            return hi;
        }
        return v;
    };
    out.omega_right = clamp_into(cmd.omega_right, 0.0, limits.omega_max, f.omega_right);
    out.omega_left = clamp_into(cmd.omega_left, 0.0, limits.omega_max, f.omega_left);
    out.tilt_right = clamp_into(cmd.tilt_right, -limits.tilt_max, limits.tilt_max, f.tilt_right);
    out.tilt_left = clamp_into(cmd.tilt_left, -limits.tilt_max, limits.tilt_max, f.tilt_left);
    if (flags != nullptr) {
        *flags = f;
    }
    return out;
}

// Translational and rotational equations of motion, plus an optional
// external load. Rotational channels are decoupled per axis.
inline StateDerivative accelerations(const RigidBodyState& s, const ControlVector& u,
                                     const BicopterParams& p, const Disturbance& d = {})
{
    const double sphi = std::sin(s.attitude.roll), cphi = std::cos(s.attitude.roll);
    const double sth = std::sin(s.attitude.pitch), cth = std::cos(s.attitude.pitch);
    const double spsi = std::sin(s.attitude.yaw), cpsi = std::cos(s.attitude.yaw);
    const double m = p.mass;

    StateDerivative ds;
    ds.velocity = s.velocity;
    ds.rates = s.rates;
    ds.acceleration.x() =
        -(sphi * spsi + cphi * sth * cpsi) * u.u1 / m - (cth * cpsi / m) * u.u3;
    ds.acceleration.y() =
        -(-sphi * cpsi + cphi * sth * spsi) * u.u1 / m + (cth * spsi / m) * u.u3;
    ds.acceleration.z() = p.gravity - (cphi * cth) * u.u1 / m - (sth / m) * u.u3;
    ds.acceleration += d.force / m;

    ds.angular_acceleration.x() = (p.arm_length / p.ixx) * u.u2 + d.torque.x() / p.ixx;
    ds.angular_acceleration.y() = (p.rotor_height / p.iyy) * u.u3 + d.torque.y() / p.iyy;
    ds.angular_acceleration.z() = (p.arm_length / p.izz) * u.u4 + d.torque.z() / p.izz;
    return ds;
}

namespace detail {
using StateVector = Eigen::Matrix<double, 12, 1>;

inline StateVector pack(const RigidBodyState& s)
{
    StateVector v;
    v << s.position, s.velocity, s.attitude.roll, s.attitude.pitch, s.attitude.yaw, s.rates;
    return v;
}

inline RigidBodyState unpack(const StateVector& v)
{
    RigidBodyState s;
    s.position = v.segment<3>(0);
    s.velocity = v.segment<3>(3);
    s.attitude = {v(6), v(7), v(8)};
    s.rates = v.segment<3>(9);
    return s;
}

inline StateVector pack(const StateDerivative& d)
{
    StateVector v;
    v << d.velocity, d.acceleration, d.rates, d.angular_acceleration;
    return v;
}
}  // namespace detail

// One classical RK4 step with the command held over the interval.
// Testbed mode pins the airframe to pure rotation.
inline RigidBodyState step(const RigidBodyState& s, const ActuatorCommand& cmd,
                           const BicopterParams& p, double dt, FlightMode mode,
                           const Disturbance& d = {})
{
    if (!(dt > 0.0)) {
        throw ConfigError("step: dt must be positive");
    }
    const ControlVector u = control_vector(cmd, p);
    const auto f = [&](const detail::StateVector& x) {
        detail::StateVector dx = detail::pack(accelerations(detail::unpack(x), u, p, d));
        if (mode == FlightMode::testbed) {
            dx.head<6>().setZero();
        }
        return dx;
    };
    const detail::StateVector x0 = detail::pack(s);
    const detail::StateVector k1 = f(x0);
    const detail::StateVector k2 = f(x0 + 0.5 * dt * k1);
    const detail::StateVector k3 = f(x0 + 0.5 * dt * k2);
    const detail::StateVector k4 = f(x0 + dt * k3);
    RigidBodyState next = detail::unpack(x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));

    if (!next.finite()) {
        throw DivergenceError(-1);
    }
    if (mode == FlightMode::testbed) {
        next.position.setZero();
        next.velocity.setZero();
    }
    next.attitude.yaw = wrap_angle(next.attitude.yaw);
    return next;
}

// First-order lag on rotor speed and tilt, discretized exactly for a
// piecewise-constant target.
struct ActuatorLag {
    bool enabled{false};
    double tau_omega{0.050};  // s
    double tau_tilt{0.030};   // s

    ActuatorCommand apply(const ActuatorCommand& current, const ActuatorCommand& target,
                          double dt) const
    {
        if (!enabled) {
            return target;
        }
        const double kw = tau_omega > 0.0 ? 1.0 - std::exp(-dt / tau_omega) : 1.0;
        const double kt = tau_tilt > 0.0 ? 1.0 - std::exp(-dt / tau_tilt) : 1.0;
        ActuatorCommand out;
        out.omega_right = current.omega_right + kw * (target.omega_right - current.omega_right);
        out.omega_left = current.omega_left + kw * (target.omega_left - current.omega_left);
        out.tilt_right = current.tilt_right + kt * (target.tilt_right - current.tilt_right);
        out.tilt_left = current.tilt_left + kt * (target.tilt_left - current.tilt_left);
        return out;
    }
};

// Rotor speed at which both rotors together carry the weight at zero tilt.
inline double hover_omega(const BicopterParams& p)
{
    return std::sqrt(p.weight() / (2.0 * p.thrust_coeff));
}

// Euler-angle rates to body angular rates (ZYX kinematics).
inline Eigen::Vector3d euler_rates_to_body(const EulerAngles& a, const Eigen::Vector3d& rates)
{
    const double sphi = std::sin(a.roll), cphi = std::cos(a.roll);
    const double sth = std::sin(a.pitch), cth = std::cos(a.pitch);
    return {rates.x() - sth * rates.z(),
            cphi * rates.y() + sphi * cth * rates.z(),
            -sphi * rates.y() + cphi * cth * rates.z()};
}

}  // namespace bicopter
