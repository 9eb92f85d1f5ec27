#pragma once

// PD gain synthesis by pole placement on the per-axis double integrator
// b / s^2, plus the closed-loop step response used to check a design.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "bicopter/control.hpp"
#include "bicopter/dynamics.hpp"
#include "bicopter/errors.hpp"

namespace bicopter {

struct DoubleIntegratorPlant {
    double gain{1.0};  // rad/s^2 per unit input

    // x1 = angle, x2 = rate: x' = A x + B u.
    Eigen::Matrix2d a() const { return (Eigen::Matrix2d() << 0.0, 1.0, 0.0, 0.0).finished(); }
    Eigen::Vector2d b() const { return {0.0, gain}; }
};

inline DoubleIntegratorPlant plant_from_params(const BicopterParams& p, Axis axis)
{
    switch (axis) {
    case Axis::roll: return {p.arm_length / p.ixx};
    case Axis::pitch: return {p.rotor_height / p.iyy};
    case Axis::yaw: return {p.arm_length / p.izz};
    default: break;
    }
    throw ConfigError("no attitude plant for the altitude axis");
}

// Monic second-order polynomial s^2 + c1 s + c0.
struct DesiredCharacteristic {
    double c1{0.0};
    double c0{0.0};

    static DesiredCharacteristic from_damping(double zeta, double omega_n)
    {
        if (!(zeta > 0.0) || !(omega_n > 0.0)) {
            throw ConfigError("damping ratio and natural frequency must be positive");
        }
        return {2.0 * zeta * omega_n, omega_n * omega_n};
    }
    static DesiredCharacteristic from_coefficients(double c1, double c0) { return {c1, c0}; }

    bool hurwitz() const { return c1 > 0.0 && c0 > 0.0; }
};

struct PdGains {
    double kp{0.0};
    double kd{0.0};
};

inline PdGains gains_from_characteristic(const DoubleIntegratorPlant& plant,
                                         const DesiredCharacteristic& want)
{
    if (!(plant.gain > 0.0)) {
        throw ConfigError("plant gain must be positive");
    }
    if (!want.hurwitz()) {
        throw ConfigError("target characteristic polynomial is not Hurwitz");
    }
    return {want.c0 / plant.gain, want.c1 / plant.gain};
}

// Closed-loop denominator read off the CLTF (b Kd s + b Kp) / (s^2 + b Kd s + b Kp).
inline DesiredCharacteristic char_poly_from_gains(const DoubleIntegratorPlant& plant, double kp,
                                                  double kd)
{
    return {plant.gain * kd, plant.gain * kp};
}

// Same polynomial by the state-feedback route: det(sI - (A - B K)) with
// K = [Kp Kd], expanded as s^2 - tr(A_cl) s + det(A_cl).
inline DesiredCharacteristic char_poly_state_feedback(const DoubleIntegratorPlant& plant,
                                                      double kp, double kd)
{
    const Eigen::RowVector2d k{kp, kd};
    const Eigen::Matrix2d closed = plant.a() - plant.b() * k;
    return {-closed.trace(), closed.determinant()};
}

// Roots of s^2 + c1 s + c0. Real roots use the cancellation-free form.
inline std::array<std::complex<double>, 2> poles(double c1, double c0)
{
    const double disc = c1 * c1 - 4.0 * c0;
    if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        if (c1 == 0.0 && c0 == 0.0) {
            return {std::complex<double>{0.0}, std::complex<double>{0.0}};
        }
        const double q = -0.5 * (c1 + std::copysign(sq, c1 == 0.0 ? 1.0 : c1));
        std::array<double, 2> r{q, c0 / q};
        if (r[0] > r[1]) std::swap(r[0], r[1]);
        return {std::complex<double>{r[1]}, std::complex<double>{r[0]}};
    }
    const double re = -c1 / 2.0;
    const double im = std::sqrt(-disc) / 2.0;
    return {std::complex<double>{re, im}, std::complex<double>{re, -im}};
}

struct StepSample {
    double t{0.0};
    double y{0.0};
};

// Unit-step response of the PD closed loop, including its zero at -Kp/Kd,
// by partial fractions over distinct (real or complex) or repeated poles.
inline std::vector<StepSample> cltf_step_response(const DoubleIntegratorPlant& plant, double kp,
                                                  double kd, double duration, double dt)
{
    if (!(dt > 0.0) || !(duration >= 0.0)) {
        throw ConfigError("step response needs dt > 0 and duration >= 0");
    }
    const auto [c1, c0] = char_poly_from_gains(plant, kp, kd);
    if (!(c1 > 0.0 && c0 > 0.0)) {
        throw ConfigError("closed loop is not asymptotically stable");
    }
    using C = std::complex<double>;
    const auto [p1, p2] = poles(c1, c0);
    const auto num = [&](C s) { return c1 * s + c0; };  // b Kd s + b Kp

    const auto count = static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
    std::vector<StepSample> out;
    out.reserve(count);

    const bool repeated = std::abs(p1 - p2) < 1e-9 * std::max(1.0, std::abs(p1));
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) * dt;
        double y = 0.0;
        if (repeated) {
            // Y(s) = N(s) / (s (s - p)^2)
            const double p = 0.5 * (p1.real() + p2.real());
            const double np = c1 * p + c0;
            const double b = np / p;
            const double a = (c1 * p - np) / (p * p);
            y = 1.0 + (a + b * t) * std::exp(p * t);
        } else {
            const C r1 = num(p1) / (p1 * (p1 - p2));
            const C r2 = num(p2) / (p2 * (p2 - p1));
            y = 1.0 + (r1 * std::exp(p1 * t) + r2 * std::exp(p2 * t)).real();
        }
        out.push_back({t, y});
    }
    return out;
}

// Time-domain cross-check: RK4 on the controllable canonical realization
// x1' = x2, x2' = -c0 x1 - c1 x2 + r, y = c0 x1 + c1 x2, unit step r.
inline std::vector<StepSample> simulate_step_response(const DoubleIntegratorPlant& plant,
                                                      double kp, double kd, double duration,
                                                      double dt)
{
    const auto [c1, c0] = char_poly_from_gains(plant, kp, kd);
    const auto f = [&](const Eigen::Vector2d& x) {
        return Eigen::Vector2d{x(1), -c0 * x(0) - c1 * x(1) + 1.0};
    };
    const auto count = static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
    std::vector<StepSample> out;
    out.reserve(count);
    Eigen::Vector2d x = Eigen::Vector2d::Zero();
    for (std::size_t k = 0; k < count; ++k) {
        out.push_back({static_cast<double>(k) * dt, c0 * x(0) + c1 * x(1)});
        const Eigen::Vector2d k1 = f(x);
        const Eigen::Vector2d k2 = f(x + 0.5 * dt * k1);
        const Eigen::Vector2d k3 = f(x + 0.5 * dt * k2);
        const Eigen::Vector2d k4 = f(x + dt * k3);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return out;
}

}  // namespace bicopter
