#pragma once

// Fan-wind disturbance: steady mean along a direction plus Ornstein-Uhlenbeck
// gusts on each world axis, turned into a quadratic drag force.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "bicopter/dynamics.hpp"
#include "bicopter/errors.hpp"

namespace bicopter {

constexpr double kKnotToMps = 0.514444;
constexpr double kAirDensity = 1.225;  // kg/m^3

struct WindSpec {
    double speed_knots{0.0};
    Eigen::Vector3d direction{1.0, 0.0, 0.0};  // world frame, head-on by default
    double gust_std{0.0};                       // m/s per axis
    double gust_correlation_time{1.0};          // s
    double drag_area{0.02};                     // C_d * A, m^2

    double mean_speed() const { return speed_knots * kKnotToMps; }

    void validate() const
    {
        if (!(speed_knots >= 0.0)) throw ConfigError("wind.speed_knots must be >= 0");
        if (!(gust_std >= 0.0)) throw ConfigError("wind.gust_std must be >= 0");
        if (!(gust_correlation_time > 0.0)) {
            throw ConfigError("wind.gust_correlation_time must be positive");
        }
        if (!(drag_area >= 0.0)) throw ConfigError("wind.drag_area must be >= 0");
        if (!(direction.norm() > 0.0)) throw ConfigError("wind.direction must be non-zero");
    }
};

// F = 1/2 rho CdA |v| v
inline Eigen::Vector3d drag_force(const Eigen::Vector3d& air_velocity, double drag_area)
{
    return 0.5 * kAirDensity * drag_area * air_velocity.norm() * air_velocity;
}

// Force for a given gust perturbation (world frame, m/s).
inline Eigen::Vector3d wind_force(const WindSpec& spec, const Eigen::Vector3d& gust)
{
    const Eigen::Vector3d v = spec.mean_speed() * spec.direction.normalized() + gust;
    return drag_force(v, spec.drag_area);
}

// A wind force acting at the rotor plane, h above the rig pivot, loads the
// airframe with a torque r x F where r = (0, 0, -h) in NED.
inline Eigen::Vector3d rig_torque(const Eigen::Vector3d& force, double lever)
{
    return {lever * force.y(), -lever * force.x(), 0.0};
}

struct WindSample {
    Eigen::Vector3d velocity{Eigen::Vector3d::Zero()};
    Eigen::Vector3d force{Eigen::Vector3d::Zero()};
    double speed{0.0};
};

class WindModel {
public:
    WindModel(WindSpec spec, std::uint64_t seed) : spec_(spec), rng_(seed)
    {
        spec_.validate();
        // start the gusts in their stationary distribution
        for (int i = 0; i < 3; ++i) {
            gust_(i) = spec_.gust_std * unit_(rng_);
        }
    }

    // Sample for the current instant, then advance the gust process by dt.
    WindSample sample(double dt)
    {
        WindSample s;
        s.velocity = spec_.mean_speed() * spec_.direction.normalized() + gust_;
        s.force = drag_force(s.velocity, spec_.drag_area);
        s.speed = s.velocity.norm();

        const double decay = std::exp(-dt / spec_.gust_correlation_time);
        const double diffusion = spec_.gust_std * std::sqrt(1.0 - decay * decay);
        for (int i = 0; i < 3; ++i) {
            gust_(i) = decay * gust_(i) + diffusion * unit_(rng_);
        }
        return s;
    }

    void set_speed_knots(double knots)
    {
        if (!(knots >= 0.0)) throw ConfigError("wind speed must be >= 0");
        spec_.speed_knots = knots;
    }

    const WindSpec& spec() const { return spec_; }

private:
    WindSpec spec_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> unit_{0.0, 1.0};
    Eigen::Vector3d gust_{Eigen::Vector3d::Zero()};
};

}  // namespace bicopter
