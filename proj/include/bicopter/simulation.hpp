#pragma once

// Closed-loop software-in-the-loop run:
//   IMU -> estimator -> attitude errors -> PID x3 (+ altitude) -> mixer
//   -> rotor speed / tilt (with lag) -> wind -> RK4 plant step.
// One record per tick; the record at tick k describes t = k dt, before the
// plant advances.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bicopter/control.hpp"
#include "bicopter/dynamics.hpp"
#include "bicopter/scenario.hpp"
#include "bicopter/sensing.hpp"
#include "bicopter/telemetry.hpp"
#include "bicopter/wind.hpp"

namespace bicopter {

class Simulation {
public:
    explicit Simulation(Scenario scenario)
        : scenario_(std::move(scenario)),
          estimator_(scenario_.estimator, FilterConfig{scenario_.cutoff_hz, scenario_.dt},
                     scenario_.fusion_gain),
          wind_(scenario_.wind, wind_seed(scenario_.seed))
    {
        scenario_.validate();
        gains_ = scenario_.control.gains;
        reset();
    }

    // Restores the initial condition, clears controller memories and
    // reseeds every random stream. Live gain, wind and setpoint overrides
    // survive.
    void reset()
    {
        const double wind_knots = wind_.spec().speed_knots;
        k_ = 0;
        state_ = scenario_.initial.to_state();
        imu_rng_.seed(scenario_.seed);
        wind_ = WindModel(scenario_.wind, wind_seed(scenario_.seed));
        wind_.set_speed_knots(wind_knots);
        estimator_.reset(state_.attitude);
        build_controllers();
        const ActuatorLimits& lim = scenario_.actuator.limits;
        applied_ = actuator_command(mixer({}, setpoints_at(0.0), lim), lim);
        disturbance_ = {};
    }

    TelemetryRecord tick()
    {
        const double dt = scenario_.dt;
        const double t = static_cast<double>(k_) * dt;
        const BicopterParams& p = scenario_.params;
        const ActuatorLimits& lim = scenario_.actuator.limits;

        StateDerivative deriv = accelerations(state_, control_vector(applied_, p), p, disturbance_);
        if (scenario_.mode == FlightMode::testbed) {
            deriv.acceleration.setZero();
        }
        NoiseModel noise = scenario_.noise;
        const ImuSample imu = simulate_imu(state_, deriv, noise, p.gravity, t, imu_rng_);
        const EulerAngles est = estimator_.update(imu, state_.attitude);

        const Setpoints sp = setpoints_at(t);
        const double e_roll = rad2deg(attitude_error(est.roll, sp.roll, Axis::roll));
        const double e_pitch = rad2deg(attitude_error(est.pitch, sp.pitch, Axis::pitch));
        const double e_yaw = rad2deg(attitude_error(est.yaw, sp.yaw, Axis::yaw));
        const double u_roll = pid_[0].update(e_roll, rad2deg(est.roll));
        const double u_pitch = pid_[1].update(e_pitch, rad2deg(est.pitch));
        const double u_yaw = pid_[2].update(e_yaw, rad2deg(est.yaw));
        double u_alt = 0.0;
        if (scenario_.mode == FlightMode::freeflight) {
            u_alt = pid_[3].update(state_.position.z() - sp.altitude, state_.position.z());
        }

        const MixerInput in =
            scale_outputs(u_roll, u_pitch, u_yaw, u_alt, scenario_.control.scaling);
        const MixerOutput mix = mixer(in, sp, lim);
        const ActuatorCommand target = actuator_command(mix, lim);
        applied_ = scenario_.actuator.lag.apply(applied_, target, dt);

        const WindSample wind = wind_.sample(dt);
        disturbance_ = {};
        if (scenario_.mode == FlightMode::testbed) {
            disturbance_.torque = rig_torque(wind.force, p.rotor_height);
        } else {
            disturbance_.force = wind.force;
        }

        TelemetryRecord r;
        r.k = k_;
        r.t = t;
        r.phi_true = rad2deg(state_.attitude.roll);
        r.theta_true = rad2deg(state_.attitude.pitch);
        r.psi_true = rad2deg(state_.attitude.yaw);
        r.phi_est = rad2deg(est.roll);
        r.theta_est = rad2deg(est.pitch);
        r.psi_est = rad2deg(est.yaw);
        r.phi_sp = rad2deg(sp.roll);
        r.theta_sp = rad2deg(sp.pitch);
        r.psi_sp = rad2deg(sp.yaw);
        r.u_roll = u_roll;
        r.u_pitch = u_pitch;
        r.u_yaw = u_yaw;
        r.u_alt = u_alt;
        r.thr_right = mix.throttle_right;
        r.thr_left = mix.throttle_left;
        r.srv_right = rad2deg(mix.servo_right);
        r.srv_left = rad2deg(mix.servo_left);
        r.wind_mps = wind.speed;
        r.sat_flags = mix.saturation;
        r.x = state_.position.x();
        r.y = state_.position.y();
        r.z = state_.position.z();

        try {
            state_ = step(state_, applied_, p, dt, scenario_.mode, disturbance_);
        } catch (const DivergenceError&) {
            throw DivergenceError(k_);
        }
        ++k_;
        return r;
    }

    bool finished() const { return k_ >= scenario_.tick_count(); }
    std::int64_t next_tick() const { return k_; }
    const RigidBodyState& state() const { return state_; }
    const Scenario& scenario() const { return scenario_; }
    const GainSet& gains() const { return gains_; }
    double wind_knots() const { return wind_.spec().speed_knots; }

    // Live updates; they take effect on the next tick.
    void set_gains(Axis axis, const PidGains& g)
    {
        g.validate();
        gains_[axis] = g;
        pid_[static_cast<std::size_t>(axis)].set_gains(g, scenario_.control.reset_on_update);
    }

    void set_wind_knots(double knots) { wind_.set_speed_knots(knots); }

    void set_setpoint(Axis axis, double value)
    {
        overrides_[static_cast<std::size_t>(axis)] = value;
    }

    Setpoints setpoints_at(double t) const
    {
        const SetpointKnot& knot = setpoint_at(scenario_.setpoints, t);
        Setpoints sp;
        sp.roll = deg2rad(overrides_[0].value_or(knot.roll));
        sp.pitch = deg2rad(overrides_[1].value_or(knot.pitch));
        sp.yaw = deg2rad(overrides_[2].value_or(knot.yaw));
        sp.altitude = overrides_[3].value_or(knot.z);
        sp.throttle_base = scenario_.control.throttle_base.value_or(
            hover_throttle(scenario_.params, scenario_.actuator.limits));
        sp.center_servo = deg2rad(scenario_.control.center_servo);
        return sp;
    }

    static std::uint64_t wind_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ull; }

private:
    void build_controllers()
    {
        const ControlConfig& c = scenario_.control;
        const ActuatorLimits& lim = scenario_.actuator.limits;
        // anti-windup bounds, in controller units
        const double throttle_span = 1.0 / c.scaling.throttle_per_unit;
        const double servo_span = 2.0 * lim.tilt_max / c.scaling.servo_rad_per_unit;
        const std::array<double, 4> limit{c.integral_fraction * throttle_span,
                                          c.integral_fraction * servo_span,
                                          c.integral_fraction * servo_span,
                                          c.integral_fraction * 1.0};
        for (std::size_t i = 0; i < 4; ++i) {
            PidOptions opt;
            opt.integral_limit = limit[i];
            opt.derivative_on_measurement = c.derivative_on_measurement;
            pid_[i] = PidController(gains_[static_cast<Axis>(i)], scenario_.dt, opt);
        }
    }

    Scenario scenario_;
    AttitudeEstimator estimator_;
    WindModel wind_;
    GainSet gains_{};
    std::array<PidController, 4> pid_{};
    std::array<std::optional<double>, 4> overrides_{};
    std::mt19937_64 imu_rng_{};
    RigidBodyState state_{};
    ActuatorCommand applied_{};
    Disturbance disturbance_{};
    std::int64_t k_{0};
};

struct ScenarioResult {
    std::vector<TelemetryRecord> telemetry;
    std::optional<RmseReport> report;
    std::optional<std::string> error;  // set when the run diverged
    std::optional<std::int64_t> diverged_at;
};

inline ScenarioResult run_scenario(const Scenario& scenario)
{
    ScenarioResult out;
    Simulation sim(scenario);
    out.telemetry.reserve(static_cast<std::size_t>(scenario.tick_count()));
    try {
        while (!sim.finished()) {
            out.telemetry.push_back(sim.tick());
        }
    } catch (const DivergenceError& e) {
        out.error = e.what();
        out.diverged_at = e.tick();
    }
    if (!out.telemetry.empty() && out.telemetry.back().t >= scenario.rmse_window.start) {
        RmseReport rep = rmse_report(out.telemetry, scenario.rmse_window.start,
                                     scenario.rmse_window.end);
        rep.preset = scenario.name;
        rep.seed = scenario.seed;
        out.report = rep;
    }
    return out;
}

}  // namespace bicopter
