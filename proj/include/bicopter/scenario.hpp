#pragma once

// Declarative experiment description, its strict JSON form (version 1) and
// the built-in presets.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bicopter/control.hpp"
#include "bicopter/dynamics.hpp"
#include "bicopter/sensing.hpp"
#include "bicopter/wind.hpp"

namespace bicopter {

struct SetpointKnot {
    double t{0.0};      // s, schedule entry takes effect at t
    double roll{0.0};   // deg
    double pitch{0.0};  // deg
    double yaw{0.0};    // deg
    double z{0.0};      // NED altitude reference, m
};

struct InitialState {
    double roll{0.0};   // deg
    double pitch{0.0};
    double yaw{0.0};
    Eigen::Vector3d rates{Eigen::Vector3d::Zero()};     // deg/s
    Eigen::Vector3d position{Eigen::Vector3d::Zero()};  // m
    Eigen::Vector3d velocity{Eigen::Vector3d::Zero()};  // m/s

    RigidBodyState to_state() const
    {
        RigidBodyState s;
        s.attitude = {deg2rad(roll), deg2rad(pitch), deg2rad(yaw)};
        s.rates = rates * kDegToRad;
        s.position = position;
        s.velocity = velocity;
        return s;
    }
};

struct ControlConfig {
    GainSet gains{GainSet::testbed()};
    std::string gains_preset{"testbed"};  // "custom" when given numerically
    OutputScaling scaling{};
    double integral_fraction{0.25};       // anti-windup bound as a share of actuator span
    bool derivative_on_measurement{false};
    std::optional<double> throttle_base;  // hover throttle when unset
    double center_servo{0.0};             // deg
    bool reset_on_update{false};
};

struct ActuatorConfig {
    ActuatorLimits limits{};
    ActuatorLag lag{true, 0.050, 0.030};
};

struct RmseWindow {
    double start{0.0};
    double end{std::numeric_limits<double>::infinity()};
};

struct Scenario {
    int version{1};
    std::string name{"custom"};
    FlightMode mode{FlightMode::testbed};
    double duration{28.0};  // s
    double dt{0.0028};      // s
    std::uint64_t seed{1};
    EstimatorKind estimator{EstimatorKind::complementary};
    double cutoff_hz{5.0};
    double fusion_gain{0.02};
    ControlConfig control{};
    WindSpec wind{};
    std::vector<SetpointKnot> setpoints{SetpointKnot{}};
    NoiseModel noise{};
    InitialState initial{};
    BicopterParams params{};
    ActuatorConfig actuator{};
    RmseWindow rmse_window{};

    std::int64_t tick_count() const { return std::llround(duration / dt); }

    void validate() const
    {
        if (version != 1) throw ConfigError("unsupported scenario version " + std::to_string(version));
        if (!(duration > 0.0)) throw ConfigError("duration must be positive");
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        if (!(cutoff_hz > 0.0)) throw ConfigError("filter.cutoff_hz must be positive");
        if (fusion_gain < 0.0 || fusion_gain > 1.0) {
            throw ConfigError("fusion_gain must lie in [0, 1]");
        }
        if (setpoints.empty()) throw ConfigError("setpoints must not be empty");
        for (std::size_t i = 1; i < setpoints.size(); ++i) {
            if (setpoints[i].t < setpoints[i - 1].t) {
                throw ConfigError("setpoint times must be non-decreasing");
            }
        }
        if (!(noise.accel_std >= 0.0) || !(noise.gyro_std >= 0.0)) {
            throw ConfigError("noise standard deviations must be >= 0");
        }
        if (!(rmse_window.end > rmse_window.start)) throw ConfigError("rmse window is empty");
        for (Axis a : {Axis::roll, Axis::pitch, Axis::yaw, Axis::altitude}) {
            control.gains[a].validate();
        }
        if (control.throttle_base && !(*control.throttle_base >= 0.0 && *control.throttle_base <= 1.0)) {
            throw ConfigError("control.throttle_base must lie in [0, 1]");
        }
        params.validate();
        actuator.limits.validate();
        wind.validate();
    }
};

// Active reference at time t: the last knot with knot.t <= t.
inline const SetpointKnot& setpoint_at(const std::vector<SetpointKnot>& schedule, double t)
{
    auto it = std::upper_bound(schedule.begin(), schedule.end(), t,
                               [](double v, const SetpointKnot& k) { return v < k.t; });
    return it == schedule.begin() ? schedule.front() : *std::prev(it);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace json_detail {
using nlohmann::json;

inline void require_object(const json& j, const std::string& ctx)
{
    if (!j.is_object()) throw ConfigError(ctx + " must be an object");
}

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& ctx)
{
    require_object(j, ctx);
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown field '" + (ctx.empty() ? key : ctx + "." + key) + "'");
        }
    }
}

inline double number(const json& j, const std::string& ctx)
{
    if (!j.is_number()) throw ConfigError(ctx + " must be a number");
    return j.get<double>();
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& ctx)
{
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    const std::string where = ctx.empty() ? std::string(key) : ctx + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
        out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where + " must be a string");
        out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
        out = v.get<T>();
    } else {
        out = number(v, where);
    }
}

inline Eigen::Vector3d vec3(const json& j, const std::string& ctx)
{
    if (!j.is_array() || j.size() != 3) throw ConfigError(ctx + " must be a 3-element array");
    return {number(j[0], ctx), number(j[1], ctx), number(j[2], ctx)};
}

inline json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline PidGains gains_from_json(const json& j, const std::string& ctx)
{
    check_keys(j, {"kp", "ki", "kd"}, ctx);
    PidGains g;
    read(j, "kp", g.kp, ctx);
    read(j, "ki", g.ki, ctx);
    read(j, "kd", g.kd, ctx);
    return g;
}

inline json gains_json(const PidGains& g) { return {{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}}; }

inline EstimatorKind estimator_from_string(const std::string& s)
{
    if (s == "cf") return EstimatorKind::complementary;
    if (s == "quaternion") return EstimatorKind::quaternion;
    if (s == "truth") return EstimatorKind::truth;
    throw ConfigError("unknown estimator '" + s + "' (cf | quaternion | truth)");
}

inline const char* to_string(EstimatorKind k)
{
    switch (k) {
    case EstimatorKind::complementary: return "cf";
    case EstimatorKind::quaternion: return "quaternion";
    case EstimatorKind::truth: return "truth";
    }
    return "?";
}
}  // namespace json_detail

inline Scenario scenario_from_json(const nlohmann::json& j)
{
    using namespace json_detail;
    check_keys(j, {"version", "name", "mode", "duration", "dt", "seed", "gains", "control",
                   "estimator", "filter", "fusion_gain", "wind", "setpoints", "noise",
                   "initial", "params", "actuator", "rmse_window"},
               "");
    if (!j.contains("version")) throw ConfigError("missing field 'version'");
    Scenario s;
    read(j, "version", s.version, "");
    if (s.version != 1) throw ConfigError("unsupported scenario version " + std::to_string(s.version));
    read(j, "name", s.name, "");
    if (j.contains("mode")) {
        std::string m;
        read(j, "mode", m, "");
        if (m == "testbed") s.mode = FlightMode::testbed;
        else if (m == "freeflight") s.mode = FlightMode::freeflight;
        else throw ConfigError("mode must be 'testbed' or 'freeflight'");
    }
    read(j, "duration", s.duration, "");
    read(j, "dt", s.dt, "");
    read(j, "seed", s.seed, "");
    s.noise.seed = s.seed;
    if (j.contains("estimator")) {
        std::string e;
        read(j, "estimator", e, "");
        s.estimator = estimator_from_string(e);
    }
    if (j.contains("filter")) {
        check_keys(j["filter"], {"cutoff_hz"}, "filter");
        read(j["filter"], "cutoff_hz", s.cutoff_hz, "filter");
    }
    read(j, "fusion_gain", s.fusion_gain, "");

    if (j.contains("gains")) {
        const json& g = j["gains"];
        if (g.is_string()) {
            s.control.gains_preset = g.get<std::string>();
            const PidGains altitude = s.control.gains.altitude;
            s.control.gains = GainSet::preset(s.control.gains_preset);
            s.control.gains.altitude = altitude;
        } else {
            check_keys(g, {"preset", "roll", "pitch", "yaw", "altitude"}, "gains");
            if (g.contains("preset")) {
                read(g, "preset", s.control.gains_preset, "gains");
                s.control.gains = GainSet::preset(s.control.gains_preset);
            }
            bool custom = false;
            for (Axis a : {Axis::roll, Axis::pitch, Axis::yaw, Axis::altitude}) {
                if (g.contains(to_string(a))) {
                    const PidGains given = gains_from_json(g[to_string(a)], std::string("gains.") + to_string(a));
                    custom = custom || (a != Axis::altitude && !(given == s.control.gains[a]));
                    s.control.gains[a] = given;
                }
            }
            if (custom) s.control.gains_preset = "custom";
        }
    }
    if (j.contains("control")) {
        const json& c = j["control"];
        check_keys(c, {"throttle_per_unit", "servo_rad_per_unit", "integral_fraction",
                       "derivative_on_measurement", "throttle_base", "center_servo",
                       "reset_on_update"},
                   "control");
        read(c, "throttle_per_unit", s.control.scaling.throttle_per_unit, "control");
        read(c, "servo_rad_per_unit", s.control.scaling.servo_rad_per_unit, "control");
        read(c, "integral_fraction", s.control.integral_fraction, "control");
        read(c, "derivative_on_measurement", s.control.derivative_on_measurement, "control");
        if (c.contains("throttle_base") && !c["throttle_base"].is_null()) {
            s.control.throttle_base = number(c["throttle_base"], "control.throttle_base");
        }
        read(c, "center_servo", s.control.center_servo, "control");
        read(c, "reset_on_update", s.control.reset_on_update, "control");
    }
    if (j.contains("wind")) {
        const json& w = j["wind"];
        check_keys(w, {"speed_knots", "direction", "gust_std", "gust_correlation_time", "drag_area"}, "wind");
        read(w, "speed_knots", s.wind.speed_knots, "wind");
        if (w.contains("direction")) s.wind.direction = vec3(w["direction"], "wind.direction");
        read(w, "gust_std", s.wind.gust_std, "wind");
        read(w, "gust_correlation_time", s.wind.gust_correlation_time, "wind");
        read(w, "drag_area", s.wind.drag_area, "wind");
    }
    if (j.contains("setpoints")) {
        const json& sp = j["setpoints"];
        if (!sp.is_array()) throw ConfigError("setpoints must be an array");
        s.setpoints.clear();
        for (std::size_t i = 0; i < sp.size(); ++i) {
            const std::string ctx = "setpoints[" + std::to_string(i) + "]";
            check_keys(sp[i], {"t", "roll", "pitch", "yaw", "z"}, ctx);
            SetpointKnot k;
            read(sp[i], "t", k.t, ctx);
            read(sp[i], "roll", k.roll, ctx);
            read(sp[i], "pitch", k.pitch, ctx);
            read(sp[i], "yaw", k.yaw, ctx);
            read(sp[i], "z", k.z, ctx);
            s.setpoints.push_back(k);
        }
    }
    if (j.contains("noise")) {
        const json& n = j["noise"];
        check_keys(n, {"accel_std", "gyro_std", "accel_bias", "gyro_bias", "accel_range", "gyro_range"}, "noise");
        read(n, "accel_std", s.noise.accel_std, "noise");
        read(n, "gyro_std", s.noise.gyro_std, "noise");
        if (n.contains("accel_bias")) s.noise.accel_bias = vec3(n["accel_bias"], "noise.accel_bias");
        if (n.contains("gyro_bias")) s.noise.gyro_bias = vec3(n["gyro_bias"], "noise.gyro_bias");
        read(n, "accel_range", s.noise.accel_range, "noise");
        read(n, "gyro_range", s.noise.gyro_range, "noise");
    }
    if (j.contains("initial")) {
        const json& i = j["initial"];
        check_keys(i, {"roll", "pitch", "yaw", "rates", "position", "velocity"}, "initial");
        read(i, "roll", s.initial.roll, "initial");
        read(i, "pitch", s.initial.pitch, "initial");
        read(i, "yaw", s.initial.yaw, "initial");
        if (i.contains("rates")) s.initial.rates = vec3(i["rates"], "initial.rates");
        if (i.contains("position")) s.initial.position = vec3(i["position"], "initial.position");
        if (i.contains("velocity")) s.initial.velocity = vec3(i["velocity"], "initial.velocity");
    }
    if (j.contains("params")) {
        const json& p = j["params"];
        check_keys(p, {"mass", "gravity", "rotor_height", "arm_length", "thrust_coeff", "ixx", "iyy", "izz"}, "params");
        read(p, "mass", s.params.mass, "params");
        read(p, "gravity", s.params.gravity, "params");
        read(p, "rotor_height", s.params.rotor_height, "params");
        read(p, "arm_length", s.params.arm_length, "params");
        read(p, "thrust_coeff", s.params.thrust_coeff, "params");
        read(p, "ixx", s.params.ixx, "params");
        read(p, "iyy", s.params.iyy, "params");
        read(p, "izz", s.params.izz, "params");
    }
    if (j.contains("actuator")) {
        const json& a = j["actuator"];
        check_keys(a, {"omega_max", "tilt_max_deg", "lag", "tau_omega", "tau_tilt"}, "actuator");
        read(a, "omega_max", s.actuator.limits.omega_max, "actuator");
        double tilt_deg = rad2deg(s.actuator.limits.tilt_max);
        read(a, "tilt_max_deg", tilt_deg, "actuator");
        s.actuator.limits.tilt_max = deg2rad(tilt_deg);
        read(a, "lag", s.actuator.lag.enabled, "actuator");
        read(a, "tau_omega", s.actuator.lag.tau_omega, "actuator");
        read(a, "tau_tilt", s.actuator.lag.tau_tilt, "actuator");
    }
    if (j.contains("rmse_window")) {
        const json& w = j["rmse_window"];
        check_keys(w, {"start", "end"}, "rmse_window");
        read(w, "start", s.rmse_window.start, "rmse_window");
        if (w.contains("end") && !w["end"].is_null()) read(w, "end", s.rmse_window.end, "rmse_window");
    }
    s.validate();
    return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s)
{
    using namespace json_detail;
    json j;
    j["version"] = s.version;
    j["name"] = s.name;
    j["mode"] = to_string(s.mode);
    j["duration"] = s.duration;
    j["dt"] = s.dt;
    j["seed"] = s.seed;
    j["estimator"] = to_string(s.estimator);
    j["filter"] = {{"cutoff_hz", s.cutoff_hz}};
    j["fusion_gain"] = s.fusion_gain;
    json gains = {{"roll", gains_json(s.control.gains.roll)},
                  {"pitch", gains_json(s.control.gains.pitch)},
                  {"yaw", gains_json(s.control.gains.yaw)},
                  {"altitude", gains_json(s.control.gains.altitude)}};
    if (s.control.gains_preset != "custom") gains["preset"] = s.control.gains_preset;
    j["gains"] = gains;
    j["control"] = {{"throttle_per_unit", s.control.scaling.throttle_per_unit},
                    {"servo_rad_per_unit", s.control.scaling.servo_rad_per_unit},
                    {"integral_fraction", s.control.integral_fraction},
                    {"derivative_on_measurement", s.control.derivative_on_measurement},
                    {"throttle_base", s.control.throttle_base ? json(*s.control.throttle_base) : json(nullptr)},
                    {"center_servo", s.control.center_servo},
                    {"reset_on_update", s.control.reset_on_update}};
    j["wind"] = {{"speed_knots", s.wind.speed_knots},
                 {"direction", vec3_json(s.wind.direction)},
                 {"gust_std", s.wind.gust_std},
                 {"gust_correlation_time", s.wind.gust_correlation_time},
                 {"drag_area", s.wind.drag_area}};
    json sp = json::array();
    for (const auto& k : s.setpoints) {
        sp.push_back({{"t", k.t}, {"roll", k.roll}, {"pitch", k.pitch}, {"yaw", k.yaw}, {"z", k.z}});
    }
    j["setpoints"] = sp;
    j["noise"] = {{"accel_std", s.noise.accel_std}, {"gyro_std", s.noise.gyro_std},
                  {"accel_bias", vec3_json(s.noise.accel_bias)},
                  {"gyro_bias", vec3_json(s.noise.gyro_bias)},
                  {"accel_range", s.noise.accel_range}, {"gyro_range", s.noise.gyro_range}};
    j["initial"] = {{"roll", s.initial.roll}, {"pitch", s.initial.pitch}, {"yaw", s.initial.yaw},
                    {"rates", vec3_json(s.initial.rates)},
                    {"position", vec3_json(s.initial.position)},
                    {"velocity", vec3_json(s.initial.velocity)}};
    j["params"] = {{"mass", s.params.mass}, {"gravity", s.params.gravity},
                   {"rotor_height", s.params.rotor_height}, {"arm_length", s.params.arm_length},
                   {"thrust_coeff", s.params.thrust_coeff}, {"ixx", s.params.ixx},
                   {"iyy", s.params.iyy}, {"izz", s.params.izz}};
    j["actuator"] = {{"omega_max", s.actuator.limits.omega_max},
                     {"tilt_max_deg", rad2deg(s.actuator.limits.tilt_max)},
                     {"lag", s.actuator.lag.enabled},
                     {"tau_omega", s.actuator.lag.tau_omega},
                     {"tau_tilt", s.actuator.lag.tau_tilt}};
    j["rmse_window"] = {{"start", s.rmse_window.start},
                        {"end", std::isfinite(s.rmse_window.end) ? json(s.rmse_window.end) : json(nullptr)}};
    return j;
}

inline Scenario scenario_from_string(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
    return scenario_from_json(j);
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return scenario_from_string(buf.str());
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

// Rig-scale fan wind. The drag area is an effective value: it lumps the
// small moment arm of the fan load about the rig pivot into C_d A.
inline WindSpec fan_wind(double knots)
{
    WindSpec w;
    w.speed_knots = knots;
    w.direction = {1.0, 0.0, 0.0};
    w.gust_std = 0.15 * knots * kKnotToMps;
    w.gust_correlation_time = 0.5;
    w.drag_area = 3.0e-5;
    return w;
}

inline Scenario testbed_wind_preset(double knots)
{
    Scenario s;
    s.name = "testbed-" + std::to_string(static_cast<int>(knots)) + "kn";
    s.mode = FlightMode::testbed;
    s.duration = 28.0;
    s.dt = 0.0028;
    s.control.gains = GainSet::testbed();
    s.control.gains_preset = "testbed";
    s.wind = fan_wind(knots);
    return s;
}

inline Scenario flight_indoor_preset()
{
    Scenario s;
    s.name = "flight-indoor";
    s.mode = FlightMode::freeflight;
    s.duration = 28.0;
    s.dt = 0.0028;
    s.control.gains = GainSet::flight();
    s.control.gains_preset = "flight";
    s.setpoints = {SetpointKnot{0.0, 0.0, 0.0, 0.0, -1.0}};
    s.initial.position = {0.0, 0.0, -1.0};
    return s;
}

inline std::vector<std::string> preset_names()
{
    return {"testbed-8kn", "testbed-9kn", "testbed-10kn", "flight-indoor"};
}

inline std::optional<Scenario> find_preset(std::string_view name)
{
    if (name == "testbed-8kn") return testbed_wind_preset(8.0);
    if (name == "testbed-9kn") return testbed_wind_preset(9.0);
    if (name == "testbed-10kn") return testbed_wind_preset(10.0);
    if (name == "flight-indoor") return flight_indoor_preset();
    return std::nullopt;
}

}  // namespace bicopter
