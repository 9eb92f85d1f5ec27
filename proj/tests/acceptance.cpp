// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "bicopter/control.hpp"
#include "bicopter/dynamics.hpp"
#include "bicopter/scenario.hpp"
#include "bicopter/sensing.hpp"
#include "bicopter/simulation.hpp"
#include "bicopter/telemetry.hpp"
#include "bicopter/tuning.hpp"
#include "test_oracles.hpp"

using namespace bicopter;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Collects sub-checks for one criterion.
struct Check {
    bool ok{true};
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what)
    {
        if (!cond) ok = false;
        notes.push_back(std::string(cond ? "" : "!") + what);
    }
};

std::string run_command(const std::string& cmd, int& status)
{
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    std::string out;
    if (!pipe) {
        status = -1;
        return out;
    }
    std::array<char, 256> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
    status = pclose(pipe.release());
    return out;
}

// 1: pole placement through the CLI
Check pole_placement()
{
    Check c;
    const auto t0 = Clock::now();
    int status = 0;
    const std::string out =
        run_command(std::string(BICOPTER_SIM_PATH) + " tune --axis roll --char 331 1950", status);
    const double elapsed = seconds_since(t0);
    c.expect(status == 0, "exit status 0");
    std::smatch m;
    const std::regex re(R"(K_p=([-0-9.eE+]+) K_d=([-0-9.eE+]+))");
    if (std::regex_search(out, m, re)) {
        const double kp = std::stod(m[1]), kd = std::stod(m[2]);
        c.expect(std::abs(kp - 1.0053) <= 1e-3, fmt("K_p=%.4f", kp));
        c.expect(std::abs(kd - 0.1706) <= 1e-3, fmt("K_d=%.4f", kd));
    } else {
        c.expect(false, "gains line in output");
    }
    c.expect(elapsed < 1.0, fmt("%.3f s", elapsed));
    return c;
}

// 2: plant gains
Check plant_gains()
{
    Check c;
    const BicopterParams p;
    const double roll = plant_from_params(p, Axis::roll).gain;
    const double pitch = plant_from_params(p, Axis::pitch).gain;
    const double yaw = plant_from_params(p, Axis::yaw).gain;
    c.expect(std::abs(roll - 1939.7) <= 0.5, fmt("roll %.2f", roll));
    c.expect(std::abs(pitch - 1029.4) <= 0.5, fmt("pitch %.2f", pitch));
    c.expect(std::abs(yaw - 2142.9) <= 0.5, fmt("yaw %.2f", yaw));
    return c;
}

// 3: poles and the simulated step response
Check pole_check()
{
    Check c;
    const auto p = poles(331.0, 1950.0);
    c.expect(p[0] == std::complex<double>(-6.0) && p[1] == std::complex<double>(-325.0),
             "poles -6, -325 exact");
    const DoubleIntegratorPlant plant = plant_from_params({}, Axis::roll);
    const PdGains g = gains_from_characteristic(plant, {331.0, 1950.0});
    const auto a = cltf_step_response(plant, g.kp, g.kd, 1.0, 0.0028);
    const auto s = simulate_step_response(plant, g.kp, g.kd, 1.0, 0.0028);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size() && i < s.size(); ++i) {
        worst = std::max(worst, std::abs(a[i].y - s[i].y));
    }
    c.expect(a.size() == s.size() && worst <= 1e-3, fmt("RK4 vs CLTF max dev %.3e", worst));
    return c;
}

// 4: hover equilibrium
Check hover()
{
    Check c;
    const BicopterParams p;
    const StateDerivative d = accelerations({}, {7.11225, 0, 0, 0}, p);
    const double acc = std::max(d.acceleration.cwiseAbs().maxCoeff(),
                                d.angular_acceleration.cwiseAbs().maxCoeff());
    c.expect(acc < 1e-12, fmt("max accel %.1e", acc));

    const double w = hover_omega(p);
    RigidBodyState s;
    s.position = {0.0, 0.0, -1.0};
    const RigidBodyState start = s;
    for (int i = 0; i < 1000; ++i) s = step(s, {w, w, 0.0, 0.0}, p, 0.0028, FlightMode::freeflight);
    const double drift = std::max({(s.position - start.position).cwiseAbs().maxCoeff(),
                                   s.velocity.cwiseAbs().maxCoeff(), s.rates.cwiseAbs().maxCoeff(),
                                   std::abs(s.attitude.roll), std::abs(s.attitude.pitch),
                                   std::abs(s.attitude.yaw)});
    c.expect(drift < 1e-9, fmt("1000-tick drift %.1e", drift));
    return c;
}

// 5: quaternion oracle suite
Check quaternions()
{
    Check c;
    std::mt19937_64 rng(5);
    double grav = 0.0, euler = 0.0, trip = 0.0;
    int n = 0;
    while (n < 1000) {
        const Quaternion q = oracle::random_unit_quaternion(rng);
        const EulerAngles want = oracle::euler_from_matrix(q);
        if (std::abs(want.pitch) > deg2rad(85.0)) continue;
        const GravityVector gv = quat_to_gravity(q);
        const Eigen::Vector3d go = oracle::gravity_in_body(q);
        grav = std::max(grav, (Eigen::Vector3d(gv.x, gv.y, gv.z) - go).cwiseAbs().maxCoeff());
        const EulerAngles got = quat_to_euler(q).angles;
        euler = std::max({euler, std::abs(wrap_angle(got.roll - want.roll)),
                          std::abs(got.pitch - want.pitch), std::abs(wrap_angle(got.yaw - want.yaw))});
        const Quaternion back = euler_to_quat(got);
        const double sign = (back.w * q.w + back.x * q.x + back.y * q.y + back.z * q.z) < 0 ? -1.0 : 1.0;
        trip = std::max({trip, std::abs(sign * back.w - q.w), std::abs(sign * back.x - q.x),
                         std::abs(sign * back.y - q.y), std::abs(sign * back.z - q.z)});
        ++n;
    }
    c.expect(grav < 1e-9, fmt("gravity %.1e", grav));
    c.expect(euler < 1e-9, fmt("euler %.1e", euler));
    c.expect(trip < 1e-9, fmt("round trip %.1e", trip));
    return c;
}

// 6: filter properties
Check filters()
{
    Check c;
    const double alpha = alpha_from_cutoff(5.0, 0.0028);
    c.expect(std::abs(alpha - 0.080854) <= 1e-6, fmt("alpha %.7f", alpha));

    LowPassFilter lpf(alpha, 0.0);
    HighPassFilter hpf(alpha);
    double y_lp = 0.0, y_hp = 0.0;
    for (int i = 0; i < 1000; ++i) {
        y_lp = lpf.update(1.0);
        y_hp = hpf.update(1.0);
    }
    c.expect(std::abs(y_lp - 1.0) < 1e-12, fmt("LPF DC %.12f", y_lp));
    c.expect(std::abs(y_hp) < 1e-12, fmt("HPF DC %.1e", y_hp));

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> ang(-0.6, 0.6), rate(-100.0, 100.0);
    bool exact = true;
    for (int i = 0; i < 500; ++i) {
        const EstimatorState st = EstimatorState::at({ang(rng), ang(rng), ang(rng)});
        ImuSample s;
        const double r = ang(rng), p = ang(rng);
        s.accel = {-std::sin(p), std::sin(r) * std::cos(p), std::cos(r) * std::cos(p)};
        s.gyro = {rate(rng), rate(rng), rate(rng)};
        const TiltAngles tilt = accel_to_angles(s.accel);
        const EstimatorState a1 = cf_update(st, s, 1.0, 0.0028);
        const EstimatorState a0 = cf_update(st, s, 0.0, 0.0028);
        exact = exact && a1.fused.roll == tilt.roll && a1.fused.pitch == tilt.pitch &&
                a0.fused.roll == st.fused.roll + s.gyro.x() * kDegToRad * 0.0028 &&
                a0.fused.pitch == st.fused.pitch + s.gyro.y() * kDegToRad * 0.0028;
    }
    c.expect(exact, "CF boundary collapse exact");
    return c;
}

// 7: discrete PID
Check pid()
{
    Check c;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> e(-20.0, 20.0), g(0.0, 30.0);
    bool exact = true;
    for (int seq = 0; seq < 10000 && exact; ++seq) {
        const PidGains gains{g(rng), g(rng) / 10.0, g(rng)};
        std::vector<double> errors(16);
        for (auto& x : errors) x = e(rng);
        const auto ref = oracle::pid_reference(errors, gains.kp, gains.ki, gains.kd, 0.0028);
        PidState s;
        for (std::size_t k = 0; k < errors.size(); ++k) exact = exact && pid_step(errors[k], gains, s) == ref[k];
    }
    c.expect(exact, "10^4 sequences bit-exact");

    const PidGains gains{3.3, 0.030, 23.0};
    const auto worst = [&](double period) {
        PidState s;
        s.period = period;
        double w = 0.0;
        const int n = static_cast<int>(std::llround(5.0 / period));
        for (int k = 0; k <= n; ++k) {
            const double t = k * period;
            const double u = pid_step(std::sin(t), gains, s);
            if (k > 0) w = std::max(w, std::abs(u - oracle::pid_continuous_sine(t, 1.0, gains.kp, gains.ki, gains.kd)));
        }
        return w;
    };
    const double ratio = worst(0.010) / worst(0.001);
    c.expect(std::abs(ratio - 10.0) <= 2.0, fmt("T ratio %.3f", ratio));
    return c;
}

// 8: allocation inverse
Check allocation()
{
    Check c;
    const BicopterParams p;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> w(0.5, 10.0), g(-0.7, 0.7);
    double worst = 0.0;
    bool unsaturated = true;
    for (int i = 0; i < 1000; ++i) {
        const ControlVector u = control_vector({w(rng), w(rng), g(rng), g(rng)}, p);
        const Allocation a = allocate(u, p);
        unsaturated = unsaturated && !a.saturated.any();
        const ControlVector b = control_vector(a.command, p);
        worst = std::max({worst, std::abs(b.u1 - u.u1), std::abs(b.u2 - u.u2),
                          std::abs(b.u3 - u.u3), std::abs(b.u4 - u.u4)});
    }
    c.expect(unsaturated, "commands unsaturated");
    c.expect(worst < 1e-9, fmt("max residual %.1e", worst));
    return c;
}

double max_abs_attitude(const std::vector<TelemetryRecord>& tel)
{
    double m = 0.0;
    for (const auto& r : tel) m = std::max({m, std::abs(r.phi_true), std::abs(r.theta_true), std::abs(r.psi_true)});
    return m;
}

// 9: wind trend
Check wind_trend()
{
    Check c;
    std::array<RmseReport, 3> rep{};
    const std::array<double, 3> knots{8.0, 9.0, 10.0};
    for (std::size_t i = 0; i < 3; ++i) {
        const Scenario s = testbed_wind_preset(knots[i]);
        const auto t0 = Clock::now();
        const ScenarioResult r = run_scenario(s);
        const double elapsed = seconds_since(t0);
        const std::string tag = std::to_string(static_cast<int>(knots[i])) + "kn ";
        c.expect(!r.error.has_value(), tag + "no divergence");
        c.expect(elapsed < 10.0, tag + fmt("%.2f s", elapsed));
        const double peak = max_abs_attitude(r.telemetry);
        c.expect(peak < 15.0, tag + fmt("peak %.2f deg", peak));
        if (knots[i] == 10.0) {
            c.expect(r.telemetry.size() == 10000 && r.telemetry.back().t >= 27.99,
                     tag + std::to_string(r.telemetry.size()) + " ticks");
        }
        if (r.report) rep[i] = *r.report;
        c.notes.push_back(tag + fmt("roll %.4f", rep[i].roll) + fmt(" pitch %.4f", rep[i].pitch));
    }
    c.expect(rep[0].roll < rep[1].roll && rep[1].roll < rep[2].roll, "roll RMSE increasing");
    c.expect(rep[0].pitch < rep[1].pitch && rep[1].pitch < rep[2].pitch, "pitch RMSE increasing");
    return c;
}

// 10: recovery from 10 deg roll
Check stabilization()
{
    Check c;
    Scenario s = testbed_wind_preset(8.0);
    s.name = "roll-recovery";
    s.wind = fan_wind(0.0);
    s.initial.roll = 10.0;
    s.duration = 10.0;
    const ScenarioResult r = run_scenario(s);
    c.expect(!r.error.has_value(), "no divergence");
    // first tick from which |phi| stays below 1 deg for the rest of the run
    double settle = -1.0;
    double tail = 0.0;
    for (auto it = r.telemetry.rbegin(); it != r.telemetry.rend(); ++it) {
        if (std::abs(it->phi_true) >= 1.0) break;
        settle = it->t;
    }
    for (const auto& rec : r.telemetry) {
        if (settle >= 0.0 && rec.t >= settle) tail = std::max(tail, std::abs(rec.phi_true));
    }
    c.expect(settle >= 0.0 && settle < 5.0, fmt("inside 1 deg from t=%.3f s", settle));
    c.expect(settle >= 0.0 && tail < 1.0, fmt("later max %.3f deg", tail));
    return c;
}

std::string csv_of(const Scenario& s)
{
    std::ostringstream out;
    write_csv(out, run_scenario(s).telemetry);
    return out.str();
}

// 11: determinism
Check determinism()
{
    Check c;
    for (const std::string& name : preset_names()) {
        const Scenario s = *find_preset(name);
        c.expect(csv_of(s) == csv_of(s), name + " identical");
    }
    return c;
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
        {"pole placement gains via tune", pole_placement},
        {"plant gains", plant_gains},
        {"closed-loop poles and step response", pole_check},
        {"hover equilibrium", hover},
        {"quaternion oracle suite", quaternions},
        {"filter properties", filters},
        {"discrete PID", pid},
        {"allocation inverse", allocation},
        {"wind trend 8/9/10 kn", wind_trend},
        {"10 deg roll recovery", stabilization},
        {"telemetry determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            c = criteria[i].second();
        } catch (const std::exception& e) {
            c.expect(false, std::string("threw: ") + e.what());
        }
        std::string detail;
        for (const auto& n : c.notes) detail += (detail.empty() ? "" : "; ") + n;
        std::printf("criterion %2zu %s  %s  [%s]\n", i + 1, c.ok ? "PASS" : "FAIL",
                    criteria[i].first.c_str(), detail.c_str());
        if (!c.ok) ++failed;
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
