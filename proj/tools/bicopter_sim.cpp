// bicopter_sim: batch runs, gain synthesis and live sessions.
//
//   bicopter_sim run <scenario.json|preset> [--out telemetry.csv] [--report report.json]
//   bicopter_sim tune --axis roll (--zeta Z --wn W | --char c1 c0)
//   bicopter_sim presets
//   bicopter_sim serve --port N <scenario.json|preset>
//
// Exit status: 0 ok, 2 configuration or usage error, 3 divergence.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bicopter/scenario.hpp"
#include "bicopter/serve.hpp"
#include "bicopter/simulation.hpp"
#include "bicopter/telemetry.hpp"
#include "bicopter/tuning.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

bicopter::Scenario resolve_scenario(const std::string& source)
{
    if (auto preset = bicopter::find_preset(source)) return *preset;
    return bicopter::load_scenario(source);
}

std::string format_pole(std::complex<double> p)
{
    char buf[96];
    if (p.imag() == 0.0) {
        std::snprintf(buf, sizeof(buf), "%.6g", p.real());
    } else {
        std::snprintf(buf, sizeof(buf), "%.6g%+.6gj", p.real(), p.imag());
    }
    return buf;
}

int cmd_run(const std::string& source, const std::string& out_path,
            const std::string& report_path)
{
    const bicopter::Scenario scenario = resolve_scenario(source);
    const bicopter::ScenarioResult result = bicopter::run_scenario(scenario);

    if (!out_path.empty()) bicopter::write_csv(out_path, result.telemetry);
    if (result.report) {
        const auto& r = *result.report;
        std::printf("%s: %zu ticks, rmse roll=%.4f pitch=%.4f yaw=%.4f deg\n",
                    scenario.name.c_str(), result.telemetry.size(), r.roll, r.pitch, r.yaw);
        if (!report_path.empty()) {
            std::ofstream rep(report_path);
            if (!rep) throw std::runtime_error("cannot open '" + report_path + "' for writing");
            rep << r.to_json().dump(2) << '\n';
        }
    }
    if (result.error) {
        std::fprintf(stderr, "error: %s (%zu ticks recorded)\n", result.error->c_str(),
                     result.telemetry.size());
        return kExitDiverged;
    }
    return kExitOk;
}

int cmd_tune(const std::string& axis_name, const std::vector<double>& chr, double zeta,
             double wn, double plant_gain, const std::string& step_path, double duration)
{
    using namespace bicopter;
    const Axis axis = axis_from_string(axis_name);
    DoubleIntegratorPlant plant = plant_from_params(BicopterParams{}, axis);
    if (plant_gain > 0.0) plant.gain = plant_gain;

    DesiredCharacteristic want;
    if (!chr.empty()) {
        want = DesiredCharacteristic::from_coefficients(chr[0], chr[1]);
    } else if (zeta > 0.0 && wn > 0.0) {
        want = DesiredCharacteristic::from_damping(zeta, wn);
    } else {
        throw ConfigError("tune needs --char c1 c0 or both --zeta and --wn");
    }
    const PdGains g = gains_from_characteristic(plant, want);
    const auto p = poles(want.c1, want.c0);

    std::printf("axis=%s plant=%.4f/s^2 char=s^2%+.6gs%+.6g\n", to_string(axis), plant.gain,
                want.c1, want.c0);
    std::printf("K_p=%.4f K_d=%.4f\n", g.kp, g.kd);
    std::printf("poles: %s %s\n", format_pole(p[0]).c_str(), format_pole(p[1]).c_str());

    if (!step_path.empty()) {
        const double dt = 0.0028;
        const auto analytic = cltf_step_response(plant, g.kp, g.kd, duration, dt);
        const auto simulated = simulate_step_response(plant, g.kp, g.kd, duration, dt);
        std::ofstream out(step_path);
        if (!out) throw std::runtime_error("cannot open '" + step_path + "' for writing");
        out << "t,analytic,rk4\n";
        char buf[96];
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.6f,%.9f,%.9f\n", analytic[i].t, analytic[i].y,
                          simulated[i].y);
            out << buf;
        }
    }
    return kExitOk;
}

int cmd_serve(const std::string& source, bicopter::ServeOptions options)
{
    bicopter::Server server(resolve_scenario(source), options);
    const unsigned short port = server.start();
    std::printf("serving ws://%s:%u (decimation %d, speed %g)\n", options.address.c_str(),
                static_cast<unsigned>(port), options.decimation, options.speed);
    std::fflush(stdout);
    server.wait_for_signal();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bicopter attitude-control simulator"};
    app.require_subcommand(1);

    std::string run_source, out_path, report_path;
    auto* run = app.add_subcommand("run", "Run a scenario file or built-in preset");
    run->add_option("scenario", run_source, "Scenario JSON path or preset name")->required();
    run->add_option("--out", out_path, "Telemetry CSV output");
    run->add_option("--report", report_path, "RMSE report JSON output");

    std::string axis_name = "roll";
    std::vector<double> chr;
    double zeta = 0.0, wn = 0.0, plant_gain = 0.0, step_duration = 1.0;
    std::string step_path;
    auto* tune = app.add_subcommand("tune", "PD gains by pole placement");
    tune->add_option("--axis", axis_name, "roll, pitch or yaw");
    auto* char_opt =
        tune->add_option("--char", chr, "Characteristic coefficients c1 c0")->expected(2);
    auto* zeta_opt = tune->add_option("--zeta", zeta, "Damping ratio");
    auto* wn_opt = tune->add_option("--wn", wn, "Natural frequency, rad/s");
    char_opt->excludes(zeta_opt)->excludes(wn_opt);
    tune->add_option("--plant-gain", plant_gain, "Override the plant gain b");
    tune->add_option("--step", step_path, "Write the closed-loop step response CSV");
    tune->add_option("--duration", step_duration, "Step response length, s");

    auto* presets = app.add_subcommand("presets", "List built-in scenarios");

    std::string serve_source;
    bicopter::ServeOptions serve_opts;
    bool fast_forward = false;
    auto* serve = app.add_subcommand("serve", "Live session over a websocket");
    serve->add_option("scenario", serve_source, "Scenario JSON path or preset name")->required();
    serve->add_option("--port", serve_opts.port, "TCP port, 0 picks one")->required();
    serve->add_option("--address", serve_opts.address, "Bind address");
    serve->add_option("--decimation", serve_opts.decimation, "Ticks per telemetry frame");
    serve->add_option("--speed", serve_opts.speed, "Pacing factor against wall clock");
    serve->add_flag("--fast-forward", fast_forward, "Run unpaced");
    serve->add_flag("--paused", serve_opts.start_paused, "Start paused");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitConfig;
    }

    try {
        if (*run) return cmd_run(run_source, out_path, report_path);
        if (*tune) {
            return cmd_tune(axis_name, chr, zeta, wn, plant_gain, step_path, step_duration);
        }
        if (*presets) {
            for (const auto& name : bicopter::preset_names()) std::printf("%s\n", name.c_str());
            return kExitOk;
        }
        if (*serve) {
            if (fast_forward) serve_opts.speed = 0.0;
            return cmd_serve(serve_source, serve_opts);
        }
    } catch (const bicopter::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
