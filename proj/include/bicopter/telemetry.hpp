#pragma once

// Per-tick telemetry, the CSV column contract and RMSE reporting.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bicopter/attitude_math.hpp"
#include "bicopter/errors.hpp"

namespace bicopter {

struct TelemetryRecord {
    std::int64_t k{0};
    double t{0.0};
    double phi_true{0.0}, theta_true{0.0}, psi_true{0.0};  // deg
    double phi_est{0.0}, theta_est{0.0}, psi_est{0.0};     // deg
    double phi_sp{0.0}, theta_sp{0.0}, psi_sp{0.0};        // deg
    double u_roll{0.0}, u_pitch{0.0}, u_yaw{0.0}, u_alt{0.0};
    double thr_right{0.0}, thr_left{0.0};
    double srv_right{0.0}, srv_left{0.0};  // deg
    double wind_mps{0.0};
    unsigned sat_flags{0};
    // not part of the CSV contract
    double x{0.0}, y{0.0}, z{0.0};
};

inline constexpr const char* kCsvHeader =
    "k,t,phi_true,theta_true,psi_true,phi_est,theta_est,psi_est,phi_sp,theta_sp,psi_sp,"
    "u_roll,u_pitch,u_yaw,u_alt,thr_R,thr_L,srv_R,srv_L,wind_mps,sat_flags";

inline std::string csv_row(const TelemetryRecord& r)
{
    char buf[640];
    const int n = std::snprintf(
        buf, sizeof(buf),
        "%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,"
        "%.6f,%.6f,%.6f,%u",
        static_cast<long long>(r.k), r.t, r.phi_true, r.theta_true, r.psi_true, r.phi_est,
        r.theta_est, r.psi_est, r.phi_sp, r.theta_sp, r.psi_sp, r.u_roll, r.u_pitch, r.u_yaw,
        r.u_alt, r.thr_right, r.thr_left, r.srv_right, r.srv_left, r.wind_mps, r.sat_flags);
    return std::string(buf, static_cast<std::size_t>(n));
}

inline void write_csv(std::ostream& out, std::span<const TelemetryRecord> telemetry)
{
    out << kCsvHeader << '\n';
    for (const auto& r : telemetry) {
        out << csv_row(r) << '\n';
    }
}

inline void write_csv(const std::string& path, std::span<const TelemetryRecord> telemetry)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    write_csv(out, telemetry);
    out.flush();
    if (!out) {
        throw std::runtime_error("failed writing telemetry to '" + path + "'");
    }
}

inline double rmse(std::span<const double> series, std::span<const double> reference)
{
    if (series.empty()) throw std::invalid_argument("rmse of an empty series");
    if (series.size() != reference.size()) {
        throw std::invalid_argument("rmse: series and reference lengths differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double d = series[i] - reference[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(series.size()));
}

struct RmseReport {
    double roll{0.0};   // deg
    double pitch{0.0};
    double yaw{0.0};
    double window_start{0.0};
    double window_end{0.0};
    std::size_t samples{0};
    std::string preset;
    std::uint64_t seed{0};

    nlohmann::json to_json() const
    {
        return {{"roll", roll},
                {"pitch", pitch},
                {"yaw", yaw},
                {"window", {window_start, window_end}},
                {"samples", samples},
                {"preset", preset},
                {"seed", seed}};
    }
};

// True attitude against setpoint over [start, end]; yaw deviations wrap.
inline RmseReport rmse_report(std::span<const TelemetryRecord> telemetry, double start,
                              double end)
{
    std::vector<double> roll, roll_sp, pitch, pitch_sp, yaw_err;
    for (const auto& r : telemetry) {
        if (r.t < start || r.t > end) continue;
        roll.push_back(r.phi_true);
        roll_sp.push_back(r.phi_sp);
        pitch.push_back(r.theta_true);
        pitch_sp.push_back(r.theta_sp);
        yaw_err.push_back(rad2deg(wrap_angle(deg2rad(r.psi_true - r.psi_sp))));
    }
    RmseReport rep;
    rep.window_start = start;
    rep.window_end = telemetry.empty() ? start : std::min(end, telemetry.back().t);
    rep.samples = roll.size();
    if (roll.empty()) {
        throw std::invalid_argument("rmse window contains no telemetry");
    }
    rep.roll = rmse(roll, roll_sp);
    rep.pitch = rmse(pitch, pitch_sp);
    const std::vector<double> zeros(yaw_err.size(), 0.0);
    rep.yaw = rmse(yaw_err, zeros);
    return rep;
}

}  // namespace bicopter
