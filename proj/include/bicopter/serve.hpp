#pragma once

// Live session over a websocket. The simulation thread owns the Simulation;
// inbound commands are queued FIFO and applied between ticks, outbound
// telemetry is broadcast as immutable JSON snapshots.
//
// Outbound: telemetry, ack, error. Inbound: set_gains, set_wind,
// set_setpoint, pause, resume, reset.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "bicopter/control.hpp"
#include "bicopter/errors.hpp"
#include "bicopter/scenario.hpp"
#include "bicopter/simulation.hpp"

namespace bicopter {

struct ServeOptions {
    std::string address{"127.0.0.1"};
    unsigned short port{8765};  // 0 picks a free port
    int decimation{10};         // ticks per telemetry frame
    double speed{1.0};          // wall-clock pacing factor; 0 runs unpaced
    bool start_paused{false};

    void validate() const
    {
        if (decimation < 1) throw ConfigError("decimation must be >= 1");
        if (!(speed >= 0.0)) throw ConfigError("speed must be >= 0");
    }
};

namespace serve_detail {

using nlohmann::json;

inline json gains_json(const PidGains& g) { return {{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}}; }

inline json gain_set_json(const GainSet& g)
{
    return {{"roll", gains_json(g.roll)},
            {"pitch", gains_json(g.pitch)},
            {"yaw", gains_json(g.yaw)},
            {"altitude", gains_json(g.altitude)}};
}

inline double require_number(const json& msg, const char* key)
{
    if (!msg.contains(key) || !msg[key].is_number()) {
        throw ConfigError(std::string("field '") + key + "' must be a number");
    }
    const double v = msg[key].get<double>();
    if (!std::isfinite(v)) throw ConfigError(std::string("field '") + key + "' must be finite");
    return v;
}

inline std::string require_string(const json& msg, const char* key)
{
    if (!msg.contains(key) || !msg[key].is_string()) {
        throw ConfigError(std::string("field '") + key + "' must be a string");
    }
    return msg[key].get<std::string>();
}

}  // namespace serve_detail

// A parsed inbound command, with the tick that was next when it arrived.
struct ServeCommand {
    nlohmann::json message;
    std::int64_t receipt_tick{0};
    std::function<void(std::string)> reply;
};

class LiveSession {
public:
    using json = nlohmann::json;

    LiveSession(Scenario scenario, ServeOptions options)
        : sim_(std::move(scenario)), options_(options), paused_(options.start_paused)
    {
        options_.validate();
    }

    // Applies one command and returns the reply. Must run between ticks.
    json apply(const json& msg, std::int64_t receipt_tick)
    {
        using namespace serve_detail;
        std::string type;
        try {
            if (!msg.is_object()) throw ConfigError("message must be a JSON object");
            type = require_string(msg, "type");
            if (type == "set_gains") {
                const Axis axis = axis_from_string(require_string(msg, "axis"));
                PidGains g = sim_.gains()[axis];
                if (msg.contains("preset")) {
                    g = GainSet::preset(require_string(msg, "preset"))[axis];
                }
                if (msg.contains("kp")) g.kp = require_number(msg, "kp");
                if (msg.contains("ki")) g.ki = require_number(msg, "ki");
                if (msg.contains("kd")) g.kd = require_number(msg, "kd");
                sim_.set_gains(axis, g);
            } else if (type == "set_wind") {
                sim_.set_wind_knots(require_number(msg, "knots"));
            } else if (type == "set_setpoint") {
                const Axis axis = axis_from_string(require_string(msg, "axis"));
                const char* key = axis == Axis::altitude ? "m" : "deg";
                sim_.set_setpoint(axis, require_number(msg, key));
            } else if (type == "pause") {
                paused_ = true;
            } else if (type == "resume") {
                paused_ = false;
            } else if (type == "reset") {
                sim_.reset();
                last_.reset();
                diverged_ = false;
            } else {
                throw ConfigError("unknown message type '" + type + "'");
            }
        } catch (const std::exception& e) {
            json err{{"type", "error"}, {"message", e.what()}, {"receipt_tick", receipt_tick}};
            if (!type.empty()) err["command"] = type;
            if (msg.is_object() && msg.contains("id")) err["id"] = msg["id"];
            return err;
        }
        json ack{{"type", "ack"},
                 {"command", type},
                 {"receipt_tick", receipt_tick},
                 {"effect_tick", sim_.next_tick()},
                 {"state", state_json()}};
        if (msg.contains("id")) ack["id"] = msg["id"];
        return ack;
    }

    // Advances one tick unless paused or diverged. Returns the error frame
    // on divergence.
    std::optional<json> advance()
    {
        if (paused_ || diverged_) return std::nullopt;
        try {
            last_ = sim_.tick();
        } catch (const DivergenceError& e) {
            diverged_ = true;
            paused_ = true;
            return json{{"type", "error"}, {"message", e.what()}, {"tick", e.tick()}};
        }
        return std::nullopt;
    }

    json telemetry() const
    {
        json j{{"type", "telemetry"}, {"state", state_json()}};
        if (last_) {
            const TelemetryRecord& r = *last_;
            j["k"] = r.k;
            j["t"] = r.t;
            j["true"] = {r.phi_true, r.theta_true, r.psi_true};
            j["est"] = {r.phi_est, r.theta_est, r.psi_est};
            j["sp"] = {r.phi_sp, r.theta_sp, r.psi_sp};
            j["u"] = {r.u_roll, r.u_pitch, r.u_yaw, r.u_alt};
            j["thr"] = {r.thr_right, r.thr_left};
            j["srv"] = {r.srv_right, r.srv_left};
            j["wind_mps"] = r.wind_mps;
            j["sat_flags"] = r.sat_flags;
        } else {
            j["k"] = nullptr;
        }
        return j;
    }

    json state_json() const
    {
        const Setpoints sp = sim_.setpoints_at(static_cast<double>(sim_.next_tick()) *
                                               sim_.scenario().dt);
        return {{"next_tick", sim_.next_tick()},
                {"paused", paused_},
                {"diverged", diverged_},
                {"gains", serve_detail::gain_set_json(sim_.gains())},
                {"wind_knots", sim_.wind_knots()},
                {"setpoints",
                 {{"roll", rad2deg(sp.roll)},
                  {"pitch", rad2deg(sp.pitch)},
                  {"yaw", rad2deg(sp.yaw)},
                  {"altitude", sp.altitude}}}};
    }

    bool paused() const { return paused_; }
    std::int64_t next_tick() const { return sim_.next_tick(); }
    const Simulation& simulation() const { return sim_; }
    const ServeOptions& options() const { return options_; }

private:
    Simulation sim_;
    ServeOptions options_;
    bool paused_{false};
    bool diverged_{false};
    std::optional<TelemetryRecord> last_;
};

class Server {
    using tcp = boost::asio::ip::tcp;

public:
    Server(Scenario scenario, ServeOptions options)
        : session_(std::move(scenario), options),
          options_(options),
          acceptor_(boost::asio::make_strand(ioc_))
    {
    }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;
    ~Server() { stop(); }

    // Binds, starts the network and simulation threads and returns the
    // bound port.
    unsigned short start()
    {
        const tcp::endpoint ep{boost::asio::ip::make_address(options_.address), options_.port};
        acceptor_.open(ep.protocol());
        acceptor_.set_option(boost::asio::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen(boost::asio::socket_base::max_listen_connections);
        port_ = acceptor_.local_endpoint().port();
        latest_ = session_.telemetry().dump();
        running_ = true;
        do_accept();
        net_thread_ = std::thread([this] { ioc_.run(); });
        sim_thread_ = std::thread([this] { sim_loop(); });
        return port_;
    }

    void stop()
    {
        if (!running_.exchange(false)) return;
        wake_.notify_all();
        if (sim_thread_.joinable()) sim_thread_.join();
        boost::asio::post(acceptor_.get_executor(), [this] {
            boost::beast::error_code ec;
            acceptor_.close(ec);
            std::lock_guard lock(clients_mutex_);
            for (auto& c : clients_) c->close();
        });
        // let close frames go out
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        ioc_.stop();
        if (net_thread_.joinable()) net_thread_.join();
        std::lock_guard lock(clients_mutex_);
        clients_.clear();
    }

    // Blocks until SIGINT or SIGTERM, then stops.
    void wait_for_signal()
    {
        boost::asio::io_context sig_ioc;
        boost::asio::signal_set signals(sig_ioc, SIGINT, SIGTERM);
        signals.async_wait([](const boost::beast::error_code&, int) {});
        sig_ioc.run();
        stop();
    }

    unsigned short port() const { return port_; }
    std::int64_t next_tick() const { return next_tick_.load(); }

private:
    class Connection : public std::enable_shared_from_this<Connection> {
    public:
        Connection(tcp::socket&& socket, Server& server)
            : ws_(std::move(socket)), server_(server)
        {
        }

        void run()
        {
            boost::asio::dispatch(ws_.get_executor(),
                                  [self = this->shared_from_this()] { self->on_run(); });
        }

        // Thread-safe. Droppable frames are discarded when the client lags.
        void send(std::string text, bool droppable)
        {
            boost::asio::post(ws_.get_executor(), [self = this->shared_from_this(),
                                                   text = std::move(text), droppable]() mutable {
                if (droppable && self->outbox_.size() >= kMaxBacklog) return;
                self->outbox_.push_back(std::move(text));
                if (self->outbox_.size() == 1) self->do_write();
            });
        }

        void close()
        {
            boost::asio::post(ws_.get_executor(), [self = this->shared_from_this()] {
                self->ws_.async_close(boost::beast::websocket::close_code::normal,
                                      [self](const boost::beast::error_code&) {});
            });
        }

    private:
        static constexpr std::size_t kMaxBacklog = 4096;

        void on_run()
        {
            namespace websocket = boost::beast::websocket;
            ws_.set_option(
                websocket::stream_base::timeout::suggested(boost::beast::role_type::server));
            ws_.async_accept([self = this->shared_from_this()](const boost::beast::error_code& ec) {
                if (ec) return;
                self->server_.attach(self);
                self->do_read();
            });
        }

        void do_read()
        {
            ws_.async_read(buffer_, [self = this->shared_from_this()](
                                        const boost::beast::error_code& ec, std::size_t) {
                if (ec) {
                    self->server_.detach(self);
                    return;
                }
                std::string text = boost::beast::buffers_to_string(self->buffer_.data());
                self->buffer_.consume(self->buffer_.size());
                self->server_.enqueue(std::move(text), self);
                self->do_read();
            });
        }

        void do_write()
        {
            ws_.text(true);
            ws_.async_write(boost::asio::buffer(outbox_.front()),
                            [self = this->shared_from_this()](const boost::beast::error_code& ec,
                                                              std::size_t) {
                                if (ec) {
                                    self->outbox_.clear();
                                    self->server_.detach(self);
                                    return;
                                }
                                self->outbox_.pop_front();
                                if (!self->outbox_.empty()) self->do_write();
                            });
        }

        boost::beast::websocket::stream<boost::beast::tcp_stream> ws_;
        boost::beast::flat_buffer buffer_;
        std::deque<std::string> outbox_;
        Server& server_;
    };

    void do_accept()
    {
        acceptor_.async_accept(boost::asio::make_strand(ioc_),
                               [this](const boost::beast::error_code& ec, tcp::socket socket) {
                                   if (ec) return;
                                   std::make_shared<Connection>(std::move(socket), *this)->run();
                                   if (running_) do_accept();
                               });
    }

    void attach(const std::shared_ptr<Connection>& c)
    {
        std::string snapshot;
        {
            std::lock_guard lock(clients_mutex_);
            clients_.insert(c);
            snapshot = latest_;
        }
        c->send(std::move(snapshot), false);
    }

    void detach(const std::shared_ptr<Connection>& c)
    {
        std::lock_guard lock(clients_mutex_);
        clients_.erase(c);
    }

    void enqueue(std::string text, const std::shared_ptr<Connection>& from)
    {
        std::weak_ptr<Connection> weak = from;
        const std::int64_t receipt = next_tick_.load();
        nlohmann::json msg = nlohmann::json::parse(text, nullptr, false);
        auto reply = [weak](std::string out) {
            if (auto c = weak.lock()) c->send(std::move(out), false);
        };
        if (msg.is_discarded()) {
            reply(nlohmann::json{{"type", "error"},
                                 {"message", "malformed JSON"},
                                 {"receipt_tick", receipt}}
                      .dump());
            return;
        }
        {
            std::lock_guard lock(queue_mutex_);
            commands_.push_back({std::move(msg), receipt, std::move(reply)});
        }
        wake_.notify_all();
    }

    void broadcast(const nlohmann::json& frame, bool droppable)
    {
        std::string text = frame.dump();
        std::vector<std::shared_ptr<Connection>> targets;
        {
            std::lock_guard lock(clients_mutex_);
            if (frame["type"] == "telemetry") latest_ = text;
            targets.assign(clients_.begin(), clients_.end());
        }
        for (auto& c : targets) c->send(text, droppable);
    }

    // Applies queued commands; true if any were applied.
    bool drain()
    {
        std::deque<ServeCommand> batch;
        {
            std::lock_guard lock(queue_mutex_);
            batch.swap(commands_);
        }
        for (auto& cmd : batch) {
            cmd.reply(session_.apply(cmd.message, cmd.receipt_tick).dump());
        }
        next_tick_ = session_.next_tick();
        return !batch.empty();
    }

    void sim_loop()
    {
        using clock = std::chrono::steady_clock;
        const double dt = session_.simulation().scenario().dt;
        const double speed = options_.speed;
        const auto tick_period = std::chrono::duration<double>(speed > 0.0 ? dt / speed : 0.0);
        const auto heartbeat = std::chrono::duration<double>(
            std::max(0.02, speed > 0.0 ? options_.decimation * dt / speed : 0.1));
        auto origin = clock::now();
        std::int64_t paced = 0;

        while (running_) {
            if (drain()) {
                // commands can change pause state; restart pacing from now
                origin = clock::now();
                paced = 0;
            }
            if (session_.paused()) {
                std::unique_lock lock(queue_mutex_);
                const bool woke = wake_.wait_for(lock, heartbeat, [this] {
                    return !running_ || !commands_.empty();
                });
                lock.unlock();
                if (!woke) broadcast(session_.telemetry(), true);
                origin = clock::now();
                paced = 0;
                continue;
            }
            if (speed > 0.0) {
                const auto deadline =
                    origin + std::chrono::duration_cast<clock::duration>(tick_period * paced);
                const auto now = clock::now();
                if (now < deadline) {
                    std::unique_lock lock(queue_mutex_);
                    wake_.wait_until(lock, deadline,
                                     [this] { return !running_ || !commands_.empty(); });
                    continue;
                }
                if (now - deadline > std::chrono::milliseconds(250)) {
                    // fell far behind; drop the backlog instead of bursting
                    origin = now;
                    paced = 0;
                }
            }
            if (auto err = session_.advance()) {
                broadcast(*err, false);
            }
            ++paced;
            next_tick_ = session_.next_tick();
            if (next_tick_ % options_.decimation == 0) {
                broadcast(session_.telemetry(), true);
            }
        }
    }

    LiveSession session_;
    ServeOptions options_;
    boost::asio::io_context ioc_;
    tcp::acceptor acceptor_;
    unsigned short port_{0};
    std::atomic<bool> running_{false};
    std::atomic<std::int64_t> next_tick_{0};

    std::mutex queue_mutex_;
    std::condition_variable wake_;
    std::deque<ServeCommand> commands_;

    std::mutex clients_mutex_;
    std::set<std::shared_ptr<Connection>> clients_;
    std::string latest_;

    std::thread net_thread_;
    std::thread sim_thread_;
};

}  // namespace bicopter
