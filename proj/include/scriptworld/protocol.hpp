#pragma once

// Newline-delimited JSON bridge between an external agent and the engine.
//
// Every message is one object {"type", "session", "seq", "payload"}. The
// server numbers its own messages 1, 2, 3, ... per session. A client action
// must carry the seq of the observation it answers; anything else is
// answered with BAD_STATE and the current observation again. The schema is
// written up in docs/protocol.md.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <functional>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "scriptworld/engine.hpp"

namespace scriptworld {

inline constexpr std::string_view kProtocolVersion = "scriptworld-wire/1";

namespace wire {
inline constexpr std::string_view kBadJson = "BAD_JSON";
inline constexpr std::string_view kBadState = "BAD_STATE";
inline constexpr std::string_view kBadIndex = "BAD_INDEX";
inline constexpr std::string_view kBadConfig = "BAD_CONFIG";

/// Never throws on odd bytes inside strings.
inline std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }
} // namespace wire

/// Protocol state machine for one connection, independent of transport.
class Session {
public:
    enum class Phase { AwaitHello, AwaitConfigure, Ready, InEpisode, Closed };

    using EpisodeHook = std::function<void(const GameState&)>;

    Session(std::shared_ptr<const GameAssets> assets, std::string id, EpisodeHook on_episode_end = {})
        : assets_(std::move(assets)), id_(std::move(id)), on_episode_end_(std::move(on_episode_end)) {}

    Phase phase() const noexcept { return phase_; }
    bool closed() const noexcept { return phase_ == Phase::Closed; }
    const std::string& id() const noexcept { return id_; }

    /// One input line in, zero or more reply lines out. Never throws for bad
    /// client input.
    std::vector<std::string> handle(std::string_view line) {
        out_.clear();
        if (closed()) return out_;
        json msg;
        try {
            msg = json::parse(line);
        } catch (const json::exception&) {
            error(wire::kBadJson, "line is not valid JSON");
            return out_;
        }
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
            error(wire::kBadJson, "message must be an object with a string 'type'");
            return out_;
        }
        const json payload = msg.contains("payload") ? msg["payload"] : json::object();
        if (!payload.is_object()) {
            error(wire::kBadJson, "payload must be an object");
            return out_;
        }
        const std::string type = msg["type"].get<std::string>();
        try {
            if (type == "hello") on_hello(payload);
            else if (type == "configure") on_configure(payload);
            else if (type == "reset") on_reset(payload);
            else if (type == "action") on_action(msg, payload);
            else if (type == "bye") on_bye();
            else error(wire::kBadJson, "unknown message type '" + type + "'");
        } catch (const Error& e) {
            error(wire::kBadState, e.what());
        }
        return out_;
    }

    /// Ends the session as if the client had said bye, without a reply.
    void close() { phase_ = Phase::Closed; }

private:
    void send(std::string_view type, json payload) {
        out_.push_back(wire::dump({{"type", type}, {"session", id_}, {"seq", ++seq_}, {"payload", std::move(payload)}}));
    }

    void error(std::string_view code, const std::string& message) {
        send("error", {{"code", code}, {"message", message}});
    }

    bool require(Phase p, std::string_view what) {
        if (phase_ == p) return true;
        error(wire::kBadState, std::string(what) + " not allowed now");
        return false;
    }

    void on_hello(const json&) {
        if (!require(Phase::AwaitHello, "hello")) return;
        phase_ = Phase::AwaitConfigure;
        send("hello", {{"protocol", kProtocolVersion},
                       {"engine_version", kEngineVersion},
                       {"scenario", assets_->scenario.title},
                       {"hints_available", assets_->hints.has_value()}});
    }

    void on_configure(const json& payload) {
        if (phase_ != Phase::AwaitConfigure && phase_ != Phase::Ready) {
            error(wire::kBadState, "configure not allowed now");
            return;
        }
        try {
            env_.emplace(assets_, config_from_json(payload));
        } catch (const ConfigError& e) {
            error(wire::kBadConfig, e.what());
            return;
        } catch (const SamplingError& e) {
            error(wire::kBadConfig, e.what());
            return;
        }
        episodes_ = 0;
        phase_ = Phase::Ready;
        send("configure", to_json(env_->config()));
    }

    void on_reset(const json& payload) {
        if (!require(Phase::Ready, "reset")) return;
        std::uint64_t seed = env_->config().seed;
        if (episodes_ > 0) seed = mix_seed(seed, episodes_);
        if (payload.contains("seed")) {
            if (!payload["seed"].is_number_unsigned()) {
                error(wire::kBadJson, "seed must be a non-negative integer");
                return;
            }
            seed = payload["seed"].get<std::uint64_t>();
        }
        auto [st, obs] = env_->new_game(seed);
        state_ = std::move(st);
        phase_ = Phase::InEpisode;
        send_observation();
    }

    void on_action(const json& msg, const json& payload) {
        if (!require(Phase::InEpisode, "action")) return;
        if (!msg.contains("seq") || !msg["seq"].is_number_integer() || msg["seq"].get<std::int64_t>() != obs_seq_) {
            error(wire::kBadState, "action must carry seq " + std::to_string(obs_seq_) + " of the latest observation");
            send_observation();
            return;
        }
        if (!payload.contains("index") || !payload["index"].is_number_integer()) {
            error(wire::kBadIndex, "payload.index must be an integer");
            return;
        }
        const auto index = payload["index"].get<std::int64_t>();
        const auto n = static_cast<std::int64_t>(state_->last_observation.choices.size());
        if (index < 0 || index >= n) {
            error(wire::kBadIndex, "index " + std::to_string(index) + " outside [0, " + std::to_string(n) + ")");
            return;
        }
        const StepResult res = env_->step(*state_, static_cast<std::size_t>(index));
        send("step_result", {{"reward", res.reward},
                             {"done", res.done},
                             {"reason", to_string(res.reason)},
                             {"score", state_->cumulative_reward}});
        if (!res.done) {
            send_observation();
            return;
        }
        send("episode_end", {{"episode", episodes_},
                             {"seed", state_->log.seed},
                             {"score", state_->cumulative_reward},
                             {"reason", to_string(state_->reason)},
                             {"steps", state_->step_index},
                             {"wrong", state_->wrong_total}});
        if (on_episode_end_) on_episode_end_(*state_);
        ++episodes_;
        phase_ = Phase::Ready;
    }

    void on_bye() {
        send("bye", json::object());
        phase_ = Phase::Closed;
    }

    void send_observation() {
        json payload = observation_to_wire(state_->last_observation);
        payload["step"] = state_->step_index;
        send("observation", std::move(payload));
        obs_seq_ = seq_;
    }

    std::shared_ptr<const GameAssets> assets_;
    std::string id_;
    EpisodeHook on_episode_end_;
    Phase phase_ = Phase::AwaitHello;
    std::int64_t seq_ = 0;
    std::int64_t obs_seq_ = -1;
    std::optional<Environment> env_;
    std::optional<GameState> state_;
    std::uint64_t episodes_ = 0;
    std::vector<std::string> out_;
};

/// Serves one session over a pair of streams until bye or end of input.
inline void serve_stream(std::shared_ptr<const GameAssets> assets, std::istream& in, std::ostream& out,
                         Session::EpisodeHook hook = {}, std::string session_id = "stdio") {
    Session s(std::move(assets), std::move(session_id), std::move(hook));
    std::string line;
    while (!s.closed() && std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        for (const auto& reply : s.handle(line)) out << reply << '\n';
        out.flush();
    }
}

// ---------------------------------------------------------------------------
// TCP

namespace detail {

inline bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

/// Blocking line reader over a socket.
class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    std::optional<std::string> next() {
        for (;;) {
            if (auto pos = buf_.find('\n'); pos != std::string::npos) {
                std::string line = buf_.substr(0, pos);
                buf_.erase(0, pos + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                if (buf_.empty()) return std::nullopt;
                return std::exchange(buf_, {});
            }
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int fd_;
    std::string buf_;
};

} // namespace detail

struct TcpOptions {
    std::string host = "127.0.0.1";
    /// 0 picks a free port; the bound port is reported through on_listening.
    std::uint16_t port = 0;
    std::function<void(std::uint16_t)> on_listening;
    Session::EpisodeHook on_episode_end;
    /// Stop after this many connections have been accepted and served.
    std::optional<std::size_t> max_connections;
};

/// Accepts connections until `stop` is set (checked every 100 ms) or the
/// connection budget is spent. One thread and one session per connection;
/// all sessions share the immutable assets.
inline void serve_tcp(std::shared_ptr<const GameAssets> assets, const TcpOptions& opt, const std::atomic<bool>& stop) {
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) throw Error(std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(opt.port);
    if (::inet_pton(AF_INET, opt.host.c_str(), &addr.sin_addr) != 1) {
        ::close(listener);
        throw ConfigError("bad IPv4 address '" + opt.host + "'");
    }
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listener, 16) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listener);
        throw Error("bind/listen on " + opt.host + ":" + std::to_string(opt.port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    if (opt.on_listening) opt.on_listening(ntohs(addr.sin_port));

    std::mutex mu;
    std::vector<int> open_fds;
    std::vector<std::thread> workers;
    std::size_t accepted = 0;
    while (!stop.load() && (!opt.max_connections || accepted < *opt.max_connections)) {
        pollfd pfd{listener, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 100);
        if (ready <= 0) continue;
        const int fd = ::accept(listener, nullptr, nullptr);
        if (fd < 0) continue;
        ++accepted;
        {
            std::lock_guard lock(mu);
            open_fds.push_back(fd);
        }
        workers.emplace_back([&, fd, n = accepted] {
            Session s(assets, "tcp-" + std::to_string(n), opt.on_episode_end);
            detail::LineReader reader(fd);
            while (!s.closed()) {
                auto line = reader.next();
                if (!line) break;
                if (text::trim(*line).empty()) continue;
                std::string batch;
                for (const auto& reply : s.handle(*line)) batch += reply + '\n';
                if (!detail::send_all(fd, batch)) break;
            }
            std::lock_guard lock(mu);
            ::shutdown(fd, SHUT_RDWR);
            ::close(fd);
            std::erase(open_fds, fd);
        });
    }
    ::close(listener);
    if (stop.load()) {
        std::lock_guard lock(mu);
        for (int fd : open_fds) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : workers) t.join();
}

// ---------------------------------------------------------------------------
// replay

struct ReplayVerdict {
    std::size_t steps = 0;
    std::string scenario;
    std::uint64_t seed = 0;
};

/// Re-runs a logged episode from its header (seed, config) and actions and
/// demands byte-identical output.
inline ReplayVerdict replay(std::string_view log_text, std::shared_ptr<const GameAssets> assets) {
    std::vector<std::string> lines;
    {
        std::istringstream in{std::string(log_text)};
        std::string line;
        while (std::getline(in, line))
            if (!text::trim(line).empty()) lines.push_back(line);
    }
    if (lines.empty()) throw ParseError("empty episode log");
    json header;
    try {
        header = json::parse(lines[0]).at("header");
    } catch (const json::exception& e) {
        throw ParseError(std::string("log header: ") + e.what());
    }
    const std::string version = header.value("engine_version", std::string());
    if (version != kEngineVersion)
        throw VersionMismatch("log written by '" + version + "', this engine is '" + std::string(kEngineVersion) + "'");
    const std::string title = header.value("scenario", std::string());
    if (title != assets->scenario.title)
        throw ConfigError("log is for scenario '" + title + "', loaded '" + assets->scenario.title + "'");

    GameConfig cfg = config_from_json(header.at("config"));
    const std::uint64_t seed = header.at("seed").get<std::uint64_t>();
    const Environment env(std::move(assets), cfg);
    auto [st, obs] = env.new_game(seed);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        StepRecord rec;
        try {
            rec = step_record_from_json(json::parse(lines[i]));
        } catch (const json::exception& e) {
            throw MismatchError(i - 1, "step " + std::to_string(i - 1) + " is not valid JSON: " + e.what());
        } catch (const ParseError& e) {
            throw MismatchError(i - 1, "step " + std::to_string(i - 1) + ": " + e.what());
        }
        if (st.done) throw MismatchError(i - 1, "log continues after the game ended");
        try {
            env.step(st, rec.action);
        } catch (const OutOfRange& e) {
            throw MismatchError(i - 1, "step " + std::to_string(i - 1) + ": " + e.what());
        }
    }
    std::istringstream regenerated{to_jsonl(transcript(st))};
    std::string line;
    for (std::size_t i = 0; std::getline(regenerated, line); ++i) {
        if (line == lines[i]) continue;
        if (i == 0) throw MismatchError(0, "header differs from its canonical form");
        throw MismatchError(i - 1, "first divergence at step " + std::to_string(i - 1));
    }
    return {lines.size() - 1, transcript(st).scenario, seed};
}

} // namespace scriptworld
