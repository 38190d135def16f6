// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <memory>
#include <thread>

#include "splitauth/protocol/client.hpp"
#include "splitauth/protocol/dealer.hpp"
#include "splitauth/protocol/logger.hpp"
#include "splitauth/protocol/service.hpp"
#include "splitauth/protocol/shareholder.hpp"

namespace splitauth {

constexpr int kWireTimeoutSec = 5;

inline uint64_t wall_ms() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::system_clock::now().time_since_epoch())
                                     .count());
}

namespace detail {

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd(o.fd) { o.fd = -1; }
    ~Fd() {
        if (fd >= 0) ::close(fd);
    }
};

inline std::pair<std::string, uint16_t> split_addr(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("address needs host:port: " + addr);
    return {addr.substr(0, colon), static_cast<uint16_t>(std::stoul(addr.substr(colon + 1)))};
}

inline bool send_all(int fd, const uint8_t* data, size_t len) {
    while (len > 0) {
        ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n <= 0) return false;
        data += n;
        len -= static_cast<size_t>(n);
    }
    return true;
}

inline bool recv_all(int fd, uint8_t* data, size_t len) {
    while (len > 0) {
        ssize_t n = ::recv(fd, data, len, 0);
        if (n <= 0) return false;
        data += n;
        len -= static_cast<size_t>(n);
    }
    return true;
}

inline std::optional<Message> read_frame(int fd) {
    uint8_t header[4];
    if (!recv_all(fd, header, 4)) return std::nullopt;
    uint32_t len = parse_frame_length(header);
    if (len == 0 || len > kMaxFrameLen) return std::nullopt;
    Bytes body(len);
    if (!recv_all(fd, body.data(), len)) return std::nullopt;
    try {
        return Message::parse(body);
    } catch (...) {
        return std::nullopt;
    }
}

inline bool write_frame(int fd, const Message& m) {
    Bytes framed = frame_message(m);
    return send_all(fd, framed.data(), framed.size());
}

}  // namespace detail

/// One framed request/response per call, a fresh connection each time.
/// Stateless, so safe to share across threads.
class TcpTransport : public Transport {
  public:
    Message call(const std::string& peer, const Message& request) override {
        auto [host, port] = detail::split_addr(peer);
        detail::Fd sock(::socket(AF_INET, SOCK_STREAM, 0));
        if (sock.fd < 0) throw TransportTimeout("socket() failed");
        timeval tv{kWireTimeoutSec, 0};
        setsockopt(sock.fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
        setsockopt(sock.fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(port);
        if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1)
            throw TransportTimeout("bad peer address: " + peer);
        if (::connect(sock.fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0)
            throw TransportTimeout("cannot reach " + peer);
        if (!detail::write_frame(sock.fd, request)) throw TransportTimeout("send to " + peer + " failed");
        auto reply = detail::read_frame(sock.fd);
        if (!reply) throw TransportTimeout("no reply from " + peer);
        return *reply;
    }
};

/// Accepts framed requests and feeds them to the handler, one thread per
/// connection; connections may pipeline multiple requests.
class TcpServer {
  public:
    using Handler = std::function<Message(const Message&)>;

    TcpServer(const std::string& listen_addr, Handler handler)
        : handler_(std::move(handler)) {
        auto [host, port] = detail::split_addr(listen_addr);
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
        int one = 1;
        setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(port);
        if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
            ::close(listen_fd_);
            throw std::runtime_error("bad listen address: " + listen_addr);
        }
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 ||
            ::listen(listen_fd_, 64) != 0) {
            ::close(listen_fd_);
            throw std::runtime_error("cannot bind " + listen_addr);
        }
        sockaddr_in bound{};
        socklen_t blen = sizeof(bound);
        getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
        char buf[INET_ADDRSTRLEN];
        inet_ntop(AF_INET, &bound.sin_addr, buf, sizeof(buf));
        address_ = std::string(buf) + ":" + std::to_string(ntohs(bound.sin_port));
    }

    void start() {
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    void stop() {
        if (stopping_.exchange(true)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        if (accept_thread_.joinable()) accept_thread_.join();
        ::close(listen_fd_);
        std::vector<std::thread> workers;
        {
            std::lock_guard<std::mutex> g(mu_);
            workers.swap(workers_);
        }
        for (auto& w : workers)
            if (w.joinable()) w.join();
    }

    ~TcpServer() { stop(); }

    const std::string& address() const { return address_; }

  private:
    void accept_loop() {
        while (!stopping_) {
            pollfd pfd{listen_fd_, POLLIN, 0};
            int rv = ::poll(&pfd, 1, 200);
            if (stopping_) break;
            if (rv <= 0) continue;
            int conn = ::accept(listen_fd_, nullptr, nullptr);
            if (conn < 0) continue;
            timeval tv{kWireTimeoutSec, 0};
            setsockopt(conn, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
            setsockopt(conn, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
            std::lock_guard<std::mutex> g(mu_);
            workers_.emplace_back([this, conn] { serve_connection(conn); });
        }
    }

    void serve_connection(int conn) {
        detail::Fd guard(conn);
        while (!stopping_) {
            auto request = detail::read_frame(conn);
            if (!request) break;
            Message reply;
            try {
                reply = handler_(*request);
            } catch (const std::exception& e) {
                reply = make_plain_error(*request, std::string("internal error: ") + e.what());
            }
            if (!detail::write_frame(conn, reply)) break;
        }
    }

    Handler handler_;
    int listen_fd_ = -1;
    std::string address_;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex mu_;
    std::vector<std::thread> workers_;
};

/// Local fallback when no log sink address is configured: records append to
/// a JSON-lines file next to the store.
class FileLogSink : public LogSink {
  public:
    explicit FileLogSink(std::string path) : path_(std::move(path)) {}

    void emit(const LogRecord& record) override {
        std::lock_guard<std::mutex> g(mu_);
        std::ofstream out(path_, std::ios::app);
        if (out) out << record.to_json().dump() << "\n";
    }

  private:
    std::string path_;
    std::mutex mu_;
};

struct NodeConfig {
    std::string role;  // dealer | shareholder | service | logger
    std::string listen = "127.0.0.1:0";
    std::string params_path;
    std::string store_path;
    std::string log_sink;  // logger address; empty -> file fallback
    size_t t = 0;
    size_t n = 0;
    std::vector<std::string> shareholders;
    std::string service;
    std::string dealer;
    std::optional<uint64_t> seed;  // test mode only
    bool backup_keys = false;

    static NodeConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read config: " + path);
        auto kv = parse_kv_file(in);
        NodeConfig c;
        if (kv.count("role")) c.role = kv["role"];
        if (kv.count("listen")) c.listen = kv["listen"];
        if (kv.count("params")) c.params_path = kv["params"];
        if (kv.count("store")) c.store_path = kv["store"];
        if (kv.count("log_sink")) c.log_sink = kv["log_sink"];
        if (kv.count("t")) c.t = std::stoul(kv["t"]);
        if (kv.count("n")) c.n = std::stoul(kv["n"]);
        if (kv.count("service")) c.service = kv["service"];
        if (kv.count("dealer")) c.dealer = kv["dealer"];
        if (kv.count("seed")) c.seed = std::stoull(kv["seed"]);
        if (kv.count("backup_keys")) c.backup_keys = kv["backup_keys"] == "true";
        if (kv.count("shareholders")) {
            std::string s = kv["shareholders"];
            size_t pos = 0;
            while (pos != std::string::npos) {
                size_t comma = s.find(',', pos);
                std::string item = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
                if (!item.empty()) c.shareholders.push_back(item);
                pos = comma == std::string::npos ? comma : comma + 1;
            }
        }
        return c;
    }
};

/// A daemon assembled from config: engine, store, transport, log sink, and
/// the TCP server in front of it.
class NodeRuntime {
  public:
    explicit NodeRuntime(const NodeConfig& config) : config_(config) {
        if (config.role != "logger") {
            if (config.params_path.empty()) throw std::runtime_error("node needs --params");
            params_ = load_params(config.params_path);
            if (!validate_params(params_))
                throw std::runtime_error("refusing to start: invalid group parameters");
        }
        if (config.seed)  // test mode; locked because server workers share it
            rng_ = std::make_unique<LockedRng>(std::make_unique<SeededRng>(*config.seed));
        else
            rng_ = std::make_unique<SystemRng>();  // RAND_bytes is thread-safe
        if (!config.log_sink.empty())
            log_ = std::make_unique<TransportLogSink>(&net_, config.log_sink);
        else if (config.role != "logger")
            log_ = std::make_unique<FileLogSink>(config.store_path.empty()
                                                     ? config.role + ".log"
                                                     : config.store_path + ".log");
        else
            log_ = std::make_unique<NullLog>();

        NodeEnv env;
        env.net = &net_;
        env.log = log_.get();
        env.rng = rng_.get();
        env.now_ms = [] { return wall_ms(); };

        PeerDirectory peers;
        peers.dealer = config.dealer;
        peers.service = config.service;
        peers.logger = config.log_sink;
        peers.shareholders = config.shareholders;

        RecordStore store(config.store_path);  // throws StoreCorrupt -> startup abort
        if (config.role == "dealer") {
            if (config.n == 0 || config.shareholders.size() != config.n)
                throw std::runtime_error("dealer config: n and shareholder list disagree");
            dealer_ = std::make_unique<DealerEngine>(params_, config.t, config.n, peers, env,
                                                     std::move(store));
            server_ = std::make_unique<TcpServer>(
                config.listen, [this](const Message& m) { return dealer_->handle(m); });
        } else if (config.role == "shareholder") {
            holder_ = std::make_unique<ShareholderEngine>("shareholder", params_, env,
                                                          std::move(store));
            server_ = std::make_unique<TcpServer>(
                config.listen, [this](const Message& m) { return holder_->handle(m); });
        } else if (config.role == "service") {
            ServiceEngine::Options opts;
            opts.backup_keys = config.backup_keys;
            service_ = std::make_unique<ServiceEngine>(params_, config.t, config.n, peers, env,
                                                       std::move(store), opts);
            server_ = std::make_unique<TcpServer>(
                config.listen, [this](const Message& m) { return service_->handle(m); });
        } else if (config.role == "logger") {
            logger_ = std::make_unique<LoggerEngine>(std::move(store));
            server_ = std::make_unique<TcpServer>(
                config.listen, [this](const Message& m) { return logger_->handle(m); });
        } else {
            throw std::runtime_error("unknown role: " + config.role);
        }
    }

    void start() { server_->start(); }
    void stop() { server_->stop(); }

    const std::string& address() const { return server_->address(); }
    const NodeConfig& config() const { return config_; }

    LoggerEngine* logger() { return logger_.get(); }
    ServiceEngine* service() { return service_.get(); }
    DealerEngine* dealer() { return dealer_.get(); }
    ShareholderEngine* shareholder() { return holder_.get(); }

  private:
    NodeConfig config_;
    GroupParams params_;
    TcpTransport net_;
    std::unique_ptr<RandomSource> rng_;
    std::unique_ptr<LogSink> log_;
    std::unique_ptr<DealerEngine> dealer_;
    std::unique_ptr<ShareholderEngine> holder_;
    std::unique_ptr<ServiceEngine> service_;
    std::unique_ptr<LoggerEngine> logger_;
    std::unique_ptr<TcpServer> server_;
};

/// Rehydrate the administrator's report from a logger store file.
inline std::string report_from_store(const std::string& store_path) {
    RecordStore store(store_path);
    std::vector<std::pair<uint64_t, LogRecord>> recs;
    for (const auto& [key, value] : store.all("log"))
        recs.emplace_back(std::stoull(key), LogRecord::from_json(value));
    std::sort(recs.begin(), recs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<LogRecord> ordered;
    for (auto& [k, r] : recs) ordered.push_back(std::move(r));
    return logger_report(ordered);
}

}  // namespace splitauth
