// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splitauth/protocol/common.hpp"

namespace splitauth {

/// Collects every actor's routine and error reports; the administrator's
/// report is generated from what landed here.
class LoggerEngine {
  public:
    explicit LoggerEngine(RecordStore store) : store_(std::move(store)) {
        seq_ = store_.all("log").size();  // continue numbering across restarts
    }

    Message handle(const Message& req) {
        if (req.type != msg::kLog) return make_plain_error(req, "unknown message type: " + req.type);
        LogRecord rec = LogRecord::from_json(req.payload);
        mem_.emit(rec);
        std::lock_guard<std::mutex> g(mu_);
        store_.put("log", std::to_string(seq_++), rec.to_json());
        return make_reply(req, msg::kAck);
    }

    std::vector<LogRecord> records() const { return mem_.records(); }

    size_t count_code(ErrorCode code) const { return mem_.count_code(code); }

    std::string report() const { return logger_report(mem_.records()); }

    RecordStore& store() { return store_; }

  private:
    RecordStore store_;
    MemoryLog mem_;
    uint64_t seq_ = 0;
    std::mutex mu_;
};

/// Forwards log records to the logger node over whatever transport the host
/// runs on. Losing a log record must never kill the protocol action.
class TransportLogSink : public LogSink {
  public:
    TransportLogSink(Transport* net, std::string logger_addr)
        : net_(net), logger_addr_(std::move(logger_addr)) {}

    void emit(const LogRecord& record) override {
        Message m;
        m.type = msg::kLog;
        m.session_id = record.session_id;
        m.username = record.username;
        m.payload = record.to_json();
        try {
            net_->call(logger_addr_, m);
        } catch (const TransportTimeout&) {
            // log sink unreachable: drop, the protocol action must proceed
        }
    }

  private:
    Transport* net_;
    std::string logger_addr_;
};

}  // namespace splitauth
