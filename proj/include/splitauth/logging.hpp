// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitauth/errors.hpp"

namespace splitauth {

/// What every actor reports to the logger: routine exchanges and errors,
/// append-only, grouped later into the administrator's report.
struct LogRecord {
    uint64_t timestamp_ms = 0;
    std::string role;
    std::string username;
    std::string session_id;
    std::string phase;  // "sharing" | "reconstruction" | "system"
    std::string event;
    std::optional<ErrorCode> code;
    std::string detail;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"ts", timestamp_ms}, {"role", role},     {"user", username},
                            {"session", session_id}, {"phase", phase}, {"event", event},
                            {"detail", detail}};
        if (code) j["code"] = error_code_name(*code);
        return j;
    }

    static LogRecord from_json(const nlohmann::json& j) {
        LogRecord r;
        r.timestamp_ms = j.value("ts", 0ull);
        r.role = j.value("role", "");
        r.username = j.value("user", "");
        r.session_id = j.value("session", "");
        r.phase = j.value("phase", "");
        r.event = j.value("event", "");
        r.detail = j.value("detail", "");
        if (j.contains("code"))
            r.code = parse_error_code(j.at("code").get<std::string>());
        return r;
    }
};

class LogSink {
  public:
    virtual ~LogSink() = default;
    virtual void emit(const LogRecord& record) = 0;
};

/// In-memory collector; the logger node wraps one of these around its store.
class MemoryLog : public LogSink {
  public:
    void emit(const LogRecord& record) override {
        std::lock_guard<std::mutex> lock(mu_);
        records_.push_back(record);
    }

    std::vector<LogRecord> records() const {
        std::lock_guard<std::mutex> lock(mu_);
        return records_;
    }

    size_t count_code(ErrorCode code) const {
        std::lock_guard<std::mutex> lock(mu_);
        size_t n = 0;
        for (const auto& r : records_)
            if (r.code && *r.code == code) n++;
        return n;
    }

  private:
    std::vector<LogRecord> records_;
    mutable std::mutex mu_;
};

class NullLog : public LogSink {
  public:
    void emit(const LogRecord&) override {}
};

// A runaway session cannot flood the report; extra records are counted but
// not printed.
constexpr size_t kMaxTraceEntriesPerSession = 64;

/// Human-readable administrator report: per-session ordered message traces
/// grouped by phase, then an error summary by code.
inline std::string logger_report(const std::vector<LogRecord>& records) {
    std::ostringstream out;
    for (const std::string phase : {"sharing", "reconstruction"}) {
        std::vector<std::string> order;
        std::map<std::string, std::vector<const LogRecord*>> sessions;
        for (const auto& r : records) {
            if (r.phase != phase) continue;
            if (!sessions.count(r.session_id)) order.push_back(r.session_id);
            sessions[r.session_id].push_back(&r);
        }
        if (order.empty()) continue;
        out << "=== " << (phase == "sharing" ? "Sharing" : "Reconstruction") << " phase ===\n";
        for (const auto& sid : order) {
            const auto& trace = sessions[sid];
            out << "session " << sid << " user=" << trace.front()->username << "\n";
            size_t shown = 0;
            for (const auto* r : trace) {
                if (shown++ == kMaxTraceEntriesPerSession) {
                    out << "  ... " << (trace.size() - shown + 1) << " more\n";
                    break;
                }
                out << "  " << shown << ". [" << r->role << "] " << r->event;
                if (r->code) out << " " << error_code_name(*r->code);
                if (!r->detail.empty()) out << " (" << r->detail << ")";
                out << "\n";
            }
        }
    }
    std::map<ErrorCode, size_t> counts;
    for (const auto& r : records)
        if (r.code) counts[*r.code]++;
    if (!counts.empty()) {
        out << "=== Errors ===\n";
        for (const auto& [code, n] : counts) {
            const char* klass = classify_error(code) == Fatality::NonFatal    ? "non-fatal"
                                : classify_error(code) == Fatality::RequestFatal ? "request-fatal"
                                                                                 : "fatal";
            out << error_code_name(code) << " x" << n << " (" << klass << ")\n";
        }
    }
    return out.str();
}

}  // namespace splitauth
