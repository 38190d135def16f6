// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "splitauth/crypto.hpp"
#include "splitauth/encoding.hpp"

namespace splitauth {

struct StoreCorrupt : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Append-only record-per-line file. Each line is `<checksum> <json>` where
/// the checksum is the first 16 hex chars of SHA-256 over the json payload;
/// a truncated or edited line refuses to load. Records are keyed by
/// (kind, key), latest record wins. Single writer, in-memory map for reads.
class RecordStore {
  public:
    RecordStore() = default;

    RecordStore(RecordStore&& other) noexcept {
        std::lock_guard<std::mutex> g(other.mu_);
        path_ = std::move(other.path_);
        records_ = std::move(other.records_);
    }

    RecordStore& operator=(RecordStore&& other) noexcept {
        if (this != &other) {
            std::scoped_lock g(mu_, other.mu_);
            path_ = std::move(other.path_);
            records_ = std::move(other.records_);
        }
        return *this;
    }

    explicit RecordStore(std::string path) : path_(std::move(path)) {
        if (path_.empty()) return;
        std::ifstream in(path_);
        if (!in) return;  // fresh store
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            lineno++;
            if (line.empty()) continue;
            auto sp = line.find(' ');
            if (sp == std::string::npos)
                throw StoreCorrupt(path_ + ": malformed line " + std::to_string(lineno));
            std::string sum = line.substr(0, sp);
            std::string body = line.substr(sp + 1);
            if (checksum(body) != sum)
                throw StoreCorrupt(path_ + ": checksum mismatch at line " + std::to_string(lineno));
            nlohmann::json rec = nlohmann::json::parse(body);
            apply(rec);
        }
    }

    void put(const std::string& kind, const std::string& key, nlohmann::json value) {
        std::lock_guard<std::mutex> lock(mu_);
        nlohmann::json rec = {{"kind", kind}, {"key", key}, {"value", std::move(value)}};
        append_line(rec);
        apply(rec);
    }

    void erase(const std::string& kind, const std::string& key) {
        std::lock_guard<std::mutex> lock(mu_);
        nlohmann::json rec = {{"kind", kind}, {"key", key}, {"value", nullptr}};
        append_line(rec);
        apply(rec);
    }

    std::optional<nlohmann::json> get(const std::string& kind, const std::string& key) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = records_.find(make_key(kind, key));
        if (it == records_.end()) return std::nullopt;
        return it->second;
    }

    std::map<std::string, nlohmann::json> all(const std::string& kind) const {
        std::lock_guard<std::mutex> lock(mu_);
        std::map<std::string, nlohmann::json> out;
        std::string prefix = kind + "\x1f";
        for (const auto& [k, v] : records_)
            if (k.rfind(prefix, 0) == 0) out[k.substr(prefix.size())] = v;
        return out;
    }

    /// Raw persisted bytes, for the leakage audits.
    std::string raw_contents() const {
        std::lock_guard<std::mutex> lock(mu_);
        std::string out;
        for (const auto& [k, v] : records_) out += k + v.dump() + "\n";
        return out;
    }

    const std::string& path() const { return path_; }

  private:
    static std::string make_key(const std::string& kind, const std::string& key) {
        return kind + "\x1f" + key;
    }

    static std::string checksum(const std::string& body) {
        return hex_encode(sha256(body)).substr(0, 16);
    }

    void apply(const nlohmann::json& rec) {
        std::string k = make_key(rec.at("kind").get<std::string>(), rec.at("key").get<std::string>());
        if (rec.at("value").is_null())
            records_.erase(k);
        else
            records_[k] = rec.at("value");
    }

    void append_line(const nlohmann::json& rec) {
        if (path_.empty()) return;  // in-memory store (simnet)
        std::ofstream out(path_, std::ios::app);
        if (!out) throw std::runtime_error("cannot append to store: " + path_);
        std::string body = rec.dump();
        out << checksum(body) << ' ' << body << '\n';
        out.flush();
        if (!out) throw std::runtime_error("store write failed: " + path_);
    }

    std::string path_;
    std::map<std::string, nlohmann::json> records_;
    mutable std::mutex mu_;
};

}  // namespace splitauth
