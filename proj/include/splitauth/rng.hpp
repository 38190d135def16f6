// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <stdexcept>

#include <openssl/rand.h>
#include <openssl/sha.h>

#include "splitauth/bigint.hpp"

namespace splitauth {

struct EntropyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Byte source behind every random draw in the system. One instance must not
/// be shared across threads without external synchronization.
class RandomSource {
  public:
    virtual ~RandomSource() = default;
    virtual void fill(uint8_t* out, size_t len) = 0;

    Bytes bytes(size_t len) {
        Bytes b(len);
        fill(b.data(), len);
        return b;
    }
};

/// OS entropy via OpenSSL. Failure is reported, never silently absorbed.
class SystemRng final : public RandomSource {
  public:
    void fill(uint8_t* out, size_t len) override {
        if (len == 0) return;
        if (RAND_bytes(out, static_cast<int>(len)) != 1)
            throw EntropyError("system entropy source failed");
    }
};

/// Serializes access to a source that is not safe for concurrent draws.
/// Multithreaded hosts wrap their per-node deterministic sources in this.
class LockedRng final : public RandomSource {
  public:
    explicit LockedRng(std::unique_ptr<RandomSource> inner) : inner_(std::move(inner)) {}

    void fill(uint8_t* out, size_t len) override {
        std::lock_guard<std::mutex> g(mu_);
        inner_->fill(out, len);
    }

  private:
    std::unique_ptr<RandomSource> inner_;
    std::mutex mu_;
};

/// Deterministic SHA-256 counter generator for tests and simulation runs.
/// Identical seeds yield identical streams on every platform.
class SeededRng final : public RandomSource {
  public:
    explicit SeededRng(uint64_t seed) : seed_(seed) {}

    void fill(uint8_t* out, size_t len) override {
        while (len > 0) {
            if (avail_ == 0) refill();
            size_t take = len < avail_ ? len : avail_;
            std::memcpy(out, block_.data() + (block_.size() - avail_), take);
            avail_ -= take;
            out += take;
            len -= take;
        }
    }

  private:
    void refill() {
        uint8_t in[16];
        for (int i = 0; i < 8; i++) in[i] = static_cast<uint8_t>(seed_ >> (8 * i));
        for (int i = 0; i < 8; i++) in[8 + i] = static_cast<uint8_t>(counter_ >> (8 * i));
        SHA256(in, sizeof(in), block_.data());
        counter_++;
        avail_ = block_.size();
    }

    uint64_t seed_;
    uint64_t counter_ = 0;
    std::array<uint8_t, 32> block_{};
    size_t avail_ = 0;
};

}  // namespace splitauth
