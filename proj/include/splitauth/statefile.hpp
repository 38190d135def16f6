// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "splitauth/protocol/client.hpp"

namespace splitauth {

/// Write-to-temp-then-rename with owner-only permissions: a crash mid-login
/// leaves either the old or the new state, both whole.
inline void save_credential_state(const std::string& path, const CredentialState& state) {
    std::string tmp = path + ".tmp";
    {
        int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
        if (fd < 0) throw std::runtime_error("cannot write state file: " + tmp);
        std::string body = state.to_json().dump(2) + "\n";
        const char* p = body.data();
        size_t left = body.size();
        while (left > 0) {
            ssize_t w = ::write(fd, p, left);
            if (w <= 0) {
                ::close(fd);
                throw std::runtime_error("state write failed: " + tmp);
            }
            p += w;
            left -= static_cast<size_t>(w);
        }
        ::fsync(fd);
        ::close(fd);
    }
    if (::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot install state file: " + path);
}

inline CredentialState load_credential_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read state file: " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error("malformed state file: " + std::string(e.what()));
    }
    return CredentialState::from_json(j);
}

inline bool state_mode_is_private(const std::string& path) {
    struct stat st{};
    if (::stat(path.c_str(), &st) != 0) return false;
    return (st.st_mode & (S_IRWXG | S_IRWXO)) == 0;
}

/// One command per state file at a time.
class StateLock {
  public:
    explicit StateLock(const std::string& state_path) : path_(state_path + ".lock") {
        fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0600);
        if (fd_ < 0) throw std::runtime_error("cannot open lock file: " + path_);
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            fd_ = -1;
            throw std::runtime_error("another command holds the state file: " + state_path);
        }
    }

    ~StateLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }

    StateLock(const StateLock&) = delete;
    StateLock& operator=(const StateLock&) = delete;

  private:
    std::string path_;
    int fd_ = -1;
};

}  // namespace splitauth
