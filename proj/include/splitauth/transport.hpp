// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

#include "splitauth/message.hpp"

namespace splitauth {

/// Raised when a peer is unreachable or a call exceeds its deadline. Protocol
/// errors are not exceptions: they come back as error-typed messages.
struct TransportTimeout : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Blocking request/response channel to named peers. The simnet, the TCP
/// node layer, and the direct in-process harness all implement this.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual Message call(const std::string& peer, const Message& request) = 0;
};

}  // namespace splitauth
