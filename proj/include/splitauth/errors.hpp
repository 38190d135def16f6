// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace splitauth {

/// The protocol's numbered error taxonomy. Codes are stable wire/log
/// identifiers; everything a node refuses to do maps onto one of these.
enum class ErrorCode {
    Cod100,   // sign-up for a username the dealer already holds
    Cod150,   // dealer forwards a username the service already holds
    Cod170,   // client asked the service before the dealer's forward arrived
    Cod400,   // client's MC differs from the dealer-forwarded copy
    Cod600,   // login for an unregistered username
    Cod700,   // abscissa digest mismatch at a shareholder
    Cod750,   // shareholder's own consistency check exposes a bad dealing
    Cod800,   // too few shares collected to attempt reconstruction
    Cod830,   // tampered shares detected, but >= t valid ones remain
    Cod850,   // tampered shares leave fewer than t valid ones
    Cod860,   // rebuilt secret differs from the client-sent one
    Cod2000,  // final check: MS does not open under the reported k'
    Cod2400,  // final check: MC does not open to the reported blinded value
    Cod2600,  // final check: reported MC' differs from the client's MC'
};

enum class Fatality {
    NonFatal,      // log, count suspicion, continue
    RequestFatal,  // this request dies; the system is unaffected
    Fatal,         // the session halts, nothing rotates
};

constexpr std::array<ErrorCode, 14> kAllErrorCodes = {
    ErrorCode::Cod100,  ErrorCode::Cod150,  ErrorCode::Cod170, ErrorCode::Cod400,
    ErrorCode::Cod600,  ErrorCode::Cod700,  ErrorCode::Cod750, ErrorCode::Cod800,
    ErrorCode::Cod830,  ErrorCode::Cod850,  ErrorCode::Cod860, ErrorCode::Cod2000,
    ErrorCode::Cod2400, ErrorCode::Cod2600,
};

inline Fatality classify_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::Cod700:
        case ErrorCode::Cod750:
        case ErrorCode::Cod830:
            return Fatality::NonFatal;
        case ErrorCode::Cod100:
        case ErrorCode::Cod150:
        case ErrorCode::Cod170:
            return Fatality::RequestFatal;
        case ErrorCode::Cod400:
        case ErrorCode::Cod600:
        case ErrorCode::Cod800:
        case ErrorCode::Cod850:
        case ErrorCode::Cod860:
        case ErrorCode::Cod2000:
        case ErrorCode::Cod2400:
        case ErrorCode::Cod2600:
            return Fatality::Fatal;
    }
    throw std::invalid_argument("classify_error: unknown code");
}

inline std::string error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::Cod100: return "COD100";
        case ErrorCode::Cod150: return "COD150";
        case ErrorCode::Cod170: return "COD170";
        case ErrorCode::Cod400: return "COD400";
        case ErrorCode::Cod600: return "COD600";
        case ErrorCode::Cod700: return "COD700";
        case ErrorCode::Cod750: return "COD750";
        case ErrorCode::Cod800: return "COD800";
        case ErrorCode::Cod830: return "COD830";
        case ErrorCode::Cod850: return "COD850";
        case ErrorCode::Cod860: return "COD860";
        case ErrorCode::Cod2000: return "COD2000";
        case ErrorCode::Cod2400: return "COD2400";
        case ErrorCode::Cod2600: return "COD2600";
    }
    throw std::invalid_argument("error_code_name: unknown code");
}

inline std::optional<ErrorCode> parse_error_code(const std::string& name) {
    for (ErrorCode c : kAllErrorCodes)
        if (error_code_name(c) == name) return c;
    return std::nullopt;
}

inline int error_code_number(ErrorCode code) {
    switch (code) {
        case ErrorCode::Cod100: return 100;
        case ErrorCode::Cod150: return 150;
        case ErrorCode::Cod170: return 170;
        case ErrorCode::Cod400: return 400;
        case ErrorCode::Cod600: return 600;
        case ErrorCode::Cod700: return 700;
        case ErrorCode::Cod750: return 750;
        case ErrorCode::Cod800: return 800;
        case ErrorCode::Cod830: return 830;
        case ErrorCode::Cod850: return 850;
        case ErrorCode::Cod860: return 860;
        case ErrorCode::Cod2000: return 2000;
        case ErrorCode::Cod2400: return 2400;
        case ErrorCode::Cod2600: return 2600;
    }
    throw std::invalid_argument("error_code_number: unknown code");
}

struct ProtocolError {
    ErrorCode code;
    std::string role;
    std::string username;
    std::string detail;
};

/// The reconstruction phase runs seven verifications, each owned by one
/// operation and reported under one code. Checks five and six test the same
/// equations the dealer re-runs in its final triple, so they share those
/// codes from the other side of the wire.
struct ReconstructionCheck {
    int number;
    const char* operation;
    ErrorCode code;
};

constexpr std::array<ReconstructionCheck, 7> kReconstructionChecks = {{
    {1, "shareholder_release", ErrorCode::Cod700},
    {2, "shareholder_release", ErrorCode::Cod750},
    {3, "dealer_reconstruct", ErrorCode::Cod830},
    {4, "dealer_reconstruct", ErrorCode::Cod860},
    {5, "service_verify_login", ErrorCode::Cod2400},
    {6, "client_verify_service", ErrorCode::Cod2000},
    {7, "dealer_final_checks", ErrorCode::Cod2600},
}};

}  // namespace splitauth
