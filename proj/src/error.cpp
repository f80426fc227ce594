#include "dicomdrm/error.hpp"

namespace dicomdrm {

auto to_string(ErrorCode code) -> std::string_view {
    switch (code) {
        case ErrorCode::truncated: return "truncated";
        case ErrorCode::missing_magic: return "missing_magic";
        case ErrorCode::unsupported_transfer_syntax: return "unsupported_transfer_syntax";
        case ErrorCode::malformed: return "malformed";
        case ErrorCode::value_too_long: return "value_too_long";
        case ErrorCode::not_an_annotation: return "not_an_annotation";
        case ErrorCode::sbv_capacity: return "sbv_capacity";
        case ErrorCode::invalid_reference: return "invalid_reference";
        case ErrorCode::not_a_reference: return "not_a_reference";
        case ErrorCode::unreachable: return "unreachable";
        case ErrorCode::authorization_rejected: return "authorization_rejected";
        case ErrorCode::policy_violation: return "policy_violation";
        case ErrorCode::invalid_policy: return "invalid_policy";
        case ErrorCode::counter_overflow: return "counter_overflow";
        case ErrorCode::decryption_failed: return "decryption_failed";
        case ErrorCode::ciphertext_too_short: return "ciphertext_too_short";
        case ErrorCode::entropy_unavailable: return "entropy_unavailable";
        case ErrorCode::rsa_key_too_small: return "rsa_key_too_small";
        case ErrorCode::invalid_key: return "invalid_key";
        case ErrorCode::malformed_license: return "malformed_license";
        case ErrorCode::unknown_algorithm: return "unknown_algorithm";
        case ErrorCode::not_authorized: return "not_authorized";
        case ErrorCode::license_key_mismatch: return "license_key_mismatch";
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::crypto_failure: return "crypto_failure";
    }
    return "unknown";
}

}  // namespace dicomdrm
