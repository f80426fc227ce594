#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dicomdrm {

enum class ErrorCode {
    // dicom_core
    truncated,
    missing_magic,
    unsupported_transfer_syntax,
    malformed,
    value_too_long,
    // annotation
    not_an_annotation,
    sbv_capacity,
    invalid_reference,
    not_a_reference,
    unreachable,
    authorization_rejected,
    // policy
    policy_violation,
    invalid_policy,
    // partial_drm
    counter_overflow,
    decryption_failed,
    ciphertext_too_short,
    entropy_unavailable,
    // license
    rsa_key_too_small,
    invalid_key,
    malformed_license,
    unknown_algorithm,
    not_authorized,
    license_key_mismatch,
    // misc
    io_error,
    invalid_argument,
    crypto_failure,
};

[[nodiscard]] auto to_string(ErrorCode code) -> std::string_view;

/// Every failure raised by the library. The message is a single line.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] auto code() const noexcept -> ErrorCode { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dicomdrm
