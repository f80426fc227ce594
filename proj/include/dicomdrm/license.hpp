/**
 * @file license.hpp
 * @brief XML-Encryption shaped authorization licenses.
 *
 * A license wraps the session key once per recipient with RSA and carries the
 * protection manifest encrypted under the session key:
 *
 * @code
 * <article>
 * <EncryptedData ...>
 * <EncryptionMethod Algorithm="...#aes256-cbc"/>
 * <KeyInfo ...>
 * <EncryptedKey ...>
 *   <EncryptionMethod Algorithm="...#rsa-1_5" />
 *   <KeyInfo ...><KeyName>sessionkey</KeyName></KeyInfo>
 *   <CipherData><CipherValue>wrapped key, recipient 1</CipherValue></CipherData>
 *   <CipherData><CipherValue>wrapped key, recipient 2</CipherValue></CipherData>
 * </EncryptedKey>
 * </KeyInfo>
 * <CipherData><CipherValue>IV || AES-CBC(manifest)</CipherValue></CipherData>
 * </EncryptedData>
 * </article>
 * @endcode
 *
 * There is no signature; anyone holding the session key can mint a license.
 */
#pragma once

#include "dicomdrm/crypto.hpp"
#include "dicomdrm/partial_drm.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dicomdrm {

inline constexpr std::string_view xmlenc_namespace = "http://www.w3.org/2001/04/xmlenc#";
inline constexpr std::string_view xmldsig_namespace = "http://www.w3.org/2000/09/xmldsig#";
inline constexpr int min_rsa_bits = 2048;

enum class KeyWrap { rsa_1_5, rsa_oaep };

[[nodiscard]] auto wrap_uri(KeyWrap wrap) -> std::string_view;
[[nodiscard]] auto key_wrap_from_uri(std::string_view uri) -> KeyWrap;

struct WrappedKey {
    std::string key_name = "sessionkey";
    std::string wrap_algorithm{wrap_uri(KeyWrap::rsa_1_5)};
    /// Base64, one per recipient.
    std::vector<std::string> cipher_values;

    friend auto operator==(const WrappedKey&, const WrappedKey&) -> bool = default;
};

struct License {
    std::string data_algorithm{algorithm_uri(DataCipher::aes256_cbc)};
    std::vector<WrappedKey> wrapped_keys;
    /// Base64 of IV || AES-CBC(manifest).
    std::string manifest_cipher;

    [[nodiscard]] auto recipient_count() const -> std::size_t;

    friend auto operator==(const License&, const License&) -> bool = default;
};

struct IssueOptions {
    KeyWrap wrap = KeyWrap::rsa_1_5;
    std::string key_name = "sessionkey";
};

/// Build the license structure. Throws Error(rsa_key_too_small) for keys under
/// 2048 bits and Error(invalid_argument) without recipients.
[[nodiscard]] auto make_license(const SessionKey& sk, std::span<const crypto::RsaPublicKey> recipients,
                                std::span<const std::uint8_t> manifest, const IssueOptions& options = {})
    -> License;

/// Render a license as XML text.
[[nodiscard]] auto to_xml(const License& lic) -> std::string;

[[nodiscard]] auto issue_license(const SessionKey& sk, std::span<const crypto::RsaPublicKey> recipients,
                                 std::span<const std::uint8_t> manifest, const IssueOptions& options = {})
    -> std::string;

/// Throws Error(malformed_license) or Error(unknown_algorithm).
[[nodiscard]] auto parse_license(std::string_view xml) -> License;

struct Authorization {
    SessionKey session_key;
    Bytes manifest;
};

/**
 * Unwrap the session key with `key` and decrypt the manifest. Throws
 * Error(not_authorized) when no wrapped value opens with this key and
 * Error(license_key_mismatch) when the key opens but the manifest does not.
 */
[[nodiscard]] auto authorize(const License& lic, const crypto::RsaPrivateKey& key) -> Authorization;

}  // namespace dicomdrm
