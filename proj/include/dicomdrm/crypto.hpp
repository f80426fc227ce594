// Thin RAII layer over OpenSSL for the primitives the protection scheme uses:
// CSPRNG bytes, AES-CBC with PKCS#7 padding, RSA key wrapping and base64.
#pragma once

#include "dicomdrm/dicom.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

struct evp_pkey_st;

namespace dicomdrm::crypto {

inline constexpr std::size_t aes_block_size = 16;
using Iv = std::array<std::uint8_t, aes_block_size>;

/// Throws Error(entropy_unavailable) if the generator cannot be seeded.
[[nodiscard]] auto random_bytes(std::size_t count) -> Bytes;
[[nodiscard]] auto random_iv() -> Iv;

/// Key must be 16 or 32 bytes. Returns ciphertext only (no IV).
[[nodiscard]] auto aes_cbc_encrypt(std::span<const std::uint8_t> key, const Iv& iv,
                                   std::span<const std::uint8_t> plaintext) -> Bytes;
/// Returns nullopt on a padding failure.
[[nodiscard]] auto aes_cbc_decrypt(std::span<const std::uint8_t> key, const Iv& iv,
                                   std::span<const std::uint8_t> ciphertext) -> std::optional<Bytes>;

[[nodiscard]] auto base64_encode(std::span<const std::uint8_t> data) -> std::string;
/// Whitespace is ignored. Returns nullopt for invalid input.
[[nodiscard]] auto base64_decode(std::string_view text) -> std::optional<Bytes>;

enum class RsaPadding { pkcs1_v15, oaep };

class RsaPublicKey {
public:
    [[nodiscard]] static auto from_pem(std::string_view pem) -> RsaPublicKey;
    [[nodiscard]] static auto from_pem_file(const std::string& path) -> RsaPublicKey;

    [[nodiscard]] auto to_pem() const -> std::string;
    [[nodiscard]] auto bits() const -> int;
    /// Modulus length in bytes.
    [[nodiscard]] auto size() const -> std::size_t;

    [[nodiscard]] auto encrypt(std::span<const std::uint8_t> data, RsaPadding padding) const -> Bytes;

private:
    friend class RsaPrivateKey;
    explicit RsaPublicKey(std::shared_ptr<evp_pkey_st> key) : key_(std::move(key)) {}
    std::shared_ptr<evp_pkey_st> key_;
};

class RsaPrivateKey {
public:
    [[nodiscard]] static auto generate(int bits) -> RsaPrivateKey;
    [[nodiscard]] static auto from_pem(std::string_view pem) -> RsaPrivateKey;
    [[nodiscard]] static auto from_pem_file(const std::string& path) -> RsaPrivateKey;

    [[nodiscard]] auto to_pem() const -> std::string;
    [[nodiscard]] auto public_key() const -> RsaPublicKey;
    [[nodiscard]] auto bits() const -> int;

    /// nullopt when the ciphertext was not produced for this key.
    [[nodiscard]] auto decrypt(std::span<const std::uint8_t> data, RsaPadding padding) const
        -> std::optional<Bytes>;

private:
    explicit RsaPrivateKey(std::shared_ptr<evp_pkey_st> key) : key_(std::move(key)) {}
    std::shared_ptr<evp_pkey_st> key_;
};

}  // namespace dicomdrm::crypto
