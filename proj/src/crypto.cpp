#include "dicomdrm/crypto.hpp"

#include "dicomdrm/error.hpp"

#include <openssl/bio.h>
#include <openssl/decoder.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>

#include <algorithm>
#include <cctype>

namespace dicomdrm::crypto {

namespace {

using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)>;
using PkeyCtx = std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)>;
using Bio = std::unique_ptr<BIO, decltype(&BIO_free)>;

auto openssl_message() -> std::string {
    const unsigned long code = ERR_get_error();
    ERR_clear_error();
    if (code == 0) {
        return "unknown OpenSSL error";
    }
    char buf[256];
    ERR_error_string_n(code, buf, sizeof buf);
    return buf;
}

[[noreturn]] void fail(const std::string& what) {
    throw Error(ErrorCode::crypto_failure, what + ": " + openssl_message());
}

auto wrap(EVP_PKEY* key) -> std::shared_ptr<evp_pkey_st> {
    return {key, &EVP_PKEY_free};
}

auto cipher_for(std::span<const std::uint8_t> key) -> const EVP_CIPHER* {
    switch (key.size()) {
        case 16: return EVP_aes_128_cbc();
        case 32: return EVP_aes_256_cbc();
        default:
            throw Error(ErrorCode::invalid_key,
                        "AES key must be 16 or 32 bytes, got " + std::to_string(key.size()));
    }
}

auto decode_pem(std::string_view pem, int selection) -> EVP_PKEY* {
    EVP_PKEY* pkey = nullptr;
    OSSL_DECODER_CTX* dctx =
        OSSL_DECODER_CTX_new_for_pkey(&pkey, "PEM", nullptr, "RSA", selection, nullptr, nullptr);
    if (dctx == nullptr) {
        fail("cannot create PEM decoder");
    }
    const auto* data = reinterpret_cast<const unsigned char*>(pem.data());
    std::size_t len = pem.size();
    const int ok = OSSL_DECODER_from_data(dctx, &data, &len);
    OSSL_DECODER_CTX_free(dctx);
    ERR_clear_error();
    if (ok != 1 || pkey == nullptr) {
        EVP_PKEY_free(pkey);
        return nullptr;
    }
    return pkey;
}

auto read_text(const std::string& path) -> std::string {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

auto bio_to_string(BIO* bio) -> std::string {
    char* data = nullptr;
    const long len = BIO_get_mem_data(bio, &data);
    return {data, static_cast<std::size_t>(len)};
}

auto set_padding(EVP_PKEY_CTX* ctx, RsaPadding padding) -> bool {
    const int mode = padding == RsaPadding::oaep ? RSA_PKCS1_OAEP_PADDING : RSA_PKCS1_PADDING;
    return EVP_PKEY_CTX_set_rsa_padding(ctx, mode) > 0;
}

}  // namespace

auto random_bytes(std::size_t count) -> Bytes {
    Bytes out(count);
    if (count > 0 && RAND_bytes(out.data(), static_cast<int>(count)) != 1) {
        throw Error(ErrorCode::entropy_unavailable, "random generator unavailable: " + openssl_message());
    }
    return out;
}

auto random_iv() -> Iv {
    Iv iv{};
    if (RAND_bytes(iv.data(), static_cast<int>(iv.size())) != 1) {
        throw Error(ErrorCode::entropy_unavailable, "random generator unavailable: " + openssl_message());
    }
    return iv;
}

auto aes_cbc_encrypt(std::span<const std::uint8_t> key, const Iv& iv, std::span<const std::uint8_t> plaintext)
    -> Bytes {
    const EVP_CIPHER* cipher = cipher_for(key);
    CipherCtx ctx(EVP_CIPHER_CTX_new(), &EVP_CIPHER_CTX_free);
    if (!ctx || EVP_EncryptInit_ex(ctx.get(), cipher, nullptr, key.data(), iv.data()) != 1) {
        fail("AES encrypt init");
    }
    Bytes out(plaintext.size() + aes_block_size);
    int len = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())) != 1) {
        fail("AES encrypt");
    }
    int tail = 0;
    if (EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &tail) != 1) {
        fail("AES encrypt final");
    }
    out.resize(static_cast<std::size_t>(len + tail));
    return out;
}

auto aes_cbc_decrypt(std::span<const std::uint8_t> key, const Iv& iv, std::span<const std::uint8_t> ciphertext)
    -> std::optional<Bytes> {
    const EVP_CIPHER* cipher = cipher_for(key);
    if (ciphertext.empty() || ciphertext.size() % aes_block_size != 0) {
        return std::nullopt;
    }
    CipherCtx ctx(EVP_CIPHER_CTX_new(), &EVP_CIPHER_CTX_free);
    if (!ctx || EVP_DecryptInit_ex(ctx.get(), cipher, nullptr, key.data(), iv.data()) != 1) {
        fail("AES decrypt init");
    }
    Bytes out(ciphertext.size() + aes_block_size);
    int len = 0;
    if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(), static_cast<int>(ciphertext.size())) !=
        1) {
        ERR_clear_error();
        return std::nullopt;
    }
    int tail = 0;
    if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &tail) != 1) {
        ERR_clear_error();
        return std::nullopt;
    }
    out.resize(static_cast<std::size_t>(len + tail));
    return out;
}

auto base64_encode(std::span<const std::uint8_t> data) -> std::string {
    std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

auto base64_decode(std::string_view text) -> std::optional<Bytes> {
    std::string clean;
    clean.reserve(text.size());
    for (const char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)) == 0) {
            clean.push_back(c);
        }
    }
    if (clean.size() % 4 != 0) {
        return std::nullopt;
    }
    if (clean.empty()) {
        return Bytes{};
    }
    const auto pad = static_cast<std::size_t>(std::count(clean.end() - 2, clean.end(), '='));
    Bytes out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) {
        return std::nullopt;
    }
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

// ---------------------------------------------------------------------------
// RSA
// ---------------------------------------------------------------------------

auto RsaPublicKey::from_pem(std::string_view pem) -> RsaPublicKey {
    EVP_PKEY* key = decode_pem(pem, EVP_PKEY_PUBLIC_KEY);
    if (key == nullptr) {
        // A private key file also carries the public half.
        key = decode_pem(pem, EVP_PKEY_KEYPAIR);
    }
    if (key == nullptr) {
        throw Error(ErrorCode::invalid_key, "not a PEM-encoded RSA public key");
    }
    return RsaPublicKey(wrap(key));
}

auto RsaPublicKey::from_pem_file(const std::string& path) -> RsaPublicKey {
    try {
        return from_pem(read_text(path));
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

auto RsaPublicKey::to_pem() const -> std::string {
    Bio bio(BIO_new(BIO_s_mem()), &BIO_free);
    if (!bio || PEM_write_bio_PUBKEY(bio.get(), key_.get()) != 1) {
        fail("cannot write public key");
    }
    return bio_to_string(bio.get());
}

auto RsaPublicKey::bits() const -> int { return EVP_PKEY_get_bits(key_.get()); }

auto RsaPublicKey::size() const -> std::size_t { return static_cast<std::size_t>(EVP_PKEY_get_size(key_.get())); }

auto RsaPublicKey::encrypt(std::span<const std::uint8_t> data, RsaPadding padding) const -> Bytes {
    PkeyCtx ctx(EVP_PKEY_CTX_new_from_pkey(nullptr, key_.get(), nullptr), &EVP_PKEY_CTX_free);
    if (!ctx || EVP_PKEY_encrypt_init(ctx.get()) != 1 || !set_padding(ctx.get(), padding)) {
        fail("RSA encrypt init");
    }
    std::size_t len = 0;
    if (EVP_PKEY_encrypt(ctx.get(), nullptr, &len, data.data(), data.size()) != 1) {
        fail("RSA encrypt");
    }
    Bytes out(len);
    if (EVP_PKEY_encrypt(ctx.get(), out.data(), &len, data.data(), data.size()) != 1) {
        fail("RSA encrypt");
    }
    out.resize(len);
    return out;
}

auto RsaPrivateKey::generate(int bits) -> RsaPrivateKey {
    EVP_PKEY* key = EVP_PKEY_Q_keygen(nullptr, nullptr, "RSA", static_cast<std::size_t>(bits));
    if (key == nullptr) {
        fail("RSA key generation");
    }
    return RsaPrivateKey(wrap(key));
}

auto RsaPrivateKey::from_pem(std::string_view pem) -> RsaPrivateKey {
    EVP_PKEY* key = decode_pem(pem, EVP_PKEY_KEYPAIR);
    if (key == nullptr) {
        throw Error(ErrorCode::invalid_key, "not a PEM-encoded RSA private key");
    }
    return RsaPrivateKey(wrap(key));
}

auto RsaPrivateKey::from_pem_file(const std::string& path) -> RsaPrivateKey {
    try {
        return from_pem(read_text(path));
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

auto RsaPrivateKey::to_pem() const -> std::string {
    Bio bio(BIO_new(BIO_s_mem()), &BIO_free);
    if (!bio || PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
        fail("cannot write private key");
    }
    return bio_to_string(bio.get());
}

auto RsaPrivateKey::public_key() const -> RsaPublicKey { return RsaPublicKey(key_); }

auto RsaPrivateKey::bits() const -> int { return EVP_PKEY_get_bits(key_.get()); }

auto RsaPrivateKey::decrypt(std::span<const std::uint8_t> data, RsaPadding padding) const -> std::optional<Bytes> {
    PkeyCtx ctx(EVP_PKEY_CTX_new_from_pkey(nullptr, key_.get(), nullptr), &EVP_PKEY_CTX_free);
    if (!ctx || EVP_PKEY_decrypt_init(ctx.get()) != 1 || !set_padding(ctx.get(), padding)) {
        fail("RSA decrypt init");
    }
    if (padding == RsaPadding::pkcs1_v15) {
        // Newer OpenSSL releases return random bytes instead of an error on a
        // bad PKCS#1 block; wrong-recipient detection needs the error.
        EVP_PKEY_CTX_ctrl_str(ctx.get(), "rsa_pkcs1_implicit_rejection", "0");
        ERR_clear_error();
    }
    std::size_t len = 0;
    if (EVP_PKEY_decrypt(ctx.get(), nullptr, &len, data.data(), data.size()) != 1) {
        ERR_clear_error();
        return std::nullopt;
    }
    Bytes out(len);
    if (EVP_PKEY_decrypt(ctx.get(), out.data(), &len, data.data(), data.size()) != 1) {
        ERR_clear_error();
        return std::nullopt;
    }
    out.resize(len);
    return out;
}

}  // namespace dicomdrm::crypto
