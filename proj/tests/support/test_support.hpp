// Shared fixtures and independent oracles for the test suites.
#pragma once

#include "dicomdrm/annotation.hpp"
#include "dicomdrm/crypto.hpp"
#include "dicomdrm/dicom.hpp"

#include <openssl/evp.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dicomdrm::testing {

inline auto bytes_of(std::string_view s) -> Bytes { return Bytes(s.begin(), s.end()); }

inline auto element(std::uint16_t g, std::uint16_t e, std::string_view vr, Bytes value) -> DataElement {
    return DataElement{Tag{g, e}, Vr(vr), std::move(value), false};
}

inline auto text(std::uint16_t g, std::uint16_t e, std::string_view vr, std::string_view value) -> DataElement {
    return element(g, e, vr, bytes_of(value));
}

inline auto us(std::uint16_t g, std::uint16_t e, std::uint16_t v) -> DataElement {
    return element(g, e, "US", Bytes{static_cast<std::uint8_t>(v & 0xFF), static_cast<std::uint8_t>(v >> 8)});
}

inline auto golden_dir() -> std::filesystem::path { return DICOMDRM_GOLDEN_DIR; }

inline auto golden(const std::string& name) -> Bytes { return read_file((golden_dir() / name).string()); }

inline auto file_meta() -> std::vector<DataElement> {
    return {
        element(0x0002, 0x0001, "OB", Bytes{0x00, 0x01}),
        text(0x0002, 0x0002, "UI", std::string_view("1.2.840.10008.5.1.4.1.1.7\0", 26)),
        text(0x0002, 0x0003, "UI", std::string_view("1.2.826.0.1.3680043.8.498.1\0", 28)),
        text(0x0002, 0x0010, "UI", std::string_view("1.2.840.10008.1.2.1\0", 20)),
        text(0x0002, 0x0012, "UI", std::string_view("1.2.826.0.1.3680043.8.498\0", 26)),
    };
}

inline auto pixel_data(std::size_t count = 16) -> DataElement {
    Bytes raw(count * 2);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = static_cast<std::uint8_t>((i * 37) & 0xFF);
    }
    return element(0x7FE0, 0x0010, "OW", std::move(raw));
}

/// Meta group, patient identity, UIDs, image description and pixel data.
inline auto image_fixture() -> Dataset {
    Dataset ds;
    ds.elements = file_meta();
    const std::vector<DataElement> body{
        text(0x0008, 0x0016, "UI", std::string_view("1.2.840.10008.5.1.4.1.1.7\0", 26)),
        text(0x0008, 0x0018, "UI", std::string_view("1.2.826.0.1.3680043.8.498.1\0", 28)),
        text(0x0008, 0x0060, "CS", "OT"),
        text(0x0010, 0x0010, "PN", "Doe^Jane"),
        text(0x0010, 0x0020, "LO", "PID-000042"),
        text(0x0010, 0x0030, "DA", "19700101"),
        text(0x0010, 0x0040, "CS", "F "),
        text(0x0020, 0x000D, "UI", std::string_view("1.2.826.0.1.3680043.8.498.2\0", 28)),
        text(0x0020, 0x000E, "UI", std::string_view("1.2.826.0.1.3680043.8.498.3\0", 28)),
        us(0x0028, 0x0002, 1),
        text(0x0028, 0x0004, "CS", "MONOCHROME2 "),
        us(0x0028, 0x0010, 4),
        us(0x0028, 0x0011, 4),
        us(0x0028, 0x0100, 16),
        us(0x0028, 0x0101, 12),
        us(0x0028, 0x0102, 11),
        us(0x0028, 0x0103, 0),
        pixel_data(),
    };
    ds.elements.insert(ds.elements.end(), body.begin(), body.end());
    return ds;
}

/**
 * Twelve elements: four never-encrypt UIDs and eight independently
 * encryptable ones (seven discretionary, one of them an annotation, plus
 * pixel data; no image description and no patient identity present).
 */
inline auto twelve_element_fixture() -> Dataset {
    Dataset ds;
    ds.elements = {
        text(0x0002, 0x0010, "UI", std::string_view("1.2.840.10008.1.2.1\0", 20)),
        text(0x0008, 0x0016, "UI", std::string_view("1.2.840.10008.5.1.4.1.1.7\0", 26)),
        text(0x0008, 0x0018, "UI", std::string_view("1.2.826.0.1.3680043.8.498.1\0", 28)),
        text(0x0008, 0x0020, "DA", "20120314"),
        text(0x0008, 0x0060, "CS", "CT"),
        text(0x0008, 0x0090, "PN", "Referring^Doctor"),
        text(0x0010, 0x1010, "AS", "042Y"),
        text(0x0018, 0x0015, "CS", "CHEST "),
        text(0x0020, 0x000D, "UI", std::string_view("1.2.826.0.1.3680043.8.498.2\0", 28)),
        element(0x0020, 0x0011, "IS", bytes_of("7 ")),
        encode_annotation({AnnotationKind::audio, 1, 120, 160, bytes_of(std::string_view("RIFF$\0\0\0WAVEfmt ", 16))}),
        pixel_data(),
    };
    return ds;
}

inline auto write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) -> void {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite(data.data(), 1, data.size(), f);
    std::fclose(f);
}

inline auto contains(std::span<const std::uint8_t> hay, std::span<const std::uint8_t> needle) -> bool {
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

/// Seeded IV source for reproducible encryption.
inline auto seeded_ivs(std::uint32_t seed) {
    return [rng = std::mt19937(seed)]() mutable {
        crypto::Iv iv{};
        for (auto& b : iv) {
            b = static_cast<std::uint8_t>(rng() & 0xFF);
        }
        return iv;
    };
}

/**
 * Decrypt an encrypted element value with raw OpenSSL calls, independent of
 * the library's crypto layer, and split the sealed record into its parts.
 */
struct UnsealedRecord {
    Tag tag;
    std::string vr;
    std::uint32_t vl = 0;
    Bytes value;
};

inline auto oracle_unseal(const Bytes& sealed, const Bytes& key) -> std::optional<UnsealedRecord> {
    if (sealed.size() < 32) {
        return std::nullopt;
    }
    const EVP_CIPHER* cipher = key.size() == 32 ? EVP_aes_256_cbc() : EVP_aes_128_cbc();
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    EVP_DecryptInit_ex(ctx, cipher, nullptr, key.data(), sealed.data());
    Bytes plain(sealed.size());
    int len = 0;
    int tail = 0;
    const bool ok = EVP_DecryptUpdate(ctx, plain.data(), &len, sealed.data() + 16, static_cast<int>(sealed.size() - 16)) == 1 &&
                    EVP_DecryptFinal_ex(ctx, plain.data() + len, &tail) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) {
        return std::nullopt;
    }
    plain.resize(static_cast<std::size_t>(len + tail));
    if (plain.size() < 10) {
        return std::nullopt;
    }
    UnsealedRecord r;
    r.tag = {static_cast<std::uint16_t>(plain[0] | plain[1] << 8), static_cast<std::uint16_t>(plain[2] | plain[3] << 8)};
    r.vr = std::string{static_cast<char>(plain[4]), static_cast<char>(plain[5])};
    r.vl = plain[6] | plain[7] << 8 | plain[8] << 16 | static_cast<std::uint32_t>(plain[9]) << 24;
    r.value.assign(plain.begin() + 10, plain.end());
    return r;
}

/// RSA key generation is slow; tests share a small pool.
inline auto test_key(std::size_t i) -> const crypto::RsaPrivateKey& {
    static std::vector<crypto::RsaPrivateKey> pool;
    while (pool.size() <= i) {
        pool.push_back(crypto::RsaPrivateKey::generate(2048));
    }
    return pool[i];
}

/// Random valid dataset: even-length values, defined lengths, at most one pixel data.
inline auto random_dataset(std::mt19937& rng) -> Dataset {
    static const std::vector<std::string> kVrs{"AE", "CS", "DA", "DS", "IS", "LO", "LT", "OB", "OW", "PN",
                                               "SH", "SL", "SS", "ST", "UI", "UL", "UN", "US", "UT", "FD"};
    Dataset ds;
    for (auto& b : ds.preamble) {
        b = static_cast<std::uint8_t>(rng() & 0xFF);
    }
    ds.elements = file_meta();
    const std::size_t count = rng() % 24;
    std::uint16_t group = 0x0008;
    std::uint16_t elem = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (rng() % 3 == 0) {
            group = static_cast<std::uint16_t>(group + 1 + rng() % 0x40);
            elem = 0;
        }
        elem = static_cast<std::uint16_t>(elem + 1 + rng() % 0x100);
        const auto& vr = kVrs[rng() % kVrs.size()];
        const Vr parsed(vr);
        std::size_t len = (rng() % (rng() % 8 == 0 ? 4000 : 64)) & ~std::size_t{1};
        if (!parsed.has_long_length()) {
            len = std::min<std::size_t>(len, 0xFFFE);
        }
        Bytes value(len);
        for (auto& b : value) {
            b = static_cast<std::uint8_t>(rng() & 0xFF);
        }
        ds.elements.push_back(DataElement{Tag{group, elem}, parsed, std::move(value), false});
    }
    if (rng() % 2 == 0) {
        ds.elements.push_back(pixel_data(1 + rng() % 64));
    }
    return ds;
}

}  // namespace dicomdrm::testing
