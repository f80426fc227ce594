/**
 * @file partial_drm.hpp
 * @brief Per-element encryption that keeps the file a valid DICOM stream.
 *
 * Each selected element is replaced in place by a private (7777,k) element,
 * k counting from 1 in file order, with VR "OB" and value
 *
 *     IV (16 bytes) || AES-CBC( [group:2][element:2][VR:2][VL:4][value] )
 *
 * so the original tag, VR and length travel inside the ciphertext.
 */
#pragma once

#include "dicomdrm/crypto.hpp"
#include "dicomdrm/dicom.hpp"
#include "dicomdrm/policy.hpp"

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dicomdrm {

enum class DataCipher { aes128_cbc, aes256_cbc };

[[nodiscard]] auto algorithm_uri(DataCipher cipher) -> std::string_view;
/// Throws Error(unknown_algorithm) naming the URI.
[[nodiscard]] auto data_cipher_from_uri(std::string_view uri) -> DataCipher;
[[nodiscard]] auto key_length(DataCipher cipher) -> std::size_t;

struct SessionKey {
    Bytes material;
    DataCipher algorithm = DataCipher::aes256_cbc;

    [[nodiscard]] auto uri() const -> std::string_view { return algorithm_uri(algorithm); }

    friend auto operator==(const SessionKey&, const SessionKey&) -> bool = default;
};

/// 32 random bytes by default (16 for AES-128).
[[nodiscard]] auto generate_session_key(DataCipher cipher = DataCipher::aes256_cbc) -> SessionKey;

/// In-memory view of one data element during protection and recovery.
struct ElementRecord {
    std::uint16_t group = 0;
    std::uint16_t element = 0;
    bool explicit_vr = true;
    /// Set for elements in the encrypted private group.
    bool encrypted = false;
    std::uint8_t vr_field_length = 2;
    /// 2 for short VRs, 4 for VRs with the reserved-plus-32-bit length form.
    std::uint8_t vl_field_length = 2;
    Vr vr;
    std::uint32_t vl = 0;
    std::uint32_t value_length = 0;
    Bytes value;
    /// For encrypted records: "GGGG,EEEE VR" of the original element, when known.
    std::string info;
    /// Position of the following record; empty for the last one.
    std::optional<std::size_t> next;

    friend auto operator==(const ElementRecord&, const ElementRecord&) -> bool = default;
};

/// One line of the protection manifest.
struct RemapEntry {
    Tag encrypted;
    Tag original;
    Vr vr;

    friend auto operator==(const RemapEntry&, const RemapEntry&) -> bool = default;
};

/// Lines of the form "7777,KKKK <- GGGG,EEEE VR".
[[nodiscard]] auto format_manifest(std::span<const RemapEntry> entries) -> std::string;
[[nodiscard]] auto parse_manifest(std::string_view text) -> std::vector<RemapEntry>;

/// `manifest`, when given, fills `info` for encrypted records.
[[nodiscard]] auto build_records(const Dataset& ds, std::span<const RemapEntry> manifest = {})
    -> std::vector<ElementRecord>;
[[nodiscard]] auto records_to_dataset(std::span<const ElementRecord> records,
                                      const std::array<std::uint8_t, 128>& preamble = {},
                                      bool has_preamble = true) -> Dataset;

struct ProtectionResult {
    Dataset dataset;
    std::vector<RemapEntry> manifest;
    /// Selected tags with no element in the input.
    std::vector<Tag> skipped;
};

/// Supplies one IV per encrypted element, in file order.
using IvSource = std::function<crypto::Iv()>;

/**
 * Encrypt every element whose tag is in `selection`. Unselected elements are
 * untouched and positions are preserved. Counters continue after any (7777,k)
 * elements already present, so protection runs compose. An empty `ivs` draws
 * IVs from the system CSPRNG.
 */
[[nodiscard]] auto encrypt_elements(const Dataset& ds, const ValidatedSelection& selection, const SessionKey& sk,
                                    const IvSource& ivs = {}) -> ProtectionResult;

/**
 * Restore encrypted elements in place. With `only`, just the listed
 * (7777,k) tags are touched; this lets one run be undone when several runs
 * with different keys were applied. Throws Error(decryption_failed) on a
 * wrong key or corrupted value and Error(ciphertext_too_short) when a value
 * cannot hold an IV plus one block.
 */
[[nodiscard]] auto decrypt_elements(const Dataset& ds, const SessionKey& sk,
                                    const std::optional<std::set<Tag>>& only = std::nullopt) -> Dataset;

}  // namespace dicomdrm
