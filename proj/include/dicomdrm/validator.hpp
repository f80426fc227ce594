/**
 * @file validator.hpp
 * @brief Compatibility checks for annotated and protected files.
 *
 * Viewer compatibility is approximated by what a conservative reader needs:
 *
 *  - C1  the file parses strictly (preamble, magic, explicit VR little endian)
 *  - C2  annotations are well-formed (0070,0006) ST elements before pixel data
 *  - C3  never-encrypt UIDs are plaintext, and identical to the reference
 *  - C4  image description and pixel data are encrypted together or not at all
 *  - C5  encrypted elements live only in group 7777 with VR OB
 *  - C6  every value length is even
 */
#pragma once

#include "dicomdrm/dicom.hpp"
#include "dicomdrm/policy.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dicomdrm {

enum class Severity { error, warning, info };

[[nodiscard]] auto to_string(Severity s) -> std::string_view;

struct Finding {
    Severity severity = Severity::info;
    std::string code;
    std::optional<Tag> tag;
    std::string message;

    /// "SEVERITY CODE [GGGG,EEEE] message"; the bracket is omitted without a tag.
    [[nodiscard]] auto to_line() const -> std::string;

    friend auto operator==(const Finding&, const Finding&) -> bool = default;
};

struct ValidationReport {
    std::vector<Finding> findings;

    [[nodiscard]] auto passed() const -> bool { return count(Severity::error) == 0; }
    [[nodiscard]] auto count(Severity s) const -> std::size_t;
    [[nodiscard]] auto has(std::string_view code, Severity s) const -> bool;

    /// Machine-readable, one finding per line.
    [[nodiscard]] auto to_lines() const -> std::string;
    /// Human-readable summary followed by the findings.
    [[nodiscard]] auto to_text() const -> std::string;
};

[[nodiscard]] auto validate(std::span<const std::uint8_t> bytes,
                            std::optional<std::span<const std::uint8_t>> reference = std::nullopt,
                            const EncryptionPolicy& policy = EncryptionPolicy::defaults()) -> ValidationReport;

enum class ChangeKind { changed, added, removed };

[[nodiscard]] auto to_string(ChangeKind k) -> std::string_view;

struct ElementChange {
    Tag tag;
    ChangeKind kind;

    friend auto operator==(const ElementChange&, const ElementChange&) -> bool = default;
};

/// Element-level diff; unchanged runs are aligned by longest common subsequence.
[[nodiscard]] auto diff_datasets(const Dataset& a, const Dataset& b) -> std::vector<ElementChange>;
/// Parses both inputs leniently and diffs them. Parse errors propagate.
[[nodiscard]] auto diff_elements(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b)
    -> std::vector<ElementChange>;

}  // namespace dicomdrm
