/**
 * @file dicom.hpp
 * @brief Element-level DICOM Part 10 model for explicit VR little endian.
 *
 * Files are read into a flat list of top-level data elements. Sequences and
 * undefined-length values are kept as opaque byte blobs so that a parsed file
 * serializes back to exactly the bytes it came from.
 */
#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dicomdrm {

using Bytes = std::vector<std::uint8_t>;

struct Tag {
    std::uint16_t group = 0;
    std::uint16_t element = 0;

    friend constexpr auto operator<=>(const Tag&, const Tag&) = default;

    [[nodiscard]] constexpr auto is_private() const -> bool { return (group & 1U) != 0; }

    /// "GGGG,EEEE", uppercase hex.
    [[nodiscard]] auto to_string() const -> std::string;

    /// Accepts "GGGG,EEEE" and "(GGGG,EEEE)". Throws Error(invalid_argument).
    [[nodiscard]] static auto parse(std::string_view text) -> Tag;
};

namespace tags {
inline constexpr Tag transfer_syntax_uid{0x0002, 0x0010};
inline constexpr Tag pixel_data{0x7FE0, 0x0010};
inline constexpr Tag unformatted_text_value{0x0070, 0x0006};
inline constexpr std::uint16_t file_meta_group = 0x0002;
/// Private group holding encrypted elements.
inline constexpr std::uint16_t encrypted_group = 0x7777;
}  // namespace tags

inline constexpr std::string_view explicit_vr_little_endian = "1.2.840.10008.1.2.1";

/// Two-character value representation code.
class Vr {
public:
    constexpr Vr() = default;
    constexpr Vr(char a, char b) : code_{a, b} {}
    /// Throws Error(invalid_argument) unless `text` is two uppercase letters.
    explicit Vr(std::string_view text);

    friend constexpr auto operator==(const Vr&, const Vr&) -> bool = default;

    [[nodiscard]] auto str() const -> std::string { return {code_[0], code_[1]}; }
    [[nodiscard]] constexpr auto first() const -> char { return code_[0]; }
    [[nodiscard]] constexpr auto second() const -> char { return code_[1]; }

    /// True for VRs written with 2 reserved bytes and a 4-byte length.
    [[nodiscard]] auto has_long_length() const -> bool;
    /// True for character-string VRs padded with a trailing space.
    [[nodiscard]] auto is_space_padded() const -> bool;
    [[nodiscard]] auto max_length() const -> std::uint32_t;

private:
    std::array<char, 2> code_{'U', 'N'};
};

namespace vrs {
inline constexpr Vr OB{'O', 'B'};
inline constexpr Vr OW{'O', 'W'};
inline constexpr Vr SQ{'S', 'Q'};
inline constexpr Vr ST{'S', 'T'};
inline constexpr Vr UI{'U', 'I'};
inline constexpr Vr UN{'U', 'N'};
}  // namespace vrs

inline constexpr std::uint32_t undefined_length = 0xFFFFFFFFU;

struct DataElement {
    Tag tag;
    Vr vr;
    /// Raw value field. For undefined-length elements this holds every byte
    /// after the length field up to and including the sequence delimiter.
    Bytes value;
    bool undefined_length = false;

    /// Value length as written on the wire (0xFFFFFFFF when undefined).
    [[nodiscard]] auto vl() const -> std::uint32_t;

    friend auto operator==(const DataElement&, const DataElement&) -> bool = default;
};

struct Dataset {
    std::array<std::uint8_t, 128> preamble{};
    /// False for files that start directly with the file meta group. Such
    /// files are only accepted by the lenient parser.
    bool has_preamble = true;
    std::vector<DataElement> elements;

    friend auto operator==(const Dataset&, const Dataset&) -> bool = default;
};

struct ParseOptions {
    /// Require the preamble, the "DICM" magic and a transfer syntax element.
    bool strict = false;
    /// Reject any transfer syntax other than explicit VR little endian.
    bool check_transfer_syntax = true;
};

/**
 * @brief Parse a Part 10 byte stream.
 *
 * Throws Error with code truncated, missing_magic, unsupported_transfer_syntax
 * or malformed. Implicit VR or big endian input is always rejected, never
 * guessed at.
 */
[[nodiscard]] auto parse(std::span<const std::uint8_t> bytes, const ParseOptions& options = {})
    -> Dataset;

/// Emit preamble, magic and elements in list order. Odd values are padded.
[[nodiscard]] auto serialize(const Dataset& ds) -> Bytes;

[[nodiscard]] auto find(const Dataset& ds, Tag tag) -> std::vector<std::size_t>;

/// Insert `el` immediately before pixel data, or append when there is none.
[[nodiscard]] auto insert_before_pixel_data(Dataset ds, DataElement el) -> Dataset;

/// Position of the pixel data element, if any.
[[nodiscard]] auto pixel_data_position(const Dataset& ds) -> std::optional<std::size_t>;

/// Value of a UI/CS-like element with trailing NUL and space padding removed.
[[nodiscard]] auto trimmed_string(const DataElement& el) -> std::string;

[[nodiscard]] auto read_file(const std::string& path) -> Bytes;

}  // namespace dicomdrm
