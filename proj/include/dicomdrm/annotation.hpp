/**
 * @file annotation.hpp
 * @brief Multimedia annotations stored in Unformatted Text Value (0070,0006).
 *
 * The value field starts with an 8-byte little-endian header
 *
 *     [kind:2][index:2][x:2][y:2]
 *
 * followed by the media bytes (store-by-value) or a URI (store-by-reference).
 * An odd-length body gets a single 0x00 pad byte; the original length is not
 * recorded, so an odd store-by-value payload decodes with one extra trailing
 * zero.
 */
#pragma once

#include "dicomdrm/dicom.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dicomdrm {

enum class AnnotationKind : std::uint16_t {
    link = 1,
    image = 2,
    audio = 3,
    video = 4,
    animation = 5,
};

[[nodiscard]] auto to_string(AnnotationKind kind) -> std::string_view;
/// Accepts a kind name ("audio") or its numeric code ("3").
[[nodiscard]] auto parse_annotation_kind(std::string_view text) -> AnnotationKind;

/// Store-by-reference payload.
struct Reference {
    std::string uri;
    friend auto operator==(const Reference&, const Reference&) -> bool = default;
};

using AnnotationPayload = std::variant<Bytes, Reference>;

struct Annotation {
    AnnotationKind kind = AnnotationKind::link;
    std::uint16_t index = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    AnnotationPayload payload = Reference{};

    [[nodiscard]] auto is_reference() const -> bool { return std::holds_alternative<Reference>(payload); }

    friend auto operator==(const Annotation&, const Annotation&) -> bool = default;
};

inline constexpr std::size_t annotation_header_size = 8;
/// 0xFFFE minus the header.
inline constexpr std::size_t max_sbv_payload = 0xFFFE - annotation_header_size;

/// True for "file", "http" and "https" URIs without whitespace or control bytes.
[[nodiscard]] auto is_allowed_uri(std::string_view uri) -> bool;

[[nodiscard]] auto encode_annotation(const Annotation& a) -> DataElement;

/// Throws Error(not_an_annotation) for anything that fails the header check.
[[nodiscard]] auto decode_annotation(const DataElement& el) -> Annotation;

/// Header check used by decode: tag, vl >= 8, kind in [1,5] with a zero high byte.
[[nodiscard]] auto looks_like_annotation(const DataElement& el) -> bool;

struct AnnotationScan {
    std::vector<Annotation> annotations;
    /// Element positions the annotations came from, parallel to `annotations`.
    std::vector<std::size_t> positions;
    /// One line per (0070,0006) element that was skipped.
    std::vector<std::string> skipped;
};

[[nodiscard]] auto scan_annotations(const Dataset& ds) -> AnnotationScan;
[[nodiscard]] auto list_annotations(const Dataset& ds) -> std::vector<Annotation>;

[[nodiscard]] auto add_annotation(Dataset ds, const Annotation& a) -> Dataset;

/**
 * Fetch the media behind a store-by-reference annotation. HTTP(S) requests
 * carry `credentials` as a bearer token; file URIs ignore it. A 401 or 403
 * reply raises authorization_rejected, everything else that prevents a fetch
 * raises unreachable.
 */
[[nodiscard]] auto resolve_reference(const Annotation& a, std::string_view credentials) -> Bytes;

}  // namespace dicomdrm
