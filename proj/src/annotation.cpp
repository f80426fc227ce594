#include "dicomdrm/annotation.hpp"

#include "dicomdrm/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <array>
#include <charconv>

namespace dicomdrm {

namespace {

constexpr std::array<std::string_view, 3> kAllowedSchemes{"file://", "http://", "https://"};

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

auto get_u16(const Bytes& in, std::size_t pos) -> std::uint16_t {
    return static_cast<std::uint16_t>(in[pos] | (in[pos + 1] << 8));
}

auto without_trailing_nuls(std::span<const std::uint8_t> body) -> std::string {
    std::string s(body.begin(), body.end());
    while (!s.empty() && s.back() == '\0') {
        s.pop_back();
    }
    return s;
}

auto percent_decode(std::string_view in) -> std::string {
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == '%' && i + 2 < in.size()) {
            unsigned v = 0;
            const auto [ptr, ec] = std::from_chars(in.data() + i + 1, in.data() + i + 3, v, 16);
            if (ec == std::errc{} && ptr == in.data() + i + 3) {
                out.push_back(static_cast<char>(v));
                i += 2;
                continue;
            }
        }
        out.push_back(in[i]);
    }
    return out;
}

auto fetch_file(const std::string& uri) -> Bytes {
    std::string_view rest = std::string_view(uri).substr(std::string_view("file://").size());
    if (rest.starts_with("localhost/")) {
        rest.remove_prefix(std::string_view("localhost").size());
    }
    const std::string path = percent_decode(rest);
    try {
        return read_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::unreachable, "cannot fetch '" + uri + "': " + e.what());
    }
}

auto fetch_http(const std::string& uri, std::string_view token) -> Bytes {
    const auto scheme_end = uri.find("://") + 3;
    const auto path_start = uri.find('/', scheme_end);
    const std::string origin = uri.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : uri.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(5);
    client.set_read_timeout(10);
    httplib::Headers headers;
    if (!token.empty()) {
        headers.emplace("Authorization", "Bearer " + std::string(token));
    }
    auto res = client.Get(path, headers);
    if (!res) {
        throw Error(ErrorCode::unreachable, "cannot fetch '" + uri + "': " + httplib::to_string(res.error()));
    }
    if (res->status == 401 || res->status == 403) {
        throw Error(ErrorCode::authorization_rejected,
                    "authorization rejected for '" + uri + "' (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
        throw Error(ErrorCode::unreachable,
                    "cannot fetch '" + uri + "': HTTP " + std::to_string(res->status));
    }
    return Bytes(res->body.begin(), res->body.end());
}

}  // namespace

auto to_string(AnnotationKind kind) -> std::string_view {
    switch (kind) {
        case AnnotationKind::link: return "link";
        case AnnotationKind::image: return "image";
        case AnnotationKind::audio: return "audio";
        case AnnotationKind::video: return "video";
        case AnnotationKind::animation: return "animation";
    }
    return "unknown";
}

auto parse_annotation_kind(std::string_view text) -> AnnotationKind {
    for (std::uint16_t code = 1; code <= 5; ++code) {
        const auto kind = static_cast<AnnotationKind>(code);
        if (text == to_string(kind) || text == std::to_string(code)) {
            return kind;
        }
    }
    throw Error(ErrorCode::invalid_argument,
                "unknown annotation kind '" + std::string(text) + "' (link, image, audio, video, animation)");
}

auto is_allowed_uri(std::string_view uri) -> bool {
    const bool scheme_ok = std::any_of(kAllowedSchemes.begin(), kAllowedSchemes.end(), [&](auto scheme) {
        return uri.size() > scheme.size() && uri.starts_with(scheme);
    });
    return scheme_ok && std::all_of(uri.begin(), uri.end(), [](char c) {
               const auto u = static_cast<unsigned char>(c);
               return u > 0x20 && u < 0x7F;
           });
}

auto encode_annotation(const Annotation& a) -> DataElement {
    const auto code = static_cast<std::uint16_t>(a.kind);
    if (code < 1 || code > 5) {
        throw Error(ErrorCode::invalid_argument, "annotation kind code " + std::to_string(code) + " outside [1,5]");
    }

    DataElement el;
    el.tag = tags::unformatted_text_value;
    el.vr = vrs::ST;
    el.value.reserve(annotation_header_size);
    put_u16(el.value, code);
    put_u16(el.value, a.index);
    put_u16(el.value, a.x);
    put_u16(el.value, a.y);

    if (const auto* ref = std::get_if<Reference>(&a.payload)) {
        const bool empty_link = a.kind == AnnotationKind::link && ref->uri.empty();
        if (!empty_link && !is_allowed_uri(ref->uri)) {
            throw Error(ErrorCode::invalid_reference,
                        "reference '" + ref->uri + "' must be a file, http or https URI");
        }
        if (ref->uri.size() > max_sbv_payload) {
            throw Error(ErrorCode::invalid_reference, "reference URI too long for a short-text element");
        }
        el.value.insert(el.value.end(), ref->uri.begin(), ref->uri.end());
    } else {
        const auto& bytes = std::get<Bytes>(a.payload);
        if (a.kind == AnnotationKind::link) {
            throw Error(ErrorCode::invalid_reference, "link annotations carry a URI, not embedded bytes");
        }
        if (bytes.size() > max_sbv_payload) {
            throw Error(ErrorCode::sbv_capacity, "payload exceeds SBV capacity; use SBR");
        }
        el.value.insert(el.value.end(), bytes.begin(), bytes.end());
    }

    if (el.value.size() % 2 != 0) {
        el.value.push_back(0x00);
    }
    return el;
}

auto looks_like_annotation(const DataElement& el) -> bool {
    return el.tag == tags::unformatted_text_value && !el.undefined_length &&
           el.value.size() >= annotation_header_size && el.value[1] == 0x00 && el.value[0] >= 1 &&
           el.value[0] <= 5;
}

auto decode_annotation(const DataElement& el) -> Annotation {
    if (!looks_like_annotation(el)) {
        throw Error(ErrorCode::not_an_annotation,
                    "not an annotation element: " + el.tag.to_string() + " " + el.vr.str() + " vl " +
                        std::to_string(el.value.size()));
    }
    Annotation a;
    a.kind = static_cast<AnnotationKind>(get_u16(el.value, 0));
    a.index = get_u16(el.value, 2);
    a.x = get_u16(el.value, 4);
    a.y = get_u16(el.value, 6);

    const std::span<const std::uint8_t> body(el.value.data() + annotation_header_size,
                                             el.value.size() - annotation_header_size);
    std::string text = without_trailing_nuls(body);
    if (a.kind == AnnotationKind::link || is_allowed_uri(text)) {
        a.payload = Reference{std::move(text)};
    } else {
        a.payload = Bytes(body.begin(), body.end());
    }
    return a;
}

auto scan_annotations(const Dataset& ds) -> AnnotationScan {
    AnnotationScan scan;
    for (const auto pos : find(ds, tags::unformatted_text_value)) {
        const auto& el = ds.elements[pos];
        if (!looks_like_annotation(el)) {
            scan.skipped.push_back("element #" + std::to_string(pos) + " " + el.tag.to_string() +
                                   " is unformatted text, not an annotation");
            continue;
        }
        scan.annotations.push_back(decode_annotation(el));
        scan.positions.push_back(pos);
    }
    return scan;
}

auto list_annotations(const Dataset& ds) -> std::vector<Annotation> {
    return scan_annotations(ds).annotations;
}

auto add_annotation(Dataset ds, const Annotation& a) -> Dataset {
    return insert_before_pixel_data(std::move(ds), encode_annotation(a));
}

auto resolve_reference(const Annotation& a, std::string_view credentials) -> Bytes {
    const auto* ref = std::get_if<Reference>(&a.payload);
    if (ref == nullptr) {
        throw Error(ErrorCode::not_a_reference, "annotation stores its payload by value, not by reference");
    }
    if (!is_allowed_uri(ref->uri)) {
        throw Error(ErrorCode::invalid_reference, "cannot resolve '" + ref->uri + "'");
    }
    if (ref->uri.starts_with("file://")) {
        return fetch_file(ref->uri);
    }
    return fetch_http(ref->uri, credentials);
}

}  // namespace dicomdrm
