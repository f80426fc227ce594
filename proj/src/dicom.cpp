#include "dicomdrm/dicom.hpp"

#include "dicomdrm/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dicomdrm {

namespace {

constexpr std::size_t kPreambleSize = 128;
constexpr std::array<std::uint8_t, 4> kMagic{'D', 'I', 'C', 'M'};
constexpr int kMaxNesting = 64;

constexpr Tag kItem{0xFFFE, 0xE000};
constexpr Tag kItemDelimiter{0xFFFE, 0xE00D};
constexpr Tag kSequenceDelimiter{0xFFFE, 0xE0DD};

auto read_u16(std::span<const std::uint8_t> data, std::size_t pos) -> std::uint16_t {
    return static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
}

auto read_u32(std::span<const std::uint8_t> data, std::size_t pos) -> std::uint32_t {
    return static_cast<std::uint32_t>(data[pos]) | (static_cast<std::uint32_t>(data[pos + 1]) << 8) |
           (static_cast<std::uint32_t>(data[pos + 2]) << 16) |
           (static_cast<std::uint32_t>(data[pos + 3]) << 24);
}

void write_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void write_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
    }
}

auto is_upper(std::uint8_t c) -> bool { return c >= 'A' && c <= 'Z'; }

[[noreturn]] void truncated(std::size_t pos) {
    throw Error(ErrorCode::truncated,
                "truncated element at offset " + std::to_string(pos) +
                    ": declared length exceeds remaining bytes");
}

void need(std::span<const std::uint8_t> data, std::size_t pos, std::size_t count) {
    if (pos > data.size() || data.size() - pos < count) {
        truncated(pos);
    }
}

auto read_tag(std::span<const std::uint8_t> data, std::size_t pos) -> Tag {
    need(data, pos, 4);
    return {read_u16(data, pos), read_u16(data, pos + 2)};
}

auto skip_undefined(std::span<const std::uint8_t> data, std::size_t pos, bool explicit_vr, int depth)
    -> std::size_t;

// Walks the elements of an undefined-length item up to its delimiter.
auto skip_item_contents(std::span<const std::uint8_t> data, std::size_t pos, bool explicit_vr,
                        int depth) -> std::size_t {
    for (;;) {
        const Tag tag = read_tag(data, pos);
        if (tag == kItemDelimiter) {
            need(data, pos, 8);
            return pos + 8;
        }
        std::uint32_t length = 0;
        bool inner_explicit = explicit_vr;
        if (explicit_vr) {
            need(data, pos, 8);
            const Vr vr(static_cast<char>(data[pos + 4]), static_cast<char>(data[pos + 5]));
            if (!is_upper(data[pos + 4]) || !is_upper(data[pos + 5])) {
                throw Error(ErrorCode::malformed,
                            "invalid VR inside sequence item at offset " + std::to_string(pos));
            }
            if (vr.has_long_length()) {
                need(data, pos, 12);
                length = read_u32(data, pos + 8);
                pos += 12;
            } else {
                length = read_u16(data, pos + 6);
                pos += 8;
            }
            inner_explicit = vr != vrs::UN;
        } else {
            need(data, pos, 8);
            length = read_u32(data, pos + 4);
            pos += 8;
        }
        if (length == undefined_length) {
            pos = skip_undefined(data, pos, inner_explicit, depth + 1);
        } else {
            need(data, pos, length);
            pos += length;
        }
    }
}

// Returns the offset just past the sequence delimitation item.
auto skip_undefined(std::span<const std::uint8_t> data, std::size_t pos, bool explicit_vr, int depth)
    -> std::size_t {
    if (depth > kMaxNesting) {
        throw Error(ErrorCode::malformed, "sequence nesting too deep");
    }
    for (;;) {
        const Tag tag = read_tag(data, pos);
        need(data, pos, 8);
        const std::uint32_t length = read_u32(data, pos + 4);
        pos += 8;
        if (tag == kSequenceDelimiter) {
            return pos;
        }
        if (tag != kItem) {
            throw Error(ErrorCode::malformed, "expected item tag inside undefined-length value at offset " +
                                                  std::to_string(pos - 8));
        }
        if (length == undefined_length) {
            pos = skip_item_contents(data, pos, explicit_vr, depth);
        } else {
            need(data, pos, length);
            pos += length;
        }
    }
}

void check_transfer_syntax(const DataElement& el) {
    const std::string uid = trimmed_string(el);
    if (uid != explicit_vr_little_endian) {
        throw Error(ErrorCode::unsupported_transfer_syntax,
                    "unsupported transfer syntax '" + uid + "': only explicit VR little endian (" +
                        std::string(explicit_vr_little_endian) + ") is supported");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tag / Vr
// ---------------------------------------------------------------------------

auto Tag::to_string() const -> std::string {
    char buf[10];
    std::snprintf(buf, sizeof buf, "%04X,%04X", group, element);
    return buf;
}

auto Tag::parse(std::string_view text) -> Tag {
    const std::string original(text);
    if (text.size() == 11 && text.front() == '(' && text.back() == ')') {
        text = text.substr(1, 9);
    }
    auto bad = [&]() -> Error {
        return Error(ErrorCode::invalid_argument, "invalid tag '" + original + "', expected GGGG,EEEE");
    };
    if (text.size() != 9 || text[4] != ',') {
        throw bad();
    }
    auto hex16 = [&](std::string_view part) {
        std::uint16_t v = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v, 16);
        if (ec != std::errc{} || ptr != part.data() + part.size()) {
            throw bad();
        }
        return v;
    };
    return {hex16(text.substr(0, 4)), hex16(text.substr(5, 4))};
}

Vr::Vr(std::string_view text) {
    if (text.size() != 2 || !is_upper(static_cast<std::uint8_t>(text[0])) ||
        !is_upper(static_cast<std::uint8_t>(text[1]))) {
        throw Error(ErrorCode::invalid_argument, "invalid VR '" + std::string(text) + "'");
    }
    code_ = {text[0], text[1]};
}

auto Vr::has_long_length() const -> bool {
    static constexpr std::array<std::string_view, 13> kLong{"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                                            "SV", "UC", "UN", "UR", "UT", "UV"};
    const std::string_view code(code_.data(), 2);
    return std::find(kLong.begin(), kLong.end(), code) != kLong.end();
}

auto Vr::is_space_padded() const -> bool {
    static constexpr std::array<std::string_view, 16> kText{"AE", "AS", "CS", "DA", "DS", "DT",
                                                            "IS", "LO", "LT", "PN", "SH", "ST",
                                                            "TM", "UC", "UR", "UT"};
    const std::string_view code(code_.data(), 2);
    return std::find(kText.begin(), kText.end(), code) != kText.end();
}

auto Vr::max_length() const -> std::uint32_t {
    return has_long_length() ? 0xFFFFFFFEU : 0xFFFEU;
}

auto DataElement::vl() const -> std::uint32_t {
    return undefined_length ? dicomdrm::undefined_length : static_cast<std::uint32_t>(value.size());
}

// ---------------------------------------------------------------------------
// parse / serialize
// ---------------------------------------------------------------------------

auto parse(std::span<const std::uint8_t> data, const ParseOptions& options) -> Dataset {
    Dataset ds;
    std::size_t pos = 0;

    if (data.size() >= kPreambleSize + kMagic.size() &&
        std::equal(kMagic.begin(), kMagic.end(), data.begin() + kPreambleSize)) {
        std::copy_n(data.begin(), kPreambleSize, ds.preamble.begin());
        pos = kPreambleSize + kMagic.size();
    } else if (!options.strict && data.size() >= 2 && data[0] == 0x02 && data[1] == 0x00) {
        ds.has_preamble = false;
    } else {
        throw Error(ErrorCode::missing_magic, "missing 128-byte preamble and \"DICM\" magic");
    }

    bool seen_transfer_syntax = false;
    bool seen_pixel_data = false;

    while (pos < data.size()) {
        const std::size_t start = pos;
        const Tag tag = read_tag(data, pos);
        need(data, pos, 6);
        if (!is_upper(data[pos + 4]) || !is_upper(data[pos + 5])) {
            throw Error(ErrorCode::unsupported_transfer_syntax,
                        "element " + tag.to_string() + " at offset " + std::to_string(start) +
                            " has no explicit VR; implicit VR is not supported");
        }
        if (tag.group == 0xFFFE) {
            throw Error(ErrorCode::malformed, "item tag " + tag.to_string() + " outside a sequence");
        }
        if (options.check_transfer_syntax && tag.group != tags::file_meta_group && !seen_transfer_syntax &&
            options.strict) {
            throw Error(ErrorCode::unsupported_transfer_syntax, "missing transfer syntax UID (0002,0010)");
        }

        DataElement el;
        el.tag = tag;
        el.vr = Vr(static_cast<char>(data[pos + 4]), static_cast<char>(data[pos + 5]));
        std::uint32_t length = 0;
        if (el.vr.has_long_length()) {
            need(data, pos, 12);
            length = read_u32(data, pos + 8);
            pos += 12;
        } else {
            need(data, pos, 8);
            length = read_u16(data, pos + 6);
            pos += 8;
        }

        if (length == undefined_length) {
            if (tag == tags::pixel_data) {
                throw Error(ErrorCode::malformed, "encapsulated (undefined-length) pixel data is not supported");
            }
            if (el.vr != vrs::SQ && el.vr != vrs::UN && el.vr != vrs::OB && el.vr != vrs::OW) {
                throw Error(ErrorCode::malformed,
                            "undefined length on element " + tag.to_string() + " with VR " + el.vr.str());
            }
            const std::size_t end = skip_undefined(data, pos, el.vr != vrs::UN, 0);
            el.undefined_length = true;
            el.value.assign(data.begin() + static_cast<std::ptrdiff_t>(pos),
                            data.begin() + static_cast<std::ptrdiff_t>(end));
            pos = end;
        } else {
            need(data, pos, length);
            el.value.assign(data.begin() + static_cast<std::ptrdiff_t>(pos),
                            data.begin() + static_cast<std::ptrdiff_t>(pos + length));
            pos += length;
        }

        if (tag == tags::transfer_syntax_uid) {
            seen_transfer_syntax = true;
            if (options.check_transfer_syntax) {
                check_transfer_syntax(el);
            }
        }
        if (tag == tags::pixel_data) {
            if (seen_pixel_data) {
                throw Error(ErrorCode::malformed, "more than one pixel data element");
            }
            seen_pixel_data = true;
        }
        ds.elements.push_back(std::move(el));
    }

    if (options.strict && options.check_transfer_syntax && !seen_transfer_syntax) {
        throw Error(ErrorCode::unsupported_transfer_syntax, "missing transfer syntax UID (0002,0010)");
    }
    return ds;
}

auto serialize(const Dataset& ds) -> Bytes {
    std::size_t total = ds.has_preamble ? kPreambleSize + kMagic.size() : 0;
    for (const auto& el : ds.elements) {
        total += 12 + el.value.size() + 1;
    }
    Bytes out;
    out.reserve(total);
    if (ds.has_preamble) {
        out.insert(out.end(), ds.preamble.begin(), ds.preamble.end());
        out.insert(out.end(), kMagic.begin(), kMagic.end());
    }

    for (const auto& el : ds.elements) {
        const bool pad = !el.undefined_length && (el.value.size() % 2) != 0;
        const std::size_t padded = el.value.size() + (pad ? 1 : 0);
        if (!el.undefined_length && padded > el.vr.max_length()) {
            throw Error(ErrorCode::value_too_long,
                        "element " + el.tag.to_string() + " value of " + std::to_string(el.value.size()) +
                            " bytes exceeds the length field of VR " + el.vr.str());
        }
        write_u16(out, el.tag.group);
        write_u16(out, el.tag.element);
        out.push_back(static_cast<std::uint8_t>(el.vr.first()));
        out.push_back(static_cast<std::uint8_t>(el.vr.second()));
        const std::uint32_t length = el.undefined_length ? undefined_length : static_cast<std::uint32_t>(padded);
        if (el.vr.has_long_length()) {
            write_u16(out, 0);
            write_u32(out, length);
        } else {
            write_u16(out, static_cast<std::uint16_t>(length));
        }
        out.insert(out.end(), el.value.begin(), el.value.end());
        if (pad) {
            out.push_back(el.vr.is_space_padded() ? 0x20 : 0x00);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// queries and edits
// ---------------------------------------------------------------------------

auto find(const Dataset& ds, Tag tag) -> std::vector<std::size_t> {
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < ds.elements.size(); ++i) {
        if (ds.elements[i].tag == tag) {
            positions.push_back(i);
        }
    }
    return positions;
}

auto pixel_data_position(const Dataset& ds) -> std::optional<std::size_t> {
    const auto positions = find(ds, tags::pixel_data);
    if (positions.empty()) {
        return std::nullopt;
    }
    return positions.front();
}

auto insert_before_pixel_data(Dataset ds, DataElement el) -> Dataset {
    const auto pixel = pixel_data_position(ds);
    const auto where = pixel ? ds.elements.begin() + static_cast<std::ptrdiff_t>(*pixel) : ds.elements.end();
    ds.elements.insert(where, std::move(el));
    return ds;
}

auto trimmed_string(const DataElement& el) -> std::string {
    std::string s(el.value.begin(), el.value.end());
    while (!s.empty() && (s.back() == '\0' || s.back() == ' ')) {
        s.pop_back();
    }
    const auto first = s.find_first_not_of(' ');
    return first == std::string::npos ? std::string{} : s.substr(first);
}

auto read_file(const std::string& path) -> Bytes {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
    }
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorCode::io_error, "failed to read '" + path + "'");
    }
    return data;
}

}  // namespace dicomdrm
