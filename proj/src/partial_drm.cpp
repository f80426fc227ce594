#include "dicomdrm/partial_drm.hpp"

#include "dicomdrm/error.hpp"

#include <algorithm>
#include <sstream>

namespace dicomdrm {

namespace {

constexpr std::string_view kAes128Uri = "http://www.w3.org/2001/04/xmlenc#aes128-cbc";
constexpr std::string_view kAes256Uri = "http://www.w3.org/2001/04/xmlenc#aes256-cbc";
constexpr std::size_t kRecordHeader = 10;

auto sealed_record(const DataElement& el) -> Bytes {
    Bytes out;
    out.reserve(kRecordHeader + el.value.size());
    auto put16 = [&](std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    };
    put16(el.tag.group);
    put16(el.tag.element);
    out.push_back(static_cast<std::uint8_t>(el.vr.first()));
    out.push_back(static_cast<std::uint8_t>(el.vr.second()));
    const std::uint32_t vl = el.vl();
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<std::uint8_t>((vl >> shift) & 0xFF));
    }
    out.insert(out.end(), el.value.begin(), el.value.end());
    return out;
}

[[noreturn]] void key_mismatch(Tag where) {
    throw Error(ErrorCode::decryption_failed,
                "decryption failed: key mismatch or corruption at " + where.to_string());
}

auto unseal_record(const Bytes& plain, Tag where) -> DataElement {
    if (plain.size() < kRecordHeader) {
        key_mismatch(where);
    }
    DataElement el;
    el.tag = {static_cast<std::uint16_t>(plain[0] | (plain[1] << 8)),
              static_cast<std::uint16_t>(plain[2] | (plain[3] << 8))};
    const auto a = static_cast<char>(plain[4]);
    const auto b = static_cast<char>(plain[5]);
    if (a < 'A' || a > 'Z' || b < 'A' || b > 'Z') {
        key_mismatch(where);
    }
    el.vr = Vr(a, b);
    const std::uint32_t vl = static_cast<std::uint32_t>(plain[6]) | (static_cast<std::uint32_t>(plain[7]) << 8) |
                             (static_cast<std::uint32_t>(plain[8]) << 16) |
                             (static_cast<std::uint32_t>(plain[9]) << 24);
    const std::size_t body = plain.size() - kRecordHeader;
    if (el.tag.group == tags::encrypted_group || el.tag.group == 0xFFFE) {
        key_mismatch(where);
    }
    if (vl == undefined_length) {
        el.undefined_length = true;
    } else if (vl != body || vl > el.vr.max_length()) {
        key_mismatch(where);
    }
    el.value.assign(plain.begin() + kRecordHeader, plain.end());
    return el;
}

auto make_record(const DataElement& el) -> ElementRecord {
    ElementRecord r;
    r.group = el.tag.group;
    r.element = el.tag.element;
    r.encrypted = el.tag.group == tags::encrypted_group;
    r.vl_field_length = el.vr.has_long_length() ? 4 : 2;
    r.vr = el.vr;
    r.vl = el.vl();
    r.value_length = static_cast<std::uint32_t>(el.value.size());
    r.value = el.value;
    return r;
}

auto record_element(const ElementRecord& r) -> DataElement {
    return {Tag{r.group, r.element}, r.vr, r.value, r.vl == undefined_length};
}

}  // namespace

auto algorithm_uri(DataCipher cipher) -> std::string_view {
    return cipher == DataCipher::aes128_cbc ? kAes128Uri : kAes256Uri;
}

auto data_cipher_from_uri(std::string_view uri) -> DataCipher {
    if (uri == kAes256Uri) {
        return DataCipher::aes256_cbc;
    }
    if (uri == kAes128Uri) {
        return DataCipher::aes128_cbc;
    }
    throw Error(ErrorCode::unknown_algorithm, "unrecognized data encryption algorithm '" + std::string(uri) + "'");
}

auto key_length(DataCipher cipher) -> std::size_t { return cipher == DataCipher::aes128_cbc ? 16 : 32; }

auto generate_session_key(DataCipher cipher) -> SessionKey {
    return {crypto::random_bytes(key_length(cipher)), cipher};
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

auto format_manifest(std::span<const RemapEntry> entries) -> std::string {
    std::string out;
    for (const auto& e : entries) {
        out += e.encrypted.to_string() + " <- " + e.original.to_string() + " " + e.vr.str() + "\n";
    }
    return out;
}

auto parse_manifest(std::string_view text) -> std::vector<RemapEntry> {
    std::vector<RemapEntry> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string encrypted, arrow, original, vr;
        if (!(fields >> encrypted >> arrow >> original >> vr) || arrow != "<-") {
            throw Error(ErrorCode::malformed_license, "malformed manifest line '" + line + "'");
        }
        try {
            entries.push_back({Tag::parse(encrypted), Tag::parse(original), Vr(vr)});
        } catch (const Error& e) {
            throw Error(ErrorCode::malformed_license, "malformed manifest line '" + line + "': " + e.what());
        }
    }
    return entries;
}

// ---------------------------------------------------------------------------
// records
// ---------------------------------------------------------------------------

auto build_records(const Dataset& ds, std::span<const RemapEntry> manifest) -> std::vector<ElementRecord> {
    std::vector<ElementRecord> records;
    records.reserve(ds.elements.size());
    for (std::size_t i = 0; i < ds.elements.size(); ++i) {
        auto r = make_record(ds.elements[i]);
        if (r.encrypted) {
            const Tag tag{r.group, r.element};
            const auto it = std::find_if(manifest.begin(), manifest.end(),
                                         [&](const RemapEntry& e) { return e.encrypted == tag; });
            if (it != manifest.end()) {
                r.info = it->original.to_string() + " " + it->vr.str();
            }
        }
        if (i + 1 < ds.elements.size()) {
            r.next = i + 1;
        }
        records.push_back(std::move(r));
    }
    return records;
}

auto records_to_dataset(std::span<const ElementRecord> records, const std::array<std::uint8_t, 128>& preamble,
                        bool has_preamble) -> Dataset {
    Dataset ds;
    ds.preamble = preamble;
    ds.has_preamble = has_preamble;
    ds.elements.reserve(records.size());
    if (records.empty()) {
        return ds;
    }
    std::optional<std::size_t> at = 0;
    std::size_t steps = 0;
    while (at) {
        if (*at >= records.size() || ++steps > records.size()) {
            throw Error(ErrorCode::malformed, "record chain is broken");
        }
        ds.elements.push_back(record_element(records[*at]));
        at = records[*at].next;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// encrypt / decrypt
// ---------------------------------------------------------------------------

auto encrypt_elements(const Dataset& ds, const ValidatedSelection& selection, const SessionKey& sk,
                      const IvSource& ivs) -> ProtectionResult {
    if (sk.material.size() != key_length(sk.algorithm)) {
        throw Error(ErrorCode::invalid_key, "session key length does not match " + std::string(sk.uri()));
    }

    std::uint32_t counter = 0;
    for (const auto& el : ds.elements) {
        if (el.tag.group == tags::encrypted_group) {
            counter = std::max<std::uint32_t>(counter, el.tag.element);
        }
    }

    // Draw every IV up front so output is reproducible with a seeded source.
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < ds.elements.size(); ++i) {
        if (selection.contains(ds.elements[i].tag)) {
            targets.push_back(i);
        }
    }
    if (counter + targets.size() > 0xFFFF) {
        throw Error(ErrorCode::counter_overflow, "more than 65535 encrypted elements in one file");
    }
    std::vector<crypto::Iv> iv_list;
    iv_list.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        iv_list.push_back(ivs ? ivs() : crypto::random_iv());
    }

    ProtectionResult result;
    result.dataset = ds;
    for (std::size_t n = 0; n < targets.size(); ++n) {
        auto& el = result.dataset.elements[targets[n]];
        const Tag remapped{tags::encrypted_group, static_cast<std::uint16_t>(++counter)};
        const auto ciphertext = crypto::aes_cbc_encrypt(sk.material, iv_list[n], sealed_record(el));
        result.manifest.push_back({remapped, el.tag, el.vr});

        DataElement sealed;
        sealed.tag = remapped;
        sealed.vr = vrs::OB;
        sealed.value.reserve(crypto::aes_block_size + ciphertext.size());
        sealed.value.insert(sealed.value.end(), iv_list[n].begin(), iv_list[n].end());
        sealed.value.insert(sealed.value.end(), ciphertext.begin(), ciphertext.end());
        el = std::move(sealed);
    }

    for (const auto& t : selection.tags()) {
        if (find(ds, t).empty()) {
            result.skipped.push_back(t);
        }
    }
    return result;
}

auto decrypt_elements(const Dataset& ds, const SessionKey& sk, const std::optional<std::set<Tag>>& only)
    -> Dataset {
    if (sk.material.size() != key_length(sk.algorithm)) {
        throw Error(ErrorCode::invalid_key, "session key length does not match " + std::string(sk.uri()));
    }
    auto records = build_records(ds);
    for (auto& r : records) {
        const Tag tag{r.group, r.element};
        if (!r.encrypted || (only && !only->contains(tag))) {
            continue;
        }
        if (r.value.size() < 2 * crypto::aes_block_size) {
            throw Error(ErrorCode::ciphertext_too_short,
                        "encrypted element " + tag.to_string() + " is shorter than IV plus one block");
        }
        crypto::Iv iv{};
        std::copy_n(r.value.begin(), iv.size(), iv.begin());
        const std::span<const std::uint8_t> ciphertext(r.value.data() + iv.size(), r.value.size() - iv.size());
        const auto plain = crypto::aes_cbc_decrypt(sk.material, iv, ciphertext);
        if (!plain) {
            key_mismatch(tag);
        }
        const auto original = unseal_record(*plain, tag);
        const auto next = r.next;
        r = make_record(original);
        r.info = "restored from " + tag.to_string();
        r.next = next;
    }
    return records_to_dataset(records, ds.preamble, ds.has_preamble);
}

}  // namespace dicomdrm
