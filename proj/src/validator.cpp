#include "dicomdrm/validator.hpp"

#include "dicomdrm/annotation.hpp"
#include "dicomdrm/crypto.hpp"
#include "dicomdrm/error.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace dicomdrm {

namespace {

class Checker {
public:
    Checker(const EncryptionPolicy& policy, ValidationReport& report) : policy_(policy), report_(report) {}

    void add(Severity s, std::string code, std::optional<Tag> tag, std::string message) {
        report_.findings.push_back({s, std::move(code), tag, std::move(message)});
    }

    void annotations(const Dataset& ds) {
        const auto pixel = pixel_data_position(ds);
        std::size_t count = 0;
        for (const auto pos : find(ds, tags::unformatted_text_value)) {
            const auto& el = ds.elements[pos];
            if (!looks_like_annotation(el)) {
                if (!el.value.empty() && is_binary_control(el.value.front())) {
                    add(Severity::error, "C2", el.tag,
                        "binary (0070,0006) content without a valid annotation header");
                } else {
                    add(Severity::info, "C2", el.tag, "free-text element #" + std::to_string(pos) + ", not an annotation");
                }
                continue;
            }
            ++count;
            if (el.vr != vrs::ST) {
                add(Severity::error, "C2", el.tag, "annotation element uses VR " + el.vr.str() + " instead of ST");
            }
            if (pixel && pos > *pixel) {
                add(Severity::error, "C2", el.tag,
                    "annotation element #" + std::to_string(pos) + " follows pixel data");
            }
            const auto a = decode_annotation(el);
            if (const auto* bytes = std::get_if<Bytes>(&a.payload); bytes != nullptr && !is_text(*bytes)) {
                add(Severity::warning, "C2", el.tag,
                    std::string(to_string(a.kind)) + " #" + std::to_string(a.index) +
                        " stores binary data in a short-text element");
            }
        }
        add(Severity::info, "C2", std::nullopt, std::to_string(count) + " annotation(s) found");
    }

    void uids(const Dataset& ds, const Dataset* ref) {
        for (const auto& el : ds.elements) {
            if (!policy_.never_encrypt.contains(el.tag) && !(el.tag.group == tags::file_meta_group && el.vr == vrs::UI)) {
                continue;
            }
            if (el.vr != vrs::UI) {
                add(Severity::error, "C3", el.tag, "never-encrypt UID carries VR " + el.vr.str() + ", expected UI");
            } else if (!is_uid(el.value)) {
                add(Severity::error, "C3", el.tag, "never-encrypt UID is not a valid UID; it appears encrypted or corrupted");
            }
        }
        if (ref == nullptr) {
            return;
        }
        std::set<Tag> seen;
        for (const auto& el : ref->elements) {
            if (classify(el.tag, policy_) != PolicyClass::never_encrypt || el.tag.group == tags::encrypted_group ||
                !seen.insert(el.tag).second) {
                continue;
            }
            const auto positions = find(ds, el.tag);
            if (positions.empty()) {
                add(Severity::error, "C3", el.tag, "never-encrypt element missing from the file");
            } else if (ds.elements[positions.front()] != el) {
                add(Severity::error, "C3", el.tag, "never-encrypt element differs from the reference");
            }
        }
    }

    void image_group(const Dataset& ds, const Dataset* ref) {
        const bool has_encrypted = std::any_of(ds.elements.begin(), ds.elements.end(),
                                               [](const auto& el) { return el.tag.group == tags::encrypted_group; });
        if (ref != nullptr) {
            std::set<Tag> group;
            for (const auto& el : ref->elements) {
                if (classify(el.tag, policy_) == PolicyClass::encrypt_with_image) {
                    group.insert(el.tag);
                }
            }
            std::set<Tag> missing;
            for (const auto& t : group) {
                if (find(ds, t).empty()) {
                    missing.insert(t);
                }
            }
            if (!missing.empty() && missing != group) {
                for (const auto& t : group) {
                    if (!missing.contains(t)) {
                        add(Severity::error, "C4", t, "left in plaintext while the rest of the image group is encrypted");
                    }
                }
            }
            return;
        }
        if (!has_encrypted || pixel_data_position(ds)) {
            return;
        }
        for (const auto& el : ds.elements) {
            if (policy_.encrypt_with_image.contains(el.tag)) {
                add(Severity::error, "C4", el.tag, "image description left in plaintext while pixel data is encrypted");
            }
        }
    }

    void encrypted(const Dataset& ds, const Dataset* ref) {
        for (const auto& el : ds.elements) {
            if (el.tag.group != tags::encrypted_group) {
                continue;
            }
            if (el.vr != vrs::OB) {
                add(Severity::error, "C5", el.tag, "encrypted element uses VR " + el.vr.str() + " instead of OB");
            }
            if (el.undefined_length || el.value.size() < 2 * crypto::aes_block_size ||
                el.value.size() % crypto::aes_block_size != 0) {
                add(Severity::error, "C5", el.tag, "encrypted element is not IV plus whole cipher blocks");
            }
        }
        if (ref == nullptr) {
            return;
        }
        for (const auto& change : diff_datasets(*ref, ds)) {
            if (change.kind == ChangeKind::added && change.tag.group != tags::encrypted_group) {
                add(Severity::warning, "C5", change.tag, "element added relative to the reference");
            } else if (change.kind == ChangeKind::changed) {
                add(Severity::warning, "C5", change.tag, "element modified relative to the reference");
            }
        }
    }

    void even_lengths(const Dataset& ds) {
        for (const auto& el : ds.elements) {
            if (!el.undefined_length && el.value.size() % 2 != 0) {
                add(Severity::error, "C6", el.tag, "odd value length " + std::to_string(el.value.size()));
            }
        }
    }

private:
    static auto is_binary_control(std::uint8_t c) -> bool {
        return c < 0x20 && c != '\t' && c != '\n' && c != '\r' && c != '\f' && c != 0x1B;
    }

    static auto is_text(const Bytes& bytes) -> bool {
        return std::none_of(bytes.begin(), bytes.end(), [](std::uint8_t c) { return is_binary_control(c) && c != 0; });
    }

    static auto is_uid(const Bytes& value) -> bool {
        std::size_t end = value.size();
        while (end > 0 && (value[end - 1] == 0 || value[end - 1] == ' ')) {
            --end;
        }
        if (end == 0 || end > 64) {
            return false;
        }
        return std::all_of(value.begin(), value.begin() + static_cast<std::ptrdiff_t>(end),
                           [](std::uint8_t c) { return c == '.' || (c >= '0' && c <= '9'); });
    }

    const EncryptionPolicy& policy_;
    ValidationReport& report_;
};

auto lcs_diff(const std::vector<DataElement>& a, const std::vector<DataElement>& b) -> std::vector<ElementChange> {
    std::size_t prefix = 0;
    while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) {
        ++prefix;
    }
    std::size_t suffix = 0;
    while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
           a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
        ++suffix;
    }
    const std::size_t n = a.size() - prefix - suffix;
    const std::size_t m = b.size() - prefix - suffix;

    // table[i][j] = LCS length of a[i..n) and b[j..m) within the middle.
    std::vector<std::uint32_t> table((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return table[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            at(i, j) = a[prefix + i] == b[prefix + j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));
        }
    }

    std::vector<ElementChange> changes;
    std::vector<std::size_t> gap_a;
    std::vector<std::size_t> gap_b;
    auto flush = [&]() {
        std::vector<bool> used(gap_b.size(), false);
        for (const auto ia : gap_a) {
            bool matched = false;
            for (std::size_t k = 0; k < gap_b.size(); ++k) {
                if (!used[k] && b[gap_b[k]].tag == a[ia].tag) {
                    used[k] = true;
                    matched = true;
                    break;
                }
            }
            changes.push_back({a[ia].tag, matched ? ChangeKind::changed : ChangeKind::removed});
        }
        for (std::size_t k = 0; k < gap_b.size(); ++k) {
            if (!used[k]) {
                changes.push_back({b[gap_b[k]].tag, ChangeKind::added});
            }
        }
        gap_a.clear();
        gap_b.clear();
    };

    std::size_t i = 0;
    std::size_t j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[prefix + i] == b[prefix + j]) {
            flush();
            ++i;
            ++j;
        } else if (j >= m || (i < n && at(i + 1, j) >= at(i, j + 1))) {
            gap_a.push_back(prefix + i++);
        } else {
            gap_b.push_back(prefix + j++);
        }
    }
    flush();
    return changes;
}

}  // namespace

auto to_string(Severity s) -> std::string_view {
    switch (s) {
        case Severity::error: return "ERROR";
        case Severity::warning: return "WARNING";
        case Severity::info: return "INFO";
    }
    return "INFO";
}

auto to_string(ChangeKind k) -> std::string_view {
    switch (k) {
        case ChangeKind::changed: return "changed";
        case ChangeKind::added: return "added";
        case ChangeKind::removed: return "removed";
    }
    return "changed";
}

auto Finding::to_line() const -> std::string {
    std::string line(to_string(severity));
    line += " " + code;
    if (tag) {
        line += " [" + tag->to_string() + "]";
    }
    return line + " " + message;
}

auto ValidationReport::count(Severity s) const -> std::size_t {
    return static_cast<std::size_t>(
        std::count_if(findings.begin(), findings.end(), [&](const Finding& f) { return f.severity == s; }));
}

auto ValidationReport::has(std::string_view code, Severity s) const -> bool {
    return std::any_of(findings.begin(), findings.end(),
                       [&](const Finding& f) { return f.code == code && f.severity == s; });
}

auto ValidationReport::to_lines() const -> std::string {
    std::string out;
    for (const auto& f : findings) {
        out += f.to_line() + "\n";
    }
    return out;
}

auto ValidationReport::to_text() const -> std::string {
    std::string out = passed() ? "PASS" : "FAIL";
    out += ": " + std::to_string(count(Severity::error)) + " error(s), " + std::to_string(count(Severity::warning)) +
           " warning(s)\n";
    for (const auto& f : findings) {
        out += "  " + f.to_line() + "\n";
    }
    return out;
}

auto validate(std::span<const std::uint8_t> bytes, std::optional<std::span<const std::uint8_t>> reference,
              const EncryptionPolicy& policy) -> ValidationReport {
    ValidationReport report;
    Checker check(policy, report);

    Dataset ds;
    try {
        ds = parse(bytes, {.strict = true});
    } catch (const Error& strict_error) {
        check.add(Severity::error, "C1", std::nullopt, std::string("strict parse failed: ") + strict_error.what());
        try {
            ds = parse(bytes, {.strict = false, .check_transfer_syntax = false});
        } catch (const Error&) {
            return report;
        }
    }

    std::optional<Dataset> ref;
    if (reference) {
        try {
            ref = parse(*reference, {.strict = false, .check_transfer_syntax = false});
        } catch (const Error& e) {
            check.add(Severity::error, "C3", std::nullopt, std::string("reference does not parse: ") + e.what());
        }
    }
    const Dataset* ref_ptr = ref ? &*ref : nullptr;

    check.annotations(ds);
    check.uids(ds, ref_ptr);
    check.image_group(ds, ref_ptr);
    check.encrypted(ds, ref_ptr);
    check.even_lengths(ds);
    return report;
}

auto diff_datasets(const Dataset& a, const Dataset& b) -> std::vector<ElementChange> {
    return lcs_diff(a.elements, b.elements);
}

auto diff_elements(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) -> std::vector<ElementChange> {
    return diff_datasets(parse(a), parse(b));
}

}  // namespace dicomdrm
