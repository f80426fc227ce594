#include "dicomdrm/policy.hpp"

#include "default_policy.inc"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dicomdrm {

namespace {

auto trim(std::string_view s) -> std::string_view {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

auto present_tags(const Dataset& ds) -> std::set<Tag> {
    std::set<Tag> present;
    for (const auto& el : ds.elements) {
        present.insert(el.tag);
    }
    return present;
}

auto join_violations(const std::vector<Violation>& violations) -> std::string {
    std::string msg = "selection violates the encryption policy:";
    for (const auto& v : violations) {
        msg += " " + v.tag.to_string() + " (" + std::string(to_string(v.policy_class)) + ": " + v.rule + ");";
    }
    msg.pop_back();
    return msg;
}

}  // namespace

auto to_string(PolicyClass c) -> std::string_view {
    switch (c) {
        case PolicyClass::never_encrypt: return "NeverEncrypt";
        case PolicyClass::encrypt_with_image: return "EncryptWithImage";
        case PolicyClass::must_encrypt: return "MustEncrypt";
        case PolicyClass::discretionary: return "Discretionary";
    }
    return "Unknown";
}

auto default_policy_text() -> std::string_view { return kDefaultPolicyText; }

auto EncryptionPolicy::defaults() -> EncryptionPolicy { return from_text(default_policy_text()); }

auto EncryptionPolicy::from_text(std::string_view text) -> EncryptionPolicy {
    EncryptionPolicy policy;
    std::set<Tag>* section = nullptr;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (line.front() == '[') {
            if (line == "[never]") {
                section = &policy.never_encrypt;
            } else if (line == "[with-image]") {
                section = &policy.encrypt_with_image;
            } else if (line == "[must]") {
                section = &policy.must_encrypt;
            } else {
                throw Error(ErrorCode::invalid_policy,
                            "policy line " + std::to_string(line_no) + ": unknown section " + std::string(line));
            }
            continue;
        }
        if (section == nullptr) {
            throw Error(ErrorCode::invalid_policy,
                        "policy line " + std::to_string(line_no) + ": tag outside of a section");
        }
        const auto token = line.substr(0, line.find_first_of(" \t"));
        try {
            section->insert(Tag::parse(token));
        } catch (const Error& e) {
            throw Error(ErrorCode::invalid_policy, "policy line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    policy.check();
    return policy;
}

auto EncryptionPolicy::from_file(const std::string& path) -> EncryptionPolicy {
    const auto bytes = read_file(path);
    return from_text(std::string(bytes.begin(), bytes.end()));
}

auto EncryptionPolicy::to_text() const -> std::string {
    std::string out;
    auto section = [&](std::string_view name, const std::set<Tag>& set) {
        out += "[";
        out += name;
        out += "]\n";
        for (const auto& t : set) {
            out += t.to_string() + "\n";
        }
    };
    section("never", never_encrypt);
    section("with-image", encrypt_with_image);
    section("must", must_encrypt);
    return out;
}

void EncryptionPolicy::check() const {
    auto overlap = [](const std::set<Tag>& a, const std::set<Tag>& b) -> std::optional<Tag> {
        for (const auto& t : a) {
            if (b.contains(t)) {
                return t;
            }
        }
        return std::nullopt;
    };
    auto fail = [](Tag t, std::string_view what) {
        throw Error(ErrorCode::invalid_policy, "policy tag " + t.to_string() + " " + std::string(what));
    };
    if (auto t = overlap(never_encrypt, encrypt_with_image)) fail(*t, "is in both [never] and [with-image]");
    if (auto t = overlap(never_encrypt, must_encrypt)) fail(*t, "is in both [never] and [must]");
    if (auto t = overlap(encrypt_with_image, must_encrypt)) fail(*t, "is in both [with-image] and [must]");
    for (const auto* set : {&encrypt_with_image, &must_encrypt}) {
        for (const auto& t : *set) {
            if (t.group == tags::file_meta_group || t.group == tags::encrypted_group || t == image_anchor) {
                fail(t, "cannot be encrypted");
            }
        }
    }
    if (never_encrypt.contains(image_anchor)) {
        fail(image_anchor, "is the image anchor and cannot be in [never]");
    }
}

auto classify(Tag tag, const EncryptionPolicy& policy) -> PolicyClass {
    if (tag.group == tags::file_meta_group || tag.group == tags::encrypted_group ||
        policy.never_encrypt.contains(tag)) {
        return PolicyClass::never_encrypt;
    }
    if (tag == policy.image_anchor || policy.encrypt_with_image.contains(tag)) {
        return PolicyClass::encrypt_with_image;
    }
    if (policy.must_encrypt.contains(tag)) {
        return PolicyClass::must_encrypt;
    }
    return PolicyClass::discretionary;
}

PolicyError::PolicyError(std::vector<Violation> violations)
    : Error(ErrorCode::policy_violation, join_violations(violations)), violations_(std::move(violations)) {}

auto present_must_encrypt(const Dataset& ds, const EncryptionPolicy& policy) -> std::set<Tag> {
    std::set<Tag> out;
    for (const auto& el : ds.elements) {
        if (policy.must_encrypt.contains(el.tag) && classify(el.tag, policy) == PolicyClass::must_encrypt) {
            out.insert(el.tag);
        }
    }
    return out;
}

auto validate_selection(const std::set<Tag>& selection, const Dataset& ds, const EncryptionPolicy& policy,
                        SelectionMode mode) -> ValidatedSelection {
    const bool coerce = mode == SelectionMode::coerce;
    const auto present = present_tags(ds);
    std::set<Tag> result = selection;
    std::vector<Violation> violations;

    for (const auto& t : selection) {
        if (classify(t, policy) == PolicyClass::never_encrypt) {
            violations.push_back({t, PolicyClass::never_encrypt, "never-encrypt tag selected"});
        }
    }

    std::set<Tag> image_group;
    for (const auto& t : policy.encrypt_with_image) {
        if (present.contains(t)) {
            image_group.insert(t);
        }
    }
    const bool anchor_present = present.contains(policy.image_anchor);
    if (anchor_present) {
        image_group.insert(policy.image_anchor);
    }
    std::set<Tag> selected_image;
    for (const auto& t : selection) {
        if (classify(t, policy) == PolicyClass::encrypt_with_image && present.contains(t)) {
            selected_image.insert(t);
        }
    }
    if (!selected_image.empty()) {
        if (!anchor_present) {
            for (const auto& t : selected_image) {
                violations.push_back({t, PolicyClass::encrypt_with_image,
                                      "image description cannot be encrypted without pixel data, which is absent"});
            }
        } else if (selected_image != image_group) {
            for (const auto& t : image_group) {
                if (selected_image.contains(t)) {
                    continue;
                }
                if (coerce) {
                    result.insert(t);
                } else {
                    violations.push_back({t, PolicyClass::encrypt_with_image,
                                          "partial image group: must be encrypted together with the image"});
                }
            }
        }
    }

    for (const auto& t : present_must_encrypt(ds, policy)) {
        if (selection.contains(t)) {
            continue;
        }
        if (coerce) {
            result.insert(t);
        } else {
            violations.push_back({t, PolicyClass::must_encrypt, "must-encrypt tag missing from selection"});
        }
    }

    if (!violations.empty()) {
        throw PolicyError(std::move(violations));
    }
    return ValidatedSelection(std::move(result));
}

}  // namespace dicomdrm
