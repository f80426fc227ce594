/**
 * @file policy.hpp
 * @brief Encryption restrictions: which tags may, must, or must not be
 *        encrypted, and validation of a proposed protection selection.
 */
#pragma once

#include "dicomdrm/dicom.hpp"
#include "dicomdrm/error.hpp"

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dicomdrm {

enum class PolicyClass {
    never_encrypt,
    encrypt_with_image,
    must_encrypt,
    discretionary,
};

[[nodiscard]] auto to_string(PolicyClass c) -> std::string_view;

struct EncryptionPolicy {
    /// UIDs parsers need to associate objects. The whole file meta group and
    /// the encrypted group are treated as never-encrypt on top of this set.
    std::set<Tag> never_encrypt;
    /// Image description tags that travel together with pixel data.
    std::set<Tag> encrypt_with_image;
    std::set<Tag> must_encrypt;
    Tag image_anchor = tags::pixel_data;

    /// Built-in defaults: common UIDs, image description, patient identity.
    [[nodiscard]] static auto defaults() -> EncryptionPolicy;

    /// Parse the plain-text policy format; throws Error(invalid_policy).
    [[nodiscard]] static auto from_text(std::string_view text) -> EncryptionPolicy;
    [[nodiscard]] static auto from_file(const std::string& path) -> EncryptionPolicy;

    /// Render in the format accepted by from_text.
    [[nodiscard]] auto to_text() const -> std::string;

    /// Throws Error(invalid_policy) if the sets overlap.
    void check() const;
};

/// The default policy as shipped in policy/default.policy.
[[nodiscard]] auto default_policy_text() -> std::string_view;

[[nodiscard]] auto classify(Tag tag, const EncryptionPolicy& policy) -> PolicyClass;

enum class SelectionMode {
    /// Report every rule violation.
    strict,
    /// Expand a partial image group and add missing must-encrypt tags.
    coerce,
};

struct Violation {
    Tag tag;
    PolicyClass policy_class;
    std::string rule;

    friend auto operator==(const Violation&, const Violation&) -> bool = default;
};

/// Raised by validate_selection; carries every offending tag.
class PolicyError : public Error {
public:
    explicit PolicyError(std::vector<Violation> violations);

    [[nodiscard]] auto violations() const -> const std::vector<Violation>& { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// A selection that has passed validate_selection. Only that function
/// constructs one.
class ValidatedSelection {
public:
    [[nodiscard]] auto tags() const -> const std::set<Tag>& { return tags_; }
    [[nodiscard]] auto contains(Tag t) const -> bool { return tags_.contains(t); }
    [[nodiscard]] auto empty() const -> bool { return tags_.empty(); }

private:
    friend auto validate_selection(const std::set<Tag>&, const Dataset&, const EncryptionPolicy&,
                                   SelectionMode) -> ValidatedSelection;
    explicit ValidatedSelection(std::set<Tag> tags) : tags_(std::move(tags)) {}

    std::set<Tag> tags_;
};

/**
 * @brief Check a selection against the policy for a given dataset.
 *
 * Rules:
 *  - no never-encrypt tag may be selected;
 *  - the image group (image description tags present in `ds` plus pixel data)
 *    is selected entirely or not at all;
 *  - every must-encrypt tag present in `ds` is selected.
 *
 * Coerce mode repairs the last two by expanding the selection. Throws
 * PolicyError when violations remain.
 */
[[nodiscard]] auto validate_selection(const std::set<Tag>& selection, const Dataset& ds,
                                      const EncryptionPolicy& policy, SelectionMode mode = SelectionMode::strict)
    -> ValidatedSelection;

/// Must-encrypt tags that are present in `ds`.
[[nodiscard]] auto present_must_encrypt(const Dataset& ds, const EncryptionPolicy& policy) -> std::set<Tag>;

}  // namespace dicomdrm
