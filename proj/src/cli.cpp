#include "dicomdrm/cli.hpp"

#include "dicomdrm/annotation.hpp"
#include "dicomdrm/crypto.hpp"
#include "dicomdrm/dicom.hpp"
#include "dicomdrm/error.hpp"
#include "dicomdrm/license.hpp"
#include "dicomdrm/partial_drm.hpp"
#include "dicomdrm/policy.hpp"
#include "dicomdrm/validator.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace dicomdrm::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Output written beside its destination and renamed into place on commit.
class StagedFile {
public:
    StagedFile(fs::path target, std::span<const std::uint8_t> data) : target_(std::move(target)) {
        const auto suffix = crypto::base64_encode(crypto::random_bytes(6));
        std::string safe;
        std::copy_if(suffix.begin(), suffix.end(), std::back_inserter(safe), [](char c) { return std::isalnum(c); });
        temp_ = target_;
        temp_.replace_filename("." + target_.filename().string() + ".tmp-" + safe);
        std::ofstream f(temp_, std::ios::binary | std::ios::trunc);
        if (!f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size())) ||
            !f.flush()) {
            f.close();
            std::error_code ec;
            fs::remove(temp_, ec);
            throw Error(ErrorCode::io_error, "cannot write '" + target_.string() + "'");
        }
    }

    StagedFile(const StagedFile&) = delete;
    auto operator=(const StagedFile&) -> StagedFile& = delete;

    ~StagedFile() {
        if (!committed_) {
            std::error_code ec;
            fs::remove(temp_, ec);
        }
    }

    void commit() {
        std::error_code ec;
        fs::rename(temp_, target_, ec);
        if (ec) {
            throw Error(ErrorCode::io_error, "cannot move output into '" + target_.string() + "': " + ec.message());
        }
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path temp_;
    bool committed_ = false;
};

auto as_bytes(std::string_view s) -> std::span<const std::uint8_t> {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

auto read_text(const std::string& path, std::istream& in) -> std::string {
    if (path == "-") {
        return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

auto load_policy(const std::string& flag) -> EncryptionPolicy {
    if (!flag.empty()) {
        return EncryptionPolicy::from_file(flag);
    }
    if (const char* env = std::getenv(policy_env_var); env != nullptr && *env != '\0') {
        return EncryptionPolicy::from_file(env);
    }
    return EncryptionPolicy::defaults();
}

auto preview(const DataElement& el) -> std::string {
    if (el.tag.group == tags::encrypted_group) {
        return "<encrypted>";
    }
    if (el.undefined_length) {
        return "<undefined length, " + std::to_string(el.value.size()) + " bytes>";
    }
    if (el.tag == tags::unformatted_text_value && looks_like_annotation(el)) {
        const auto a = decode_annotation(el);
        return "<" + std::string(to_string(a.kind)) + " annotation #" + std::to_string(a.index) + ">";
    }
    if (el.vr.is_space_padded() || el.vr == vrs::UI) {
        std::string s = trimmed_string(el);
        if (s.size() > 48) {
            s = s.substr(0, 45) + "...";
        }
        return "\"" + s + "\"";
    }
    if ((el.vr == Vr('U', 'S') || el.vr == Vr('S', 'S')) && el.value.size() == 2) {
        const auto v = static_cast<std::uint16_t>(el.value[0] | (el.value[1] << 8));
        return el.vr == Vr('S', 'S') ? std::to_string(static_cast<std::int16_t>(v)) : std::to_string(v);
    }
    if (el.vr == Vr('U', 'L') && el.value.size() == 4) {
        const std::uint32_t v = el.value[0] | (el.value[1] << 8) | (el.value[2] << 16) |
                                (static_cast<std::uint32_t>(el.value[3]) << 24);
        return std::to_string(v);
    }
    std::ostringstream hex;
    const std::size_t shown = std::min<std::size_t>(el.value.size(), 16);
    for (std::size_t i = 0; i < shown; ++i) {
        hex << (i ? " " : "") << std::hex << std::uppercase << std::setw(2) << std::setfill('0')
            << static_cast<int>(el.value[i]);
    }
    if (shown < el.value.size()) {
        hex << " ...";
    }
    return hex.str();
}

auto describe(const Annotation& a) -> std::string {
    std::string line = std::string(to_string(a.kind)) + " #" + std::to_string(a.index) + " @ (" +
                       std::to_string(a.x) + "," + std::to_string(a.y) + ")";
    if (const auto* ref = std::get_if<Reference>(&a.payload)) {
        return line + " reference " + (ref->uri.empty() ? "<empty>" : ref->uri);
    }
    return line + " value " + std::to_string(std::get<Bytes>(a.payload).size()) + " bytes";
}

auto load_recipients(const std::vector<std::string>& paths) -> std::vector<crypto::RsaPublicKey> {
    std::vector<crypto::RsaPublicKey> keys;
    keys.reserve(paths.size());
    for (const auto& p : paths) {
        keys.push_back(crypto::RsaPublicKey::from_pem_file(p));
    }
    return keys;
}

auto parse_cipher(const std::string& name) -> DataCipher {
    if (name == "aes256" || name == "aes256-cbc") {
        return DataCipher::aes256_cbc;
    }
    if (name == "aes128" || name == "aes128-cbc") {
        return DataCipher::aes128_cbc;
    }
    throw UsageError("unknown cipher '" + name + "' (aes256, aes128)");
}

auto parse_wrap(const std::string& name) -> KeyWrap {
    if (name == "rsa-1_5") {
        return KeyWrap::rsa_1_5;
    }
    if (name == "rsa-oaep") {
        return KeyWrap::rsa_oaep;
    }
    throw UsageError("unknown key wrap '" + name + "' (rsa-1_5, rsa-oaep)");
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

struct InspectArgs {
    std::string file;
    bool strict = false;
};

auto cmd_inspect(const InspectArgs& a, std::ostream& out) -> int {
    const auto ds = parse(read_file(a.file), {.strict = a.strict});
    if (!ds.has_preamble) {
        out << "# no preamble\n";
    }
    out << "# " << ds.elements.size() << " element(s)\n";
    for (const auto& el : ds.elements) {
        out << "(" << el.tag.to_string() << ") " << el.vr.str() << " "
            << (el.undefined_length ? std::string("undefined") : std::to_string(el.value.size())) << " "
            << preview(el) << "\n";
    }
    return 0;
}

struct AnnotateArgs {
    std::string file;
    std::string out;
    std::string kind;
    std::uint16_t index = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::string payload_file;
    std::string uri;
};

auto cmd_annotate(const AnnotateArgs& a, std::ostream& out) -> int {
    if (a.payload_file.empty() == a.uri.empty()) {
        throw UsageError("annotate needs exactly one of --payload-file or --uri");
    }
    Annotation annotation;
    annotation.kind = parse_annotation_kind(a.kind);
    annotation.index = a.index;
    annotation.x = a.x;
    annotation.y = a.y;
    if (!a.uri.empty()) {
        annotation.payload = Reference{a.uri};
    } else {
        annotation.payload = read_file(a.payload_file);
    }
    const auto ds = add_annotation(parse(read_file(a.file)), annotation);
    const std::string target = a.out.empty() ? a.file : a.out;
    StagedFile staged(target, serialize(ds));
    staged.commit();
    out << "added " << describe(annotation) << " to " << target << "\n";
    return 0;
}

struct AnnotationsArgs {
    std::string file;
    std::optional<std::size_t> extract;
    std::string out;
    bool resolve = false;
    std::string token;
};

auto cmd_annotations(const AnnotationsArgs& a, std::ostream& out, std::ostream& err) -> int {
    const auto ds = parse(read_file(a.file));
    const auto scan = scan_annotations(ds);
    for (const auto& note : scan.skipped) {
        err << "note: " << note << "\n";
    }
    if (!a.extract) {
        for (std::size_t i = 0; i < scan.annotations.size(); ++i) {
            out << "[" << i << "] " << describe(scan.annotations[i]) << "\n";
        }
        return 0;
    }
    if (a.out.empty()) {
        throw UsageError("--extract needs --out");
    }
    if (*a.extract >= scan.annotations.size()) {
        throw Error(ErrorCode::invalid_argument, "no annotation number " + std::to_string(*a.extract) + " (file has " +
                                                     std::to_string(scan.annotations.size()) + ")");
    }
    const auto& annotation = scan.annotations[*a.extract];
    Bytes payload;
    if (annotation.is_reference()) {
        if (!a.resolve) {
            throw Error(ErrorCode::invalid_argument,
                        "annotation " + std::to_string(*a.extract) + " is stored by reference; pass --resolve to fetch it");
        }
        payload = resolve_reference(annotation, a.token);
    } else {
        payload = std::get<Bytes>(annotation.payload);
    }
    StagedFile staged(a.out, payload);
    staged.commit();
    out << "wrote " << payload.size() << " bytes to " << a.out << "\n";
    return 0;
}

struct ProtectArgs {
    std::string file;
    std::string out;
    std::string license;
    std::vector<std::string> select;
    std::vector<std::string> select_class;
    bool strict = false;
    bool coerce = false;
    std::vector<std::string> recipients;
    std::string policy;
    std::string cipher = "aes256";
    std::string wrap = "rsa-1_5";
};

auto cmd_protect(const ProtectArgs& a, std::ostream& out, std::ostream& err) -> int {
    const auto policy = load_policy(a.policy);
    const auto cipher = parse_cipher(a.cipher);
    const auto wrap = parse_wrap(a.wrap);
    const auto ds = parse(read_file(a.file));

    std::set<Tag> selection;
    for (const auto& t : a.select) {
        selection.insert(Tag::parse(t));
    }
    for (const auto& c : a.select_class) {
        if (c == "must") {
            const auto must = present_must_encrypt(ds, policy);
            selection.insert(must.begin(), must.end());
        } else if (c == "with-image") {
            for (const auto& el : ds.elements) {
                if (classify(el.tag, policy) == PolicyClass::encrypt_with_image) {
                    selection.insert(el.tag);
                }
            }
        } else {
            throw UsageError("unknown --select-class '" + c + "' (must, with-image)");
        }
    }
    const auto mode = a.coerce ? SelectionMode::coerce : SelectionMode::strict;
    const auto validated = validate_selection(selection, ds, policy, mode);
    const auto recipients = load_recipients(a.recipients);

    const auto sk = generate_session_key(cipher);
    const auto result = encrypt_elements(ds, validated, sk);
    for (const auto& t : result.skipped) {
        err << "warning: selected tag " << t.to_string() << " not present; skipped\n";
    }
    const auto manifest = format_manifest(result.manifest);
    const auto xml = issue_license(sk, recipients, as_bytes(manifest), {.wrap = wrap});

    StagedFile protected_file(a.out, serialize(result.dataset));
    StagedFile license_file(a.license, as_bytes(xml));
    protected_file.commit();
    license_file.commit();
    out << "encrypted " << result.manifest.size() << " element(s) for " << recipients.size()
        << " recipient(s)\n"
        << manifest;
    return 0;
}

struct UnprotectArgs {
    std::string file;
    std::string out;
    std::string license;
    std::string key;
};

auto cmd_unprotect(const UnprotectArgs& a, std::istream& in, std::ostream& out) -> int {
    const auto lic = parse_license(read_text(a.license, in));
    const auto key = crypto::RsaPrivateKey::from_pem_file(a.key);
    const auto grant = authorize(lic, key);
    const auto entries = parse_manifest(std::string(grant.manifest.begin(), grant.manifest.end()));
    std::set<Tag> covered;
    for (const auto& e : entries) {
        covered.insert(e.encrypted);
    }
    const auto ds = decrypt_elements(parse(read_file(a.file)), grant.session_key, covered);
    StagedFile staged(a.out, serialize(ds));
    staged.commit();
    out << "restored " << entries.size() << " element(s)\n";
    return 0;
}

struct LicenseIssueArgs {
    std::string license;
    std::string key;
    std::vector<std::string> recipients;
    std::string out;
    std::string wrap = "rsa-1_5";
};

auto cmd_license_issue(const LicenseIssueArgs& a, std::istream& in, std::ostream& out) -> int {
    const auto lic = parse_license(read_text(a.license, in));
    const auto grant = authorize(lic, crypto::RsaPrivateKey::from_pem_file(a.key));
    const auto recipients = load_recipients(a.recipients);
    const auto xml = issue_license(grant.session_key, recipients, grant.manifest, {.wrap = parse_wrap(a.wrap)});
    StagedFile staged(a.out, as_bytes(xml));
    staged.commit();
    out << "issued license for " << recipients.size() << " recipient(s)\n";
    return 0;
}

struct LicenseShowArgs {
    std::string license;
    std::string key;
};

auto cmd_license_show(const LicenseShowArgs& a, std::istream& in, std::ostream& out) -> int {
    const auto lic = parse_license(read_text(a.license, in));
    out << "recipients: " << lic.recipient_count() << "\n"
        << "data algorithm: " << lic.data_algorithm << "\n";
    for (const auto& w : lic.wrapped_keys) {
        out << "key transport: " << w.wrap_algorithm << " (key name '" << w.key_name << "', "
            << w.cipher_values.size() << " wrapped)\n";
    }
    if (!a.key.empty()) {
        const auto grant = authorize(lic, crypto::RsaPrivateKey::from_pem_file(a.key));
        out << "manifest:\n" << std::string(grant.manifest.begin(), grant.manifest.end());
    }
    return 0;
}

struct ValidateArgs {
    std::string file;
    std::string reference;
    std::string format = "text";
    std::string policy;
};

auto cmd_validate(const ValidateArgs& a, std::ostream& out) -> int {
    const auto policy = load_policy(a.policy);
    const auto bytes = read_file(a.file);
    std::optional<Bytes> reference;
    if (!a.reference.empty()) {
        reference = read_file(a.reference);
    }
    const auto report = reference ? validate(bytes, std::span<const std::uint8_t>(*reference), policy)
                                  : validate(bytes, std::nullopt, policy);
    out << (a.format == "lines" ? report.to_lines() : report.to_text());
    return report.passed() ? 0 : 1;
}

}  // namespace

auto run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) -> int {
    CLI::App app{"Annotate DICOM files and protect selected elements with licensed keys", "dicomdrm"};
    app.require_subcommand(1, 1);

    InspectArgs inspect;
    auto* inspect_cmd = app.add_subcommand("inspect", "Print the element table");
    inspect_cmd->add_option("file", inspect.file, "DICOM file")->required();
    inspect_cmd->add_flag("--strict", inspect.strict, "Require preamble, magic and transfer syntax");

    AnnotateArgs annotate;
    auto* annotate_cmd = app.add_subcommand("annotate", "Add one multimedia annotation before pixel data");
    annotate_cmd->add_option("file", annotate.file, "DICOM file")->required();
    annotate_cmd->add_option("--kind", annotate.kind, "link, image, audio, video or animation (or 1-5)")->required();
    annotate_cmd->add_option("--index", annotate.index, "Sequence number within the view")->required();
    annotate_cmd->add_option("--x", annotate.x, "Pixel column")->required();
    annotate_cmd->add_option("--y", annotate.y, "Pixel row")->required();
    auto* payload_opt = annotate_cmd->add_option("--payload-file", annotate.payload_file, "Embed this file (by value)");
    auto* uri_opt = annotate_cmd->add_option("--uri", annotate.uri, "Store this URI (by reference)");
    payload_opt->excludes(uri_opt);
    annotate_cmd->add_option("-o,--out", annotate.out, "Output file (default: rewrite input)");

    AnnotationsArgs annotations;
    auto* annotations_cmd = app.add_subcommand("annotations", "List or extract annotations");
    annotations_cmd->add_option("file", annotations.file, "DICOM file")->required();
    annotations_cmd->add_option("--extract", annotations.extract, "Listing number to extract");
    annotations_cmd->add_option("-o,--out", annotations.out, "Where to write the extracted payload");
    annotations_cmd->add_flag("--resolve", annotations.resolve, "Fetch store-by-reference payloads");
    annotations_cmd->add_option("--token", annotations.token, "Bearer token for HTTP(S) references");

    ProtectArgs protect;
    auto* protect_cmd = app.add_subcommand("protect", "Encrypt selected elements and issue a license");
    protect_cmd->add_option("file", protect.file, "DICOM file")->required();
    protect_cmd->add_option("-o,--out", protect.out, "Protected output file")->required();
    protect_cmd->add_option("--license", protect.license, "License output file")->required();
    protect_cmd->add_option("--select", protect.select, "Tag to encrypt, GGGG,EEEE (repeatable)");
    protect_cmd->add_option("--select-class", protect.select_class, "Select a policy class: must, with-image");
    auto* strict_flag = protect_cmd->add_flag("--strict", protect.strict, "Reject policy violations (default)");
    auto* coerce_flag = protect_cmd->add_flag("--coerce", protect.coerce, "Expand the selection to satisfy the policy");
    strict_flag->excludes(coerce_flag);
    protect_cmd->add_option("--recipient", protect.recipients, "Recipient RSA public key PEM (repeatable)")
        ->required();
    protect_cmd->add_option("--policy", protect.policy, "Policy file");
    protect_cmd->add_option("--cipher", protect.cipher, "aes256 (default) or aes128");
    protect_cmd->add_option("--wrap", protect.wrap, "rsa-1_5 (default) or rsa-oaep");

    UnprotectArgs unprotect;
    auto* unprotect_cmd = app.add_subcommand("unprotect", "Decrypt the elements granted by a license");
    unprotect_cmd->add_option("file", unprotect.file, "Protected DICOM file")->required();
    unprotect_cmd->add_option("-o,--out", unprotect.out, "Restored output file")->required();
    unprotect_cmd->add_option("--license", unprotect.license, "License file ('-' for stdin)")->required();
    unprotect_cmd->add_option("--key", unprotect.key, "Recipient RSA private key PEM")->required();

    LicenseIssueArgs license_issue;
    auto* issue_cmd = app.add_subcommand("license-issue", "Re-issue a license's session key to new recipients");
    issue_cmd->add_option("--license", license_issue.license, "Existing license ('-' for stdin)")->required();
    issue_cmd->add_option("--key", license_issue.key, "Private key of a current recipient")->required();
    issue_cmd->add_option("--recipient", license_issue.recipients, "New recipient public key PEM (repeatable)")
        ->required();
    issue_cmd->add_option("-o,--out", license_issue.out, "New license file")->required();
    issue_cmd->add_option("--wrap", license_issue.wrap, "rsa-1_5 (default) or rsa-oaep");

    LicenseShowArgs license_show;
    auto* show_cmd = app.add_subcommand("license-show", "Summarize a license");
    show_cmd->add_option("license", license_show.license, "License file ('-' for stdin)")->required();
    show_cmd->add_option("--key", license_show.key, "Private key; also print the decrypted manifest");

    ValidateArgs validate_args;
    auto* validate_cmd = app.add_subcommand("validate", "Check DICOM compatibility of a file");
    validate_cmd->add_option("file", validate_args.file, "DICOM file")->required();
    validate_cmd->add_option("--reference", validate_args.reference, "Original file to compare against");
    validate_cmd->add_option("--format", validate_args.format, "text (default) or lines")
        ->check(CLI::IsMember({"text", "lines"}));
    validate_cmd->add_option("--policy", validate_args.policy, "Policy file");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (inspect_cmd->parsed()) return cmd_inspect(inspect, out);
        if (annotate_cmd->parsed()) return cmd_annotate(annotate, out);
        if (annotations_cmd->parsed()) return cmd_annotations(annotations, out, err);
        if (protect_cmd->parsed()) return cmd_protect(protect, out, err);
        if (unprotect_cmd->parsed()) return cmd_unprotect(unprotect, in, out);
        if (issue_cmd->parsed()) return cmd_license_issue(license_issue, in, out);
        if (show_cmd->parsed()) return cmd_license_show(license_show, in, out);
        if (validate_cmd->parsed()) return cmd_validate(validate_args, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace dicomdrm::cli
