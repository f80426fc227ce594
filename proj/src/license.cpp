#include "dicomdrm/license.hpp"

#include "dicomdrm/error.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <optional>
#include <sstream>

namespace dicomdrm {

namespace pt = boost::property_tree;

namespace {

constexpr std::string_view kRsa15Uri = "http://www.w3.org/2001/04/xmlenc#rsa-1_5";
constexpr std::string_view kRsaOaepUri = "http://www.w3.org/2001/04/xmlenc#rsa-oaep-mgf1p";

auto escape(std::string_view s) -> std::string {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

[[noreturn]] void malformed(const std::string& what) {
    throw Error(ErrorCode::malformed_license, "malformed license: " + what);
}

auto local_name(std::string_view name) -> std::string_view {
    const auto colon = name.find(':');
    return colon == std::string_view::npos ? name : name.substr(colon + 1);
}

auto children(const pt::ptree& node, std::string_view name) -> std::vector<const pt::ptree*> {
    std::vector<const pt::ptree*> out;
    for (const auto& [key, child] : node) {
        if (local_name(key) == name) {
            out.push_back(&child);
        }
    }
    return out;
}

auto child(const pt::ptree& node, std::string_view name) -> const pt::ptree* {
    const auto all = children(node, name);
    return all.empty() ? nullptr : all.front();
}

auto algorithm_of(const pt::ptree& parent, std::string_view where) -> std::string {
    const auto* method = child(parent, "EncryptionMethod");
    if (method == nullptr) {
        malformed("missing EncryptionMethod in " + std::string(where));
    }
    const auto algorithm = method->get_optional<std::string>("<xmlattr>.Algorithm");
    if (!algorithm) {
        malformed("EncryptionMethod without Algorithm in " + std::string(where));
    }
    return *algorithm;
}

auto cipher_value(const pt::ptree& cipher_data) -> std::string {
    const auto* value = child(cipher_data, "CipherValue");
    if (value == nullptr) {
        malformed("CipherData without CipherValue");
    }
    std::string text = value->data();
    std::erase_if(text, [](char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; });
    if (!crypto::base64_decode(text)) {
        malformed("CipherValue is not valid base64");
    }
    return text;
}

auto wrap_padding(KeyWrap wrap) -> crypto::RsaPadding {
    return wrap == KeyWrap::rsa_oaep ? crypto::RsaPadding::oaep : crypto::RsaPadding::pkcs1_v15;
}

}  // namespace

auto wrap_uri(KeyWrap wrap) -> std::string_view { return wrap == KeyWrap::rsa_oaep ? kRsaOaepUri : kRsa15Uri; }

auto key_wrap_from_uri(std::string_view uri) -> KeyWrap {
    if (uri == kRsa15Uri) {
        return KeyWrap::rsa_1_5;
    }
    if (uri == kRsaOaepUri) {
        return KeyWrap::rsa_oaep;
    }
    throw Error(ErrorCode::unknown_algorithm, "unrecognized key transport algorithm '" + std::string(uri) + "'");
}

auto License::recipient_count() const -> std::size_t {
    std::size_t n = 0;
    for (const auto& w : wrapped_keys) {
        n += w.cipher_values.size();
    }
    return n;
}

auto make_license(const SessionKey& sk, std::span<const crypto::RsaPublicKey> recipients,
                  std::span<const std::uint8_t> manifest, const IssueOptions& options) -> License {
    if (recipients.empty()) {
        throw Error(ErrorCode::invalid_argument, "a license needs at least one recipient");
    }
    if (sk.material.size() != key_length(sk.algorithm)) {
        throw Error(ErrorCode::invalid_key, "session key length does not match " + std::string(sk.uri()));
    }

    License lic;
    lic.data_algorithm = std::string(sk.uri());
    WrappedKey wrapped;
    wrapped.key_name = options.key_name;
    wrapped.wrap_algorithm = std::string(wrap_uri(options.wrap));
    for (const auto& recipient : recipients) {
        if (recipient.bits() < min_rsa_bits) {
            throw Error(ErrorCode::rsa_key_too_small,
                        "RSA key of " + std::to_string(recipient.bits()) + " bits is too small; at least " +
                            std::to_string(min_rsa_bits) + " bits are required");
        }
        wrapped.cipher_values.push_back(
            crypto::base64_encode(recipient.encrypt(sk.material, wrap_padding(options.wrap))));
    }
    lic.wrapped_keys.push_back(std::move(wrapped));

    const auto iv = crypto::random_iv();
    const auto ciphertext = crypto::aes_cbc_encrypt(sk.material, iv, manifest);
    Bytes blob(iv.begin(), iv.end());
    blob.insert(blob.end(), ciphertext.begin(), ciphertext.end());
    lic.manifest_cipher = crypto::base64_encode(blob);
    return lic;
}

auto to_xml(const License& lic) -> std::string {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
        << "<article>\n"
        << "<EncryptedData Type=\"" << xmlenc_namespace << "Element\"\n"
        << "  xmlns=\"" << xmlenc_namespace << "\" >\n"
        << "<EncryptionMethod Algorithm=\"" << escape(lic.data_algorithm) << "\"/>\n"
        << "<KeyInfo xmlns=\"" << xmldsig_namespace << "\" >\n";
    for (const auto& wrapped : lic.wrapped_keys) {
        out << "<EncryptedKey xmlns=\"" << xmlenc_namespace << "\" >\n"
            << "  <EncryptionMethod Algorithm=\"" << escape(wrapped.wrap_algorithm) << "\" />\n"
            << "  <KeyInfo xmlns=\"" << xmldsig_namespace << "\" >\n"
            << "    <KeyName>" << escape(wrapped.key_name) << "</KeyName>\n"
            << "  </KeyInfo>\n";
        for (const auto& value : wrapped.cipher_values) {
            out << "  <CipherData>\n"
                << "    <CipherValue>" << value << "</CipherValue>\n"
                << "  </CipherData>\n";
        }
        out << "  </EncryptedKey>\n";
    }
    out << "</KeyInfo>\n"
        << "<CipherData>\n"
        << "  <CipherValue>" << lic.manifest_cipher << "</CipherValue>\n"
        << "</CipherData>\n"
        << "</EncryptedData>\n"
        << "</article>\n";
    return out.str();
}

auto issue_license(const SessionKey& sk, std::span<const crypto::RsaPublicKey> recipients,
                   std::span<const std::uint8_t> manifest, const IssueOptions& options) -> std::string {
    return to_xml(make_license(sk, recipients, manifest, options));
}

auto parse_license(std::string_view xml) -> License {
    pt::ptree root;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, root, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        malformed(std::string("invalid XML: ") + e.message() + " at line " + std::to_string(e.line()));
    }

    const pt::ptree* data = child(root, "EncryptedData");
    if (data == nullptr) {
        if (const auto* article = child(root, "article")) {
            data = child(*article, "EncryptedData");
        }
    }
    if (data == nullptr) {
        malformed("missing EncryptedData");
    }

    License lic;
    lic.data_algorithm = algorithm_of(*data, "EncryptedData");
    static_cast<void>(data_cipher_from_uri(lic.data_algorithm));

    const auto* key_info = child(*data, "KeyInfo");
    const auto encrypted_keys = key_info ? children(*key_info, "EncryptedKey") : std::vector<const pt::ptree*>{};
    if (encrypted_keys.empty()) {
        malformed("missing EncryptedKey");
    }
    for (const auto* ek : encrypted_keys) {
        WrappedKey wrapped;
        wrapped.wrap_algorithm = algorithm_of(*ek, "EncryptedKey");
        static_cast<void>(key_wrap_from_uri(wrapped.wrap_algorithm));
        wrapped.key_name.clear();
        if (const auto* inner = child(*ek, "KeyInfo")) {
            if (const auto* name = child(*inner, "KeyName")) {
                wrapped.key_name = name->data();
            }
        }
        for (const auto* cd : children(*ek, "CipherData")) {
            wrapped.cipher_values.push_back(cipher_value(*cd));
        }
        if (wrapped.cipher_values.empty()) {
            malformed("EncryptedKey without CipherData");
        }
        lic.wrapped_keys.push_back(std::move(wrapped));
    }

    const auto* outer = child(*data, "CipherData");
    if (outer == nullptr) {
        malformed("missing CipherData");
    }
    lic.manifest_cipher = cipher_value(*outer);
    return lic;
}

auto authorize(const License& lic, const crypto::RsaPrivateKey& key) -> Authorization {
    const DataCipher cipher = data_cipher_from_uri(lic.data_algorithm);
    const auto blob = crypto::base64_decode(lic.manifest_cipher);
    if (!blob) {
        malformed("manifest CipherValue is not valid base64");
    }

    bool unwrapped_any = false;
    for (const auto& wrapped : lic.wrapped_keys) {
        const auto padding = wrap_padding(key_wrap_from_uri(wrapped.wrap_algorithm));
        for (const auto& value : wrapped.cipher_values) {
            const auto cipher_bytes = crypto::base64_decode(value);
            if (!cipher_bytes) {
                continue;
            }
            auto material = key.decrypt(*cipher_bytes, padding);
            if (!material || material->size() != key_length(cipher)) {
                continue;
            }
            unwrapped_any = true;
            if (blob->size() < 2 * crypto::aes_block_size) {
                continue;
            }
            crypto::Iv iv{};
            std::copy_n(blob->begin(), iv.size(), iv.begin());
            const std::span<const std::uint8_t> body(blob->data() + iv.size(), blob->size() - iv.size());
            auto manifest = crypto::aes_cbc_decrypt(*material, iv, body);
            if (!manifest) {
                continue;
            }
            return {SessionKey{std::move(*material), cipher}, std::move(*manifest)};
        }
    }
    if (unwrapped_any) {
        throw Error(ErrorCode::license_key_mismatch, "license/key mismatch: the manifest does not decrypt");
    }
    throw Error(ErrorCode::not_authorized, "not an authorized recipient of this license");
}

}  // namespace dicomdrm
