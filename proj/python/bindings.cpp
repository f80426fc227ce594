#include "dicomdrm/annotation.hpp"
#include "dicomdrm/crypto.hpp"
#include "dicomdrm/license.hpp"
#include "dicomdrm/partial_drm.hpp"
#include "dicomdrm/policy.hpp"
#include "dicomdrm/validator.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace dicomdrm;

namespace {

auto to_bytes(const py::bytes& b) -> Bytes {
    const std::string_view view = b;
    return {view.begin(), view.end()};
}

auto to_py(const Bytes& b) -> py::bytes { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

auto as_span(std::string_view s) -> std::span<const std::uint8_t> {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

auto load_policy(const std::optional<std::string>& text) -> EncryptionPolicy {
    return text ? EncryptionPolicy::from_text(*text) : EncryptionPolicy::defaults();
}

auto parse_cipher(const std::string& name) -> DataCipher {
    if (name == "aes256") return DataCipher::aes256_cbc;
    if (name == "aes128") return DataCipher::aes128_cbc;
    throw Error(ErrorCode::invalid_argument, "cipher must be aes256 or aes128, not '" + name + "'");
}

auto parse_wrap(const std::string& name) -> KeyWrap {
    if (name == "rsa-1_5") return KeyWrap::rsa_1_5;
    if (name == "rsa-oaep") return KeyWrap::rsa_oaep;
    throw Error(ErrorCode::invalid_argument, "wrap must be rsa-1_5 or rsa-oaep, not '" + name + "'");
}

auto annotation_dict(const Annotation& a) -> py::dict {
    py::dict d;
    d["kind"] = std::string(to_string(a.kind));
    d["index"] = a.index;
    d["x"] = a.x;
    d["y"] = a.y;
    if (const auto* ref = std::get_if<Reference>(&a.payload)) {
        d["uri"] = ref->uri;
        d["payload"] = py::none();
    } else {
        d["uri"] = py::none();
        d["payload"] = to_py(std::get<Bytes>(a.payload));
    }
    return d;
}

auto make_annotation(const std::string& kind, std::uint16_t index, std::uint16_t x, std::uint16_t y,
                     const std::optional<py::bytes>& payload, const std::optional<std::string>& uri) -> Annotation {
    if (payload.has_value() == uri.has_value()) {
        throw Error(ErrorCode::invalid_argument, "give exactly one of payload or uri");
    }
    Annotation a{parse_annotation_kind(kind), index, x, y, Reference{}};
    if (payload) {
        a.payload = to_bytes(*payload);
    } else {
        a.payload = Reference{*uri};
    }
    return a;
}

}  // namespace

PYBIND11_MODULE(_dicomdrm, m) {
    m.doc() = "DICOM multimedia annotations and partial encryption with XML licenses";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    static py::exception<PolicyError> policy_error(m, "PolicyError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const PolicyError& e) {
            py::list violations;
            for (const auto& v : e.violations()) {
                violations.append(py::make_tuple(v.tag.to_string(), std::string(to_string(v.policy_class)), v.rule));
            }
            py::object raised = py::handle(policy_error.ptr())(e.what());
            raised.attr("code") = std::string(to_string(e.code()));
            raised.attr("violations") = violations;
            PyErr_SetObject(policy_error.ptr(), raised.ptr());
        } catch (const Error& e) {
            py::object raised = py::handle(error.ptr())(e.what());
            raised.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error.ptr(), raised.ptr());
        }
    });

    m.def(
        "inspect",
        [](const py::bytes& data, bool strict) {
            const auto ds = parse(to_bytes(data), {.strict = strict});
            py::list rows;
            for (const auto& el : ds.elements) {
                rows.append(py::make_tuple(el.tag.to_string(), el.vr.str(),
                                           el.undefined_length ? py::object(py::none()) : py::int_(el.vl())));
            }
            return rows;
        },
        py::arg("data"), py::arg("strict") = false,
        "List (tag, VR, value length) for each top-level element; undefined lengths are None.");

    m.def(
        "encode_annotation",
        [](const std::string& kind, std::uint16_t index, std::uint16_t x, std::uint16_t y,
           std::optional<py::bytes> payload, std::optional<std::string> uri) {
            return to_py(encode_annotation(make_annotation(kind, index, x, y, payload, uri)).value);
        },
        py::arg("kind"), py::arg("index"), py::arg("x"), py::arg("y"), py::arg("payload") = py::none(),
        py::arg("uri") = py::none(), "Value field of a (0070,0006) annotation element.");

    m.def(
        "decode_annotation",
        [](const py::bytes& value) {
            DataElement el{tags::unformatted_text_value, vrs::ST, to_bytes(value), false};
            return annotation_dict(decode_annotation(el));
        },
        py::arg("value"));

    m.def(
        "add_annotation",
        [](const py::bytes& data, const std::string& kind, std::uint16_t index, std::uint16_t x, std::uint16_t y,
           std::optional<py::bytes> payload, std::optional<std::string> uri) {
            const auto ds = parse(to_bytes(data));
            return to_py(serialize(add_annotation(ds, make_annotation(kind, index, x, y, payload, uri))));
        },
        py::arg("data"), py::arg("kind"), py::arg("index"), py::arg("x"), py::arg("y"),
        py::arg("payload") = py::none(), py::arg("uri") = py::none(),
        "Return the file with one annotation inserted before pixel data.");

    m.def(
        "list_annotations",
        [](const py::bytes& data) {
            py::list out;
            for (const auto& a : list_annotations(parse(to_bytes(data)))) {
                out.append(annotation_dict(a));
            }
            return out;
        },
        py::arg("data"));

    m.def("default_policy", [] { return std::string(default_policy_text()); });

    m.def(
        "classify",
        [](const std::string& tag, std::optional<std::string> policy) {
            return std::string(to_string(classify(Tag::parse(tag), load_policy(policy))));
        },
        py::arg("tag"), py::arg("policy") = py::none());

    m.def(
        "generate_rsa_key",
        [](int bits) {
            const auto key = crypto::RsaPrivateKey::generate(bits);
            return py::make_tuple(key.to_pem(), key.public_key().to_pem());
        },
        py::arg("bits") = 2048, "Return (private PEM, public PEM).");

    m.def(
        "protect",
        [](const py::bytes& data, const std::vector<std::string>& select, const std::vector<std::string>& recipients,
           const std::string& mode, const std::string& cipher, const std::string& wrap,
           std::optional<std::string> policy) {
            const auto ds = parse(to_bytes(data));
            const auto p = load_policy(policy);
            std::set<Tag> selection;
            for (const auto& t : select) {
                selection.insert(Tag::parse(t));
            }
            if (mode != "strict" && mode != "coerce") {
                throw Error(ErrorCode::invalid_argument, "mode must be strict or coerce, not '" + mode + "'");
            }
            const auto valid =
                validate_selection(selection, ds, p, mode == "coerce" ? SelectionMode::coerce : SelectionMode::strict);
            std::vector<crypto::RsaPublicKey> keys;
            for (const auto& pem : recipients) {
                keys.push_back(crypto::RsaPublicKey::from_pem(pem));
            }
            const auto sk = generate_session_key(parse_cipher(cipher));
            const auto result = encrypt_elements(ds, valid, sk);
            const auto manifest = format_manifest(result.manifest);
            const auto xml = issue_license(sk, keys, as_span(manifest), {.wrap = parse_wrap(wrap)});
            return py::make_tuple(to_py(serialize(result.dataset)), xml, manifest);
        },
        py::arg("data"), py::arg("select"), py::arg("recipients"), py::arg("mode") = "strict",
        py::arg("cipher") = "aes256", py::arg("wrap") = "rsa-1_5", py::arg("policy") = py::none(),
        "Encrypt the selected tags; return (protected file, license XML, manifest text).");

    m.def(
        "unprotect",
        [](const py::bytes& data, const std::string& license, const std::string& private_key) {
            const auto grant = authorize(parse_license(license), crypto::RsaPrivateKey::from_pem(private_key));
            std::set<Tag> covered;
            for (const auto& e : parse_manifest(std::string(grant.manifest.begin(), grant.manifest.end()))) {
                covered.insert(e.encrypted);
            }
            return to_py(serialize(decrypt_elements(parse(to_bytes(data)), grant.session_key, covered)));
        },
        py::arg("data"), py::arg("license"), py::arg("private_key"),
        "Decrypt the elements listed in the license's manifest.");

    m.def(
        "license_info",
        [](const std::string& license, std::optional<std::string> private_key) {
            const auto lic = parse_license(license);
            py::dict d;
            d["recipients"] = lic.recipient_count();
            d["data_algorithm"] = lic.data_algorithm;
            py::list wraps;
            for (const auto& w : lic.wrapped_keys) {
                wraps.append(w.wrap_algorithm);
            }
            d["key_transport"] = wraps;
            d["manifest"] = py::none();
            if (private_key) {
                const auto grant = authorize(lic, crypto::RsaPrivateKey::from_pem(*private_key));
                d["manifest"] = std::string(grant.manifest.begin(), grant.manifest.end());
            }
            return d;
        },
        py::arg("license"), py::arg("private_key") = py::none());

    m.def(
        "validate",
        [](const py::bytes& data, std::optional<py::bytes> reference, std::optional<std::string> policy) {
            const auto bytes = to_bytes(data);
            const auto p = load_policy(policy);
            ValidationReport report;
            if (reference) {
                const auto ref = to_bytes(*reference);
                report = validate(bytes, std::span<const std::uint8_t>(ref), p);
            } else {
                report = validate(bytes, std::nullopt, p);
            }
            py::list findings;
            for (const auto& f : report.findings) {
                findings.append(py::make_tuple(std::string(to_string(f.severity)), f.code,
                                               f.tag ? py::object(py::str(f.tag->to_string())) : py::object(py::none()),
                                               f.message));
            }
            return py::make_tuple(report.passed(), findings);
        },
        py::arg("data"), py::arg("reference") = py::none(), py::arg("policy") = py::none(),
        "Return (passed, [(severity, check, tag or None, message), ...]).");
}
