import struct

import pytest

import dicomdrm


def element(group, elem, vr, value):
    if len(value) % 2:
        value += b" " if vr in ("CS", "LO", "PN", "DA") else b"\x00"
    if vr in ("OB", "OW"):
        return struct.pack("<HH2sHI", group, elem, vr.encode(), 0, len(value)) + value
    return struct.pack("<HH2sH", group, elem, vr.encode(), len(value)) + value


def image_file():
    body = [
        element(0x0002, 0x0010, "UI", b"1.2.840.10008.1.2.1\x00"),
        element(0x0008, 0x0018, "UI", b"1.2.826.0.1.3680043.8.498.1\x00"),
        element(0x0010, 0x0010, "PN", b"Doe^Jane"),
        element(0x0010, 0x0020, "LO", b"PID-SENTINEL-000042"),
        element(0x0010, 0x0030, "DA", b"19700101"),
        element(0x0010, 0x0040, "CS", b"F"),
        element(0x0028, 0x0010, "US", struct.pack("<H", 2)),
        element(0x0028, 0x0011, "US", struct.pack("<H", 2)),
        element(0x7FE0, 0x0010, "OW", bytes(range(8))),
    ]
    return b"\x00" * 128 + b"DICM" + b"".join(body)


IDENTITY = ["0010,0010", "0010,0020", "0010,0030", "0010,0040"]


@pytest.fixture(scope="module")
def keys():
    return dicomdrm.generate_rsa_key(), dicomdrm.generate_rsa_key()


def test_inspect_lists_elements():
    rows = dicomdrm.inspect(image_file(), strict=True)
    assert rows[3] == ("0010,0020", "LO", 20)
    assert rows[-1] == ("7FE0,0010", "OW", 8)


def test_annotation_header_bytes():
    value = dicomdrm.encode_annotation("audio", 1, 120, 160, payload=b"RIFF")
    assert value[:8] == bytes([0x03, 0x00, 0x01, 0x00, 0x78, 0x00, 0xA0, 0x00])
    decoded = dicomdrm.decode_annotation(value)
    assert (decoded["kind"], decoded["index"], decoded["x"], decoded["y"]) == ("audio", 1, 120, 160)
    assert decoded["payload"] == b"RIFF"


def test_annotations_precede_pixel_data():
    data = image_file()
    data = dicomdrm.add_annotation(data, "audio", 1, 120, 160, payload=b"a" * 0x015A)
    data = dicomdrm.add_annotation(data, "video", 2, 0, 0, uri="https://media.example/v.mp4")
    tags = [row[0] for row in dicomdrm.inspect(data, strict=True)]
    assert tags[-3:] == ["0070,0006", "0070,0006", "7FE0,0010"]
    assert dicomdrm.inspect(data)[-3][2] == 0x0162
    listed = dicomdrm.list_annotations(data)
    assert [a["index"] for a in listed] == [1, 2]
    assert listed[1]["uri"] == "https://media.example/v.mp4"


def test_capacity_error():
    with pytest.raises(dicomdrm.Error) as info:
        dicomdrm.encode_annotation("video", 1, 0, 0, payload=b"x" * 70000)
    assert info.value.code == "sbv_capacity"


def test_protect_unprotect_round_trip(keys):
    (alice_priv, alice_pub), (bob_priv, _) = keys
    data = image_file()
    protected, license_xml, manifest = dicomdrm.protect(data, IDENTITY, [alice_pub])
    assert b"PID-SENTINEL" not in protected
    assert "7777,0002 <- 0010,0020 LO" in manifest
    assert "<EncryptedKey" in license_xml
    passed, findings = dicomdrm.validate(protected, reference=data)
    assert passed, findings
    assert dicomdrm.unprotect(protected, license_xml, alice_priv) == data
    with pytest.raises(dicomdrm.Error) as info:
        dicomdrm.unprotect(protected, license_xml, bob_priv)
    assert info.value.code == "not_authorized"


def test_license_info(keys):
    (alice_priv, alice_pub), (_, bob_pub) = keys
    _, license_xml, manifest = dicomdrm.protect(image_file(), IDENTITY, [alice_pub, bob_pub], cipher="aes128")
    info = dicomdrm.license_info(license_xml)
    assert info["recipients"] == 2
    assert info["data_algorithm"].endswith("aes128-cbc")
    assert info["manifest"] is None
    assert dicomdrm.license_info(license_xml, alice_priv)["manifest"] == manifest


def test_policy_errors(keys):
    (_, alice_pub), _ = keys
    with pytest.raises(dicomdrm.PolicyError) as info:
        dicomdrm.protect(image_file(), IDENTITY + ["0008,0018"], [alice_pub])
    assert info.value.violations[0][:2] == ("0008,0018", "NeverEncrypt")
    with pytest.raises(dicomdrm.PolicyError):
        dicomdrm.protect(image_file(), IDENTITY + ["0028,0010"], [alice_pub])
    _, _, manifest = dicomdrm.protect(image_file(), ["0028,0010"], [alice_pub], mode="coerce")
    assert "<- 7FE0,0010 OW" in manifest and "<- 0010,0020 LO" in manifest


def test_classify_and_default_policy():
    assert dicomdrm.classify("0002,0010") == "NeverEncrypt"
    assert dicomdrm.classify("7FE0,0010") == "EncryptWithImage"
    assert dicomdrm.classify("0010,0020") == "MustEncrypt"
    assert dicomdrm.classify("0008,0060") == "Discretionary"
    assert "[never]" in dicomdrm.default_policy()


def test_parse_errors_carry_codes():
    with pytest.raises(dicomdrm.Error) as info:
        dicomdrm.inspect(b"\x00" * 10)
    assert info.value.code == "missing_magic"
