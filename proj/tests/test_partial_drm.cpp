#include "dicomdrm/partial_drm.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>

namespace dicomdrm {
namespace {

using testing::bytes_of;

const Tag kPatientId{0x0010, 0x0020};

auto identity() -> std::set<Tag> { return {{0x0010, 0x0010}, kPatientId, {0x0010, 0x0030}, {0x0010, 0x0040}}; }

auto strict(const std::set<Tag>& selection, const Dataset& ds) -> ValidatedSelection {
    return validate_selection(selection, ds, EncryptionPolicy::defaults());
}

TEST(Encrypt, EmptySelectionIsIdentity) {
    const auto ds = testing::twelve_element_fixture();
    const auto sk = generate_session_key();
    const auto r = encrypt_elements(ds, strict({}, ds), sk);
    EXPECT_EQ(r.dataset, ds);
    EXPECT_TRUE(r.manifest.empty());
}

TEST(Encrypt, PatientIdBecomesFirstEncryptedElementInPlace) {
    const auto ds = testing::image_fixture();
    const auto sk = generate_session_key();
    const auto r = encrypt_elements(ds, strict(identity(), ds), sk);

    const auto pos = find(ds, kPatientId).front();
    const auto& sealed = r.dataset.elements[pos];
    EXPECT_EQ(sealed.tag, (Tag{0x7777, 0x0002}));
    EXPECT_EQ(r.dataset.elements[pos - 1].tag, (Tag{0x7777, 0x0001}));
    EXPECT_EQ(sealed.vr, vrs::OB);
    EXPECT_EQ(sealed.value.size() % 16, 0U);
    EXPECT_EQ(r.dataset.elements.size(), ds.elements.size());

    const auto unsealed = testing::oracle_unseal(sealed.value, sk.material);
    ASSERT_TRUE(unsealed);
    EXPECT_EQ(unsealed->tag, kPatientId);
    EXPECT_EQ(unsealed->vr, "LO");
    EXPECT_EQ(unsealed->vl, 10U);
    EXPECT_EQ(unsealed->value, bytes_of("PID-000042"));

    ASSERT_EQ(r.manifest.size(), 4U);
    EXPECT_EQ(r.manifest[1], (RemapEntry{{0x7777, 0x0002}, kPatientId, Vr("LO")}));
    EXPECT_TRUE(format_manifest(r.manifest).starts_with("7777,0001 <- 0010,0010 PN\n7777,0002 <- 0010,0020 LO\n"));
}

TEST(Encrypt, SingleSelectionOnDiscretionaryFixture) {
    const auto ds = testing::twelve_element_fixture();
    const auto sk = generate_session_key();
    const Tag modality{0x0008, 0x0060};
    const auto r = encrypt_elements(ds, strict({modality}, ds), sk);
    ASSERT_EQ(r.manifest.size(), 1U);
    EXPECT_EQ(r.manifest[0].encrypted, (Tag{0x7777, 0x0001}));
    EXPECT_EQ(r.dataset.elements[4].tag, (Tag{0x7777, 0x0001}));
    EXPECT_EQ(decrypt_elements(r.dataset, sk), ds);
}

TEST(Encrypt, CiphertextIsFresh) {
    const auto ds = testing::image_fixture();
    const auto sk = generate_session_key();
    const auto a = encrypt_elements(ds, strict(identity(), ds), sk);
    const auto b = encrypt_elements(ds, strict(identity(), ds), sk);
    EXPECT_NE(serialize(a.dataset), serialize(b.dataset));
    EXPECT_EQ(decrypt_elements(a.dataset, sk), decrypt_elements(b.dataset, sk));
}

TEST(Encrypt, SeededIvsAreReproducible) {
    const auto ds = testing::image_fixture();
    const auto sk = generate_session_key();
    const auto a = encrypt_elements(ds, strict(identity(), ds), sk, testing::seeded_ivs(5));
    const auto b = encrypt_elements(ds, strict(identity(), ds), sk, testing::seeded_ivs(5));
    EXPECT_EQ(serialize(a.dataset), serialize(b.dataset));
}

TEST(Encrypt, CounterContinuesAfterExistingElements) {
    const auto ds = testing::image_fixture();
    const auto sk1 = generate_session_key();
    const auto first = encrypt_elements(ds, strict(identity(), ds), sk1);
    const Tag modality{0x0008, 0x0060};
    const auto sk2 = generate_session_key(DataCipher::aes128_cbc);
    const auto second = encrypt_elements(first.dataset, strict({modality}, first.dataset), sk2);
    ASSERT_EQ(second.manifest.size(), 1U);
    EXPECT_EQ(second.manifest[0].encrypted, (Tag{0x7777, 0x0005}));

    std::set<Tag> only2{second.manifest[0].encrypted};
    const auto peeled = decrypt_elements(second.dataset, sk2, only2);
    EXPECT_EQ(peeled, first.dataset);
    EXPECT_EQ(decrypt_elements(peeled, sk1), ds);
}

TEST(Encrypt, ReportsSelectedButAbsentTags) {
    const auto ds = testing::twelve_element_fixture();
    const Tag absent{0x0008, 0x1030};
    const auto r = encrypt_elements(ds, strict({absent}, ds), generate_session_key());
    EXPECT_EQ(r.skipped, std::vector<Tag>{absent});
    EXPECT_EQ(r.dataset, ds);
}

TEST(Encrypt, RejectsWrongKeyLength) {
    const auto ds = testing::twelve_element_fixture();
    SessionKey bad{Bytes(20, 1), DataCipher::aes256_cbc};
    try {
        static_cast<void>(encrypt_elements(ds, strict({}, ds), bad));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_key);
    }
}

TEST(Decrypt, WrongKeyFailsAndLeavesInputUnchanged) {
    const auto ds = testing::image_fixture();
    const auto r = encrypt_elements(ds, strict(identity(), ds), generate_session_key());
    const auto before = r.dataset;
    for (int i = 0; i < 50; ++i) {
        try {
            static_cast<void>(decrypt_elements(r.dataset, generate_session_key()));
            FAIL() << "wrong key accepted";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::decryption_failed);
            EXPECT_NE(std::string(e.what()).find("key mismatch or corruption"), std::string::npos);
        }
    }
    EXPECT_EQ(r.dataset, before);
}

TEST(Decrypt, ShortCiphertext) {
    auto ds = testing::twelve_element_fixture();
    ds.elements[3] = testing::element(0x7777, 0x0001, "OB", Bytes(16, 0));
    try {
        static_cast<void>(decrypt_elements(ds, generate_session_key()));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ciphertext_too_short);
    }
}

TEST(Decrypt, TamperedCiphertextFails) {
    const auto ds = testing::image_fixture();
    const auto sk = generate_session_key();
    auto r = encrypt_elements(ds, strict(identity(), ds), sk);
    auto& value = r.dataset.elements[find(r.dataset, Tag{0x7777, 0x0002}).front()].value;
    value[value.size() - 17] ^= 0xFF;
    EXPECT_THROW(static_cast<void>(decrypt_elements(r.dataset, sk)), Error);
}

TEST(Leakage, SentinelsDoNotSurvive) {
    auto ds = testing::image_fixture();
    const std::string sentinel = "SENTINEL-PATIENT-0123456789";
    ds.elements[find(ds, Tag{0x0010, 0x0010}).front()].value = bytes_of(sentinel + "^X");
    const auto r = encrypt_elements(ds, strict(identity(), ds), generate_session_key());
    EXPECT_TRUE(testing::contains(serialize(ds), bytes_of(sentinel)));
    EXPECT_FALSE(testing::contains(serialize(r.dataset), bytes_of(sentinel)));
}

TEST(Records, RoundTripAndManifestInfo) {
    const auto ds = testing::image_fixture();
    const auto sk = generate_session_key();
    const auto r = encrypt_elements(ds, strict(identity(), ds), sk);
    const auto records = build_records(r.dataset, r.manifest);
    ASSERT_EQ(records.size(), ds.elements.size());
    EXPECT_FALSE(records.back().next.has_value());
    const auto& pid = records[find(ds, kPatientId).front()];
    EXPECT_TRUE(pid.encrypted);
    EXPECT_EQ(pid.info, "0010,0020 LO");
    EXPECT_EQ(pid.vl_field_length, 4);
    EXPECT_EQ(records_to_dataset(records, r.dataset.preamble), r.dataset);
}

TEST(Records, BrokenChainRejected) {
    auto records = build_records(testing::twelve_element_fixture());
    records[2].next = 1;
    EXPECT_THROW(static_cast<void>(records_to_dataset(records)), Error);
}

TEST(Manifest, ParseFormatRoundTrip) {
    const std::vector<RemapEntry> entries{{{0x7777, 0x0001}, {0x0010, 0x0010}, Vr("PN")},
                                          {{0x7777, 0x0002}, {0x7FE0, 0x0010}, Vr("OW")}};
    EXPECT_EQ(parse_manifest(format_manifest(entries)), entries);
    EXPECT_EQ(parse_manifest("7777,0001 <- 0010,0010 PN\r\n\r\n").size(), 1U);
    EXPECT_THROW(static_cast<void>(parse_manifest("7777,0001 -> 0010,0010 PN\n")), Error);
}

TEST(SessionKeys, DistinctAndSized) {
    std::set<Bytes> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto sk = generate_session_key();
        ASSERT_EQ(sk.material.size(), 32U);
        ASSERT_TRUE(seen.insert(sk.material).second);
    }
    EXPECT_EQ(generate_session_key(DataCipher::aes128_cbc).material.size(), 16U);
    EXPECT_EQ(data_cipher_from_uri(algorithm_uri(DataCipher::aes128_cbc)), DataCipher::aes128_cbc);
    EXPECT_THROW(static_cast<void>(data_cipher_from_uri("http://www.w3.org/2001/04/xmlenc#tripledes-cbc")), Error);
}

TEST(Aes128, RoundTrip) {
    const auto ds = testing::image_fixture();
    const auto sk = generate_session_key(DataCipher::aes128_cbc);
    const auto r = encrypt_elements(ds, strict(identity(), ds), sk);
    EXPECT_TRUE(testing::oracle_unseal(r.dataset.elements[find(ds, kPatientId).front()].value, sk.material));
    EXPECT_EQ(decrypt_elements(r.dataset, sk), ds);
}

// Property: random datasets with random valid selections round-trip.
TEST(Property, RandomDatasetsRoundTrip) {
    std::mt19937 rng(4242);
    const auto p = EncryptionPolicy::defaults();
    for (int i = 0; i < 200; ++i) {
        const auto ds = testing::random_dataset(rng);
        std::set<Tag> selection;
        for (const auto& el : ds.elements) {
            if (classify(el.tag, p) != PolicyClass::never_encrypt && rng() % 2 == 0) {
                selection.insert(el.tag);
            }
        }
        const auto valid = validate_selection(selection, ds, p, SelectionMode::coerce);
        const auto sk = generate_session_key();
        const auto r = encrypt_elements(ds, valid, sk);
        const auto bytes = serialize(r.dataset);
        ASSERT_EQ(decrypt_elements(parse(bytes, {.strict = true}), sk), ds) << "iteration " << i;
    }
}

}  // namespace
}  // namespace dicomdrm
