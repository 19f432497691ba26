#include <doctest.h>

#include <map>

#include "dimsim/wire.hpp"
#include "support/generators.hpp"

using namespace dimsim;
using namespace dimsim::wire;

namespace {

DisputePacket sample_packet() {
    DisputePacket p;
    p.device_id = to_bytes("dev01");
    p.applet_id = to_bytes("aa001");
    p.timestamp_us = 1'700'000'000'000'000ULL;  // fits 7 bytes
    p.current_hash = Digest::from_hex(
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    p.previous_hash = Digest::from_hex(
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    p.action_taken = ActionCode::InitiateInvestigation;
    return p;
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a dimsim::Error");
    return Errc::invalid_field;
}

}  // namespace

TEST_SUITE_BEGIN("wire");

TEST_CASE("action table matches the eight command codes") {
    const std::map<std::uint8_t, std::string> expected = {
        {0x00, "null"},
        {0x01, "Initiate investigation"},
        {0x02, "Restrict application or software execution"},
        {0x03, "Isolate device"},
        {0x04, "Contain device"},
        {0x05, "Revoke device"},
        {0x06, "Stop and quarantine a file"},
        {0x07, "Request deeper investigation"},
    };
    for (const auto& [id, label] : expected) {
        CHECK(action_name(to_action_code(id)) == label);
    }
    CHECK(code_of([] { to_action_code(0x08); }) == Errc::unknown_code);
    CHECK(code_of([] { to_action_code(0xFF); }) == Errc::unknown_code);
}

TEST_CASE("dispute packet encodes to the documented layout") {
    DisputePacket p = sample_packet();
    Bytes encoded = encode_dispute(p);

    // Independent byte count: three 1-byte prefixes + ids + timestamp + 3 digests.
    std::size_t ts_len = 7;  // 1.7e15 < 2^56
    CHECK(encoded.size() == 3 + p.device_id.size() + p.applet_id.size() + ts_len + 96);
    CHECK(encoded.size() == 116);

    std::size_t off = 0;
    CHECK(encoded[off] == 5);
    CHECK(Bytes(encoded.begin() + 1, encoded.begin() + 6) == p.device_id);
    off = 6;
    CHECK(encoded[off] == 5);
    CHECK(Bytes(encoded.begin() + 7, encoded.begin() + 12) == p.applet_id);
    off = 12;
    CHECK(encoded[off] == 7);
    // 1'700'000'000'000'000 = 0x060A24181E4000, big-endian over 7 bytes.
    CHECK(Bytes(encoded.begin() + 13, encoded.begin() + 20) ==
          Bytes{0x06, 0x0A, 0x24, 0x18, 0x1E, 0x40, 0x00});
    CHECK(std::equal(p.current_hash.bytes.begin(), p.current_hash.bytes.end(),
                     encoded.begin() + 20));
    CHECK(std::equal(p.previous_hash.bytes.begin(), p.previous_hash.bytes.end(),
                     encoded.begin() + 52));
    CHECK(encoded[84] == 0x01);  // action byte
    for (std::size_t i = 85; i < 116; ++i) CHECK(encoded[i] == 0x00);
}

TEST_CASE("dispute packet size stays inside 116..126 and round-trips") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        DisputePacket p = testsupport::random_dispute(rng);
        Bytes encoded = encode_dispute(p);
        CHECK(encoded.size() >= kDisputeMinEncodedSize);
        CHECK(encoded.size() <= kDisputeMaxEncodedSize);
        CHECK(decode_dispute(encoded) == p);
        CHECK(encode_dispute(p) == encoded);  // determinism
    }
}

TEST_CASE("dispute field validation") {
    DisputePacket p = sample_packet();

    SUBCASE("device id of length 4 is rejected") {
        p.device_id = to_bytes("dev1");
        CHECK(code_of([&] { encode_dispute(p); }) == Errc::invalid_field);
    }
    SUBCASE("device id of length 8 is rejected") {
        p.device_id = to_bytes("device01");
        CHECK(code_of([&] { encode_dispute(p); }) == Errc::invalid_field);
    }
    SUBCASE("empty input is truncated") {
        CHECK(code_of([] { decode_dispute(Bytes{}); }) == Errc::truncated);
    }
    SUBCASE("valid encoding with appended byte has trailing bytes") {
        Bytes encoded = encode_dispute(p);
        encoded.push_back(0x00);
        CHECK(code_of([&] { decode_dispute(encoded); }) == Errc::trailing_bytes);
    }
    SUBCASE("action byte 0x08 is invalid") {
        Bytes encoded = encode_dispute(p);
        encoded[84] = 0x08;
        CHECK(code_of([&] { decode_dispute(encoded); }) == Errc::invalid_field);
    }
    SUBCASE("nonzero reserved action bytes are invalid") {
        Bytes encoded = encode_dispute(p);
        encoded[100] = 0x01;
        CHECK(code_of([&] { decode_dispute(encoded); }) == Errc::invalid_field);
    }
    SUBCASE("id length byte outside 5-7 is invalid") {
        Bytes encoded = encode_dispute(p);
        encoded[0] = 4;
        CHECK(code_of([&] { decode_dispute(encoded); }) == Errc::invalid_field);
    }
    SUBCASE("non-canonical timestamp padding is invalid") {
        // Re-frame the 7-byte timestamp as 8 bytes with a zero pad byte.
        Bytes encoded = encode_dispute(p);
        Bytes padded(encoded.begin(), encoded.begin() + 12);
        padded.push_back(8);
        padded.push_back(0x00);
        padded.insert(padded.end(), encoded.begin() + 13, encoded.end());
        CHECK(code_of([&] { decode_dispute(padded); }) == Errc::invalid_field);
    }
    SUBCASE("timestamp length 9 cannot carry a 64-bit value") {
        Bytes encoded = encode_dispute(p);
        Bytes padded(encoded.begin(), encoded.begin() + 12);
        padded.push_back(9);
        padded.push_back(0x00);
        padded.push_back(0x00);
        padded.insert(padded.end(), encoded.begin() + 13, encoded.end());
        CHECK(code_of([&] { decode_dispute(padded); }) == Errc::invalid_field);
    }
}

TEST_CASE("apdu cases encode per ISO 7816-4 short form") {
    SUBCASE("case 1 is exactly the header") {
        ApduCommand c{0x80, 0x40, 0x00, 0x00, {}, std::nullopt};
        CHECK(encode_apdu(c) == Bytes{0x80, 0x40, 0x00, 0x00});
    }
    SUBCASE("case 2 appends Le") {
        ApduCommand c{0x80, 0x40, 0x00, 0x00, {}, 0x01};
        CHECK(encode_apdu(c) == Bytes{0x80, 0x40, 0x00, 0x00, 0x01});
    }
    SUBCASE("MATCH_HASHES is a 37-byte case-3 command") {
        ApduCommand c;
        c.cla = kAppletCla;
        c.ins = kInsMatchHashes;
        c.data = Bytes(32, 0xAB);
        Bytes encoded = encode_apdu(c);
        CHECK(encoded.size() == 37);  // 4 header + 1 Lc + 32 data
        CHECK(encoded[4] == 32);
    }
    SUBCASE("case 4 carries data then Le") {
        ApduCommand c{0x80, 0x10, 0x00, 0x00, Bytes{0xAA, 0xBB}, 0x7F};
        Bytes encoded = encode_apdu(c);
        CHECK(encoded == Bytes{0x80, 0x10, 0x00, 0x00, 0x02, 0xAA, 0xBB, 0x7F});
    }
    SUBCASE("oversized data is rejected") {
        ApduCommand c;
        c.data = Bytes(256, 0);
        CHECK(code_of([&] { encode_apdu(c); }) == Errc::invalid_field);
    }
}

TEST_CASE("apdu decode errors") {
    CHECK(code_of([] { decode_apdu(Bytes{0x80, 0x10}); }) == Errc::truncated);
    // Lc = 3 but only 2 data bytes follow.
    CHECK(code_of([] { decode_apdu(Bytes{0x80, 0x10, 0, 0, 3, 1, 2}); }) == Errc::lc_mismatch);
    // Lc = 1 with 3 bytes after it matches neither case 3 nor case 4.
    CHECK(code_of([] { decode_apdu(Bytes{0x80, 0x10, 0, 0, 1, 1, 2, 3}); }) == Errc::lc_mismatch);
    // Lc = 0 is reserved for extended length.
    CHECK(code_of([] { decode_apdu(Bytes{0x80, 0x10, 0, 0, 0, 9}); }) == Errc::lc_mismatch);
}

TEST_CASE("apdu and frame round-trips") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        ApduCommand cmd = testsupport::random_apdu(rng);
        CHECK(decode_apdu(encode_apdu(cmd)) == cmd);
        Frame f = testsupport::random_frame(rng);
        CHECK(decode_frame(encode_frame(f)) == f);
    }
}

TEST_CASE("frame validation") {
    Frame f{MsgType::Dispute, to_bytes("abc")};
    Bytes encoded = encode_frame(f);
    CHECK(encoded.size() == 6 + 3);
    CHECK(encoded[0] == kFrameVersion);

    SUBCASE("wrong version") {
        encoded[0] = 0x02;
        CHECK(code_of([&] { decode_frame(encoded); }) == Errc::invalid_field);
    }
    SUBCASE("unknown msg_type") {
        encoded[1] = 0x08;
        CHECK(code_of([&] { decode_frame(encoded); }) == Errc::unknown_code);
    }
    SUBCASE("declared length larger than payload") {
        encoded[5] = 0x04;
        CHECK(code_of([&] { decode_frame(encoded); }) == Errc::truncated);
    }
    SUBCASE("declared length smaller than payload") {
        encoded[5] = 0x02;
        CHECK(code_of([&] { decode_frame(encoded); }) == Errc::trailing_bytes);
    }
}

TEST_CASE("log entries and archives round-trip") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 500; ++i) {
        wire::LogEntry e = testsupport::random_log_entry(rng);
        CHECK(decode_log_entry(encode_log_entry(e)) == e);
    }
    std::vector<LogEntry> batch;
    for (int i = 0; i < 125; ++i) {
        LogEntry e = testsupport::random_log_entry(rng);
        e.t_s = 1000 + i;
        batch.push_back(e);
    }
    CHECK(decode_log_archive(encode_log_archive(batch)) == batch);
    CHECK(code_of([] { encode_log_archive({}); }) == Errc::malformed_batch);
    CHECK(code_of([] { decode_log_archive(Bytes{0x00}); }) == Errc::malformed_batch);
}

TEST_CASE("measurement report codec re-validates the composite") {
    measure::MeasurementReport report;
    report.software_id = "fw.dev01";
    report.measured_at_us = 42;
    report.per_artifact = {{"bin/app", measure::hash_bytes("one")},
                           {"lib/core", measure::hash_bytes("two")}};
    report.composite = measure::composite_of(report.per_artifact);

    Bytes encoded = encode_measurement_report(report);
    CHECK(decode_measurement_report(encoded) == report);

    // Flip a byte of the first per-artifact digest: composite check must fire.
    encoded[1 + report.software_id.size() + 8 + 5] ^= 0x01;
    CHECK_THROWS_AS(decode_measurement_report(encoded), Error);
}

TEST_CASE("apdu response codec") {
    ApduResponse ok = status_response(kSwOk, Bytes{0x01});
    CHECK(ok.sw1 == 0x90);
    CHECK(ok.sw2 == 0x00);
    CHECK(ok.sw() == kSwOk);
    Bytes encoded = encode_apdu_response(ok);
    CHECK(encoded == Bytes{0x01, 0x90, 0x00});
    CHECK(decode_apdu_response(encoded) == ok);
    CHECK(code_of([] { decode_apdu_response(Bytes{0x90}); }) == Errc::truncated);
}

TEST_CASE("receipt and provision-confirm codecs") {
    SigningKey key = SigningKey::generate();
    Receipt receipt = make_receipt("sp", measure::hash_bytes("fw"), key);
    CHECK(decode_receipt(encode_receipt(receipt)) == receipt);
    CHECK(verify_receipt(receipt, key.verify_key()));

    CHECK(decode_provision_confirm(encode_provision_confirm(receipt)) == receipt);
    CHECK(decode_provision_confirm(encode_provision_confirm(std::nullopt)) == std::nullopt);
}

TEST_CASE("decoders are total over arbitrary bytes") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 3000; ++i) {
        Bytes junk = testsupport::random_bytes(rng, rng() % 200);
        // Any structured error is fine; crashing or looping is not.
        try { (void)decode_dispute(junk); } catch (const Error&) {}
        try { (void)decode_apdu(junk); } catch (const Error&) {}
        try { (void)decode_frame(junk); } catch (const Error&) {}
        try { (void)decode_log_entry(junk); } catch (const Error&) {}
        try { (void)decode_log_archive(junk); } catch (const Error&) {}
        try { (void)decode_measurement_report(junk); } catch (const Error&) {}
        try { (void)decode_receipt(junk); } catch (const Error&) {}
        try { (void)decode_provision_confirm(junk); } catch (const Error&) {}
    }
}

TEST_SUITE_END();
