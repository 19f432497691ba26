#include <doctest.h>

#include <fstream>

#include "dimsim/measure.hpp"
#include "dimsim/pdl.hpp"
#include "support/ref_sha256.hpp"
#include "support/temp_dir.hpp"

using namespace dimsim;
using namespace dimsim::pdl;

namespace {

struct Consortium {
    SigningKey sp_key = SigningKey::generate();
    SigningKey vendor_key = SigningKey::generate();
    SigningKey svc_key = SigningKey::generate();

    std::vector<Participant> participants() const {
        return {{"sp", Role::SolutionProvider, sp_key.verify_key()},
                {"vendor", Role::DeviceVendor, vendor_key.verify_key()},
                {"svc", Role::ServiceProvider, svc_key.verify_key()}};
    }

    const SigningKey& key_of(const std::string& id) const {
        if (id == "sp") return sp_key;
        if (id == "vendor") return vendor_key;
        return svc_key;
    }
};

ContractRecord registration(const std::string& software_id, const Digest& hash) {
    return {ContractKind::BenchmarkRegistration, software_id, hash, std::nullopt, "vendor"};
}

Bytes read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const Bytes& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
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

TEST_SUITE_BEGIN("pdl");

TEST_CASE("quorum is ceil(2n/3) distinct valid signers, enumerated for 3 parties") {
    Consortium c;
    const std::vector<std::string> ids = {"sp", "vendor", "svc"};

    for (unsigned mask = 0; mask < 8; ++mask) {
        testsupport::TempDir dir("pdl");
        Ledger ledger = Ledger::open(dir.file("l.ledger"), c.participants());
        CHECK(ledger.quorum_threshold() == 2);

        ContractRecord rec = registration("fw.a", measure::hash_bytes("v1"));
        std::vector<BlockSignature> sigs;
        for (std::size_t i = 0; i < 3; ++i) {
            if (mask & (1u << i)) {
                sigs.push_back(Ledger::sign_records({rec}, ids[i], c.key_of(ids[i])));
            }
        }
        std::size_t signers = sigs.size();
        if (signers >= 2) {
            const Block& block = ledger.submit_contract(rec, sigs);
            CHECK(block.height == 0);
            CHECK(ledger.verify().ok);
        } else {
            CHECK(code_of([&] { ledger.submit_contract(rec, sigs); }) == Errc::quorum_not_met);
            CHECK(ledger.blocks().empty());
        }
    }
}

TEST_CASE("duplicate signatures count once") {
    Consortium c;
    testsupport::TempDir dir("pdl");
    Ledger ledger = Ledger::open(dir.file("l.ledger"), c.participants());
    ContractRecord rec = registration("fw.a", measure::hash_bytes("v1"));
    auto sig = Ledger::sign_records({rec}, "vendor", c.vendor_key);
    CHECK(code_of([&] { ledger.submit_contract(rec, {sig, sig}); }) == Errc::quorum_not_met);
}

TEST_CASE("unknown signers and bad signatures are rejected") {
    Consortium c;
    testsupport::TempDir dir("pdl");
    Ledger ledger = Ledger::open(dir.file("l.ledger"), c.participants());
    ContractRecord rec = registration("fw.a", measure::hash_bytes("v1"));

    SigningKey outsider = SigningKey::generate();
    auto stray = Ledger::sign_records({rec}, "mallory", outsider);
    CHECK(code_of([&] {
              ledger.submit_contract(rec, {Ledger::sign_records({rec}, "sp", c.sp_key), stray});
          }) == Errc::unknown_signer);

    // Right id, wrong key.
    auto forged = Ledger::sign_records({rec}, "sp", outsider);
    CHECK(code_of([&] {
              ledger.submit_contract(rec,
                                     {forged, Ledger::sign_records({rec}, "vendor", c.vendor_key)});
          }) == Errc::bad_signature);
    CHECK(ledger.blocks().empty());
}

TEST_CASE("benchmark lineage equals a replayed list oracle") {
    Consortium c;
    testsupport::TempDir dir("pdl");
    Ledger ledger = Ledger::open(dir.file("l.ledger"), c.participants());

    // Oracle: a plain list of (software_id, hash) in submission order.
    std::vector<std::pair<std::string, Digest>> oracle;
    std::mt19937_64 rng(41);
    for (int i = 0; i < 20; ++i) {
        std::string software_id = "fw." + std::to_string(rng() % 4);
        Digest hash = measure::hash_bytes("v" + std::to_string(i));
        ContractRecord rec = registration(software_id, hash);
        ledger.submit_contract(rec, {Ledger::sign_records({rec}, "sp", c.sp_key),
                                     Ledger::sign_records({rec}, "vendor", c.vendor_key)});
        oracle.emplace_back(software_id, hash);

        for (int id = 0; id < 5; ++id) {
            std::string key = "fw." + std::to_string(id);
            std::optional<Digest> expect;
            for (const auto& [k, v] : oracle) {
                if (k == key) expect = v;
            }
            CHECK(ledger.query_benchmark(key) == expect);
        }
    }
    CHECK(ledger.verify().ok);
}

TEST_CASE("pinned-height queries ignore later blocks") {
    Consortium c;
    testsupport::TempDir dir("pdl");
    Ledger ledger = Ledger::open(dir.file("l.ledger"), c.participants());
    Digest v1 = measure::hash_bytes("v1");
    Digest v2 = measure::hash_bytes("v2");
    for (const Digest& d : {v1, v2}) {
        ContractRecord rec = registration("fw.a", d);
        ledger.submit_contract(rec, {Ledger::sign_records({rec}, "sp", c.sp_key),
                                     Ledger::sign_records({rec}, "vendor", c.vendor_key)});
    }
    CHECK(ledger.query_benchmark("fw.a") == v2);
    CHECK(ledger.query_benchmark_at("fw.a", 1) == v1);
    CHECK(ledger.query_benchmark_at("fw.a", 0) == std::nullopt);
}

TEST_CASE("update contracts demand a vendor submitter and a provider receipt") {
    Consortium c;
    testsupport::TempDir dir("pdl");
    Ledger ledger = Ledger::open(dir.file("l.ledger"), c.participants());
    Digest v1 = measure::hash_bytes("v1");
    Digest v2 = measure::hash_bytes("v2");
    ContractRecord reg = registration("fw.a", v1);
    ledger.submit_contract(reg, {Ledger::sign_records({reg}, "sp", c.sp_key),
                                 Ledger::sign_records({reg}, "vendor", c.vendor_key)});

    Receipt confirmation = make_receipt("sp", v2, c.sp_key);
    ContractRecord update{ContractKind::SoftwareUpdateExecution, "fw.a", v2, confirmation,
                          "vendor"};
    auto sign_update = [&](std::initializer_list<std::string> signers) {
        std::vector<BlockSignature> sigs;
        for (const auto& id : signers) {
            sigs.push_back(Ledger::sign_records({update}, id, c.key_of(id)));
        }
        return sigs;
    };

    SUBCASE("happy path supersedes the registration") {
        ledger.execute_update_contract("fw.a", v2, confirmation, "vendor",
                                       sign_update({"sp", "vendor"}));
        CHECK(ledger.query_benchmark("fw.a") == v2);
        CHECK(ledger.has_update_contract("fw.a", v2));
        CHECK_FALSE(ledger.has_update_contract("fw.a", v1));
        CHECK(ledger.verify().ok);
    }
    SUBCASE("receipt over the wrong digest") {
        Receipt wrong = make_receipt("sp", v1, c.sp_key);
        CHECK(code_of([&] {
                  ledger.execute_update_contract("fw.a", v2, wrong, "vendor",
                                                 sign_update({"sp", "vendor"}));
              }) == Errc::bad_confirmation);
    }
    SUBCASE("receipt signed by a non-provider") {
        Receipt svc_receipt = make_receipt("svc", v2, c.svc_key);
        CHECK(code_of([&] {
                  ledger.execute_update_contract("fw.a", v2, svc_receipt, "vendor",
                                                 sign_update({"sp", "vendor"}));
              }) == Errc::bad_confirmation);
    }
    SUBCASE("solution provider cannot submit the vendor's update") {
        CHECK(code_of([&] {
                  ledger.execute_update_contract("fw.a", v2, confirmation, "sp",
                                                 sign_update({"sp", "vendor"}));
              }) == Errc::wrong_role);
    }
    SUBCASE("a record claiming update execution without a receipt never encodes") {
        ContractRecord bare{ContractKind::SoftwareUpdateExecution, "fw.a", v2, std::nullopt,
                            "vendor"};
        CHECK(code_of([&] { canonical_contract_bytes(bare); }) == Errc::bad_confirmation);
    }
}

TEST_CASE("ledger file survives reopen and dumps human-readably") {
    Consortium c;
    testsupport::TempDir dir("pdl");
    std::string path = dir.file("l.ledger");
    {
        Ledger ledger = Ledger::open(path, c.participants());
        for (int i = 0; i < 3; ++i) {
            ContractRecord rec = registration("fw." + std::to_string(i),
                                              measure::hash_bytes("v" + std::to_string(i)));
            ledger.submit_contract(rec, {Ledger::sign_records({rec}, "sp", c.sp_key),
                                         Ledger::sign_records({rec}, "vendor", c.vendor_key)});
        }
    }
    Ledger reopened = Ledger::open(path, {});
    CHECK(reopened.blocks().size() == 3);
    CHECK(reopened.participants().size() == 3);
    CHECK(reopened.verify().ok);
    CHECK(Ledger::verify_file(path).ok);

    std::string dump = Ledger::dump_file(path);
    CHECK(dump.find("BenchmarkRegistration") != std::string::npos);
    CHECK(dump.find("block 2") != std::string::npos);
    CHECK(dump.find("verification: ok") != std::string::npos);

    // A mismatched consortium is refused.
    Consortium other;
    CHECK_THROWS_AS(Ledger::open(path, other.participants()), Error);
}

TEST_CASE("flipping a byte in a block is detected at that height") {
    Consortium c;
    testsupport::TempDir dir("pdl");
    std::string path = dir.file("l.ledger");
    std::size_t block2_offset = 0;
    {
        Ledger ledger = Ledger::open(path, c.participants());
        for (int i = 0; i < 3; ++i) {
            ContractRecord rec = registration("fw." + std::to_string(i),
                                              measure::hash_bytes("v" + std::to_string(i)));
            ledger.submit_contract(rec, {Ledger::sign_records({rec}, "sp", c.sp_key),
                                         Ledger::sign_records({rec}, "vendor", c.vendor_key)});
        }
    }
    Bytes raw = read_file_bytes(path);

    // Walk the documented framing to the block at height 2.
    std::size_t pos = 4 + 1;  // magic + version
    std::size_t count = (raw[pos] << 8) | raw[pos + 1];
    pos += 2;
    for (std::size_t i = 0; i < count; ++i) pos += 1 + raw[pos] + 1 + 32;
    for (int height = 0; height < 2; ++height) {
        std::uint32_t len = (std::uint32_t(raw[pos]) << 24) | (std::uint32_t(raw[pos + 1]) << 16) |
                            (std::uint32_t(raw[pos + 2]) << 8) | std::uint32_t(raw[pos + 3]);
        pos += 4 + len + 32;
    }
    block2_offset = pos;

    // Flip a byte inside block 2's record region (after height+prev+count).
    Bytes mutated = raw;
    mutated[block2_offset + 4 + 8 + 32 + 2 + 1] ^= 0x01;
    write_file_bytes(path, mutated);
    LedgerAudit audit = Ledger::verify_file(path);
    CHECK_FALSE(audit.ok);
    CHECK(audit.first_bad_height == 2);
}

TEST_CASE("stripping a signature from a minimal-quorum block is detected") {
    Consortium c;
    testsupport::TempDir dir("pdl");
    std::string path = dir.file("l.ledger");
    {
        Ledger ledger = Ledger::open(path, c.participants());
        ContractRecord rec = registration("fw.a", measure::hash_bytes("v1"));
        ledger.submit_contract(rec, {Ledger::sign_records({rec}, "sp", c.sp_key),
                                     Ledger::sign_records({rec}, "vendor", c.vendor_key)});
    }
    Bytes raw = read_file_bytes(path);

    std::size_t pos = 5;
    std::size_t count = (raw[pos] << 8) | raw[pos + 1];
    pos += 2;
    for (std::size_t i = 0; i < count; ++i) pos += 1 + raw[pos] + 1 + 32;
    std::uint32_t len = (std::uint32_t(raw[pos]) << 24) | (std::uint32_t(raw[pos + 1]) << 16) |
                        (std::uint32_t(raw[pos + 2]) << 8) | std::uint32_t(raw[pos + 3]);
    Bytes block(raw.begin() + pos + 4, raw.begin() + pos + 4 + len);

    // Drop the trailing signature and fix the count, then rebuild the stored
    // block hash with the independent hasher so only the quorum check can
    // object. Locate the signature section by parsing the block forward.
    std::size_t cursor = 8 + 32;  // height + prev
    std::size_t record_count = (block[cursor] << 8) | block[cursor + 1];
    cursor += 2;
    for (std::size_t i = 0; i < record_count; ++i) {
        cursor += 1;                          // kind
        cursor += 1 + block[cursor];          // software_id
        cursor += 32;                         // payload hash
        bool has_receipt = block[cursor] == 1;
        cursor += 1;
        if (has_receipt) {
            cursor += 1 + block[cursor];      // provider id
            cursor += 32 + 64;                // digest + signature
        }
        cursor += 1 + block[cursor];          // submitted_by
    }
    std::size_t sig_count_at = cursor;
    REQUIRE(block[sig_count_at] == 2);
    std::size_t first_sig_len = 1 + block[sig_count_at + 1] + 64;
    Bytes stripped(block.begin(), block.begin() + sig_count_at);
    stripped.push_back(1);
    stripped.insert(stripped.end(), block.begin() + sig_count_at + 1,
                    block.begin() + sig_count_at + 1 + first_sig_len);

    auto new_hash = testsupport::ref_sha256(stripped);
    Bytes rebuilt(raw.begin(), raw.begin() + pos);
    put_u32be(rebuilt, static_cast<std::uint32_t>(stripped.size()));
    rebuilt.insert(rebuilt.end(), stripped.begin(), stripped.end());
    rebuilt.insert(rebuilt.end(), new_hash.begin(), new_hash.end());
    write_file_bytes(path, rebuilt);

    LedgerAudit audit = Ledger::verify_file(path);
    CHECK_FALSE(audit.ok);
    CHECK(audit.first_bad_height == 0);
    CHECK(audit.detail.find("quorum") != std::string::npos);
}

TEST_SUITE_END();
