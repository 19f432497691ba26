#include <doctest.h>

#include "dimsim/measure.hpp"
#include "dimsim/verifier.hpp"
#include "dimsim/verifier_service.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace dimsim;
using namespace dimsim::verifier;

namespace {

wire::DisputePacket dispute_for(const Bytes& device_id, const Digest& current,
                                const Digest& previous, std::uint64_t ts = 1000) {
    wire::DisputePacket p;
    p.device_id = device_id;
    p.applet_id = to_bytes("aa001");
    p.timestamp_us = ts;
    p.current_hash = current;
    p.previous_hash = previous;
    p.action_taken = wire::ActionCode::InitiateInvestigation;
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

struct Fixture {
    testsupport::TempDir dir{"verifier"};
    immustore::Store store = immustore::Store::open(dir.file("v.store"), false);
    Verifier v{store, nullptr};
    Bytes device = to_bytes("dev01");
    Digest benchmark = measure::hash_bytes("benchmark");

    Fixture() {
        v.register_device(device, "fw.a");
        v.record_initial_benchmark("fw.a", benchmark, 10);
    }
};

}  // namespace

TEST_SUITE_BEGIN("verifier");

TEST_CASE("dispute truth table over {B,X} x {B,X,Y}") {
    Digest b = measure::hash_bytes("B");
    Digest x = measure::hash_bytes("X");
    Digest y = measure::hash_bytes("Y");

    for (const Digest& latest : {b, x}) {
        for (const Digest& disputed : {b, x, y}) {
            testsupport::TempDir dir("verifier");
            auto store = immustore::Store::open(dir.file("v.store"), false);
            Verifier v(store, nullptr);
            Bytes device = to_bytes("dev01");
            v.register_device(device, "fw.a");
            v.record_initial_benchmark("fw.a", latest, 10);

            DisputeDecision d = v.handle_dispute(dispute_for(device, disputed, b), 20);
            if (disputed == latest) {
                CHECK(d.kind == DisputeDecision::Kind::UpdateBenchmark);
                CHECK(d.benchmark == latest);
            } else {
                CHECK(d.kind == DisputeDecision::Kind::Action);
                CHECK(d.action == wire::ActionCode::RevokeDevice);
            }
        }
    }
}

TEST_CASE("decision determinism and audit completeness") {
    Fixture f;
    Digest x = measure::hash_bytes("X");
    wire::DisputePacket packet = dispute_for(f.device, x, f.benchmark);

    DisputeDecision first = f.v.handle_dispute(packet, 20);
    DisputeDecision second = f.v.handle_dispute(packet, 20);
    CHECK(first.same_outcome(second));
    CHECK(first.dispute_ref == second.dispute_ref);

    // Exactly one decision record per handled dispute, readable back.
    auto history = f.store.history("decision:" + to_hex(f.device));
    REQUIRE(history.size() == 2);
    DisputeDecision stored = decode_decision_record(history[0].value);
    CHECK(stored.same_outcome(first));
    CHECK(stored.dispute_ref == first.dispute_ref);
    CHECK(stored.decided_at_us == 20);
    CHECK(f.store.audit().ok);
}

TEST_CASE("dispute errors") {
    Fixture f;
    Digest x = measure::hash_bytes("X");
    CHECK(code_of([&] { f.v.handle_dispute(dispute_for(to_bytes("ghost"), x, x), 20); }) ==
          Errc::unknown_device);

    f.v.register_device(to_bytes("dev02"), "fw.unrecorded");
    CHECK(code_of([&] { f.v.handle_dispute(dispute_for(to_bytes("dev02"), x, x), 20); }) ==
          Errc::not_found);
}

TEST_CASE("update monotonicity: the old hash becomes a mismatch") {
    Fixture f;
    Digest updated = measure::hash_bytes("v2");
    f.v.record_initial_benchmark("fw.a", updated, 30);  // newer record wins

    DisputeDecision on_new = f.v.handle_dispute(dispute_for(f.device, updated, f.benchmark), 40);
    CHECK(on_new.kind == DisputeDecision::Kind::UpdateBenchmark);
    CHECK(on_new.benchmark == updated);

    DisputeDecision on_old = f.v.handle_dispute(dispute_for(f.device, f.benchmark, updated), 41);
    CHECK(on_old.kind == DisputeDecision::Kind::Action);
}

TEST_CASE("record_software_update verifies receipt and ledger contract") {
    testsupport::TempDir dir("verifier");
    SigningKey sp_key = SigningKey::generate();
    SigningKey vendor_key = SigningKey::generate();
    SigningKey svc_key = SigningKey::generate();
    std::vector<pdl::Participant> participants = {
        {"sp", pdl::Role::SolutionProvider, sp_key.verify_key()},
        {"vendor", pdl::Role::DeviceVendor, vendor_key.verify_key()},
        {"svc", pdl::Role::ServiceProvider, svc_key.verify_key()}};
    pdl::Ledger ledger = pdl::Ledger::open(dir.file("l.ledger"), participants);

    auto store = immustore::Store::open(dir.file("v.store"), false);
    Verifier v(store, &ledger);
    v.register_provider("sp", sp_key.verify_key());
    v.record_initial_benchmark("fw.a", measure::hash_bytes("v1"), 10);

    Digest v2 = measure::hash_bytes("v2");
    Receipt confirmation = make_receipt("sp", v2, sp_key);
    UpdateNotification notify{"fw.a", v2, confirmation};

    SUBCASE("no executed contract yet") {
        CHECK(code_of([&] { v.record_software_update(notify, 50); }) ==
              Errc::no_matching_contract);
    }
    SUBCASE("bad receipt signature") {
        pdl::ContractRecord rec{pdl::ContractKind::SoftwareUpdateExecution, "fw.a", v2,
                                confirmation, "vendor"};
        ledger.execute_update_contract(
            "fw.a", v2, confirmation, "vendor",
            {pdl::Ledger::sign_records({rec}, "sp", sp_key),
             pdl::Ledger::sign_records({rec}, "vendor", vendor_key)});
        UpdateNotification forged = notify;
        forged.confirmation.signature[0] ^= 0x01;
        CHECK(code_of([&] { v.record_software_update(forged, 50); }) == Errc::bad_receipt);
        CHECK(store.size() == 1);  // store unchanged

        UpdateNotification unknown = notify;
        unknown.confirmation.provider_id = "ghost";
        CHECK(code_of([&] { v.record_software_update(unknown, 50); }) == Errc::bad_receipt);
    }
    SUBCASE("happy path makes the new hash latest") {
        pdl::ContractRecord rec{pdl::ContractKind::SoftwareUpdateExecution, "fw.a", v2,
                                confirmation, "vendor"};
        ledger.execute_update_contract(
            "fw.a", v2, confirmation, "vendor",
            {pdl::Ledger::sign_records({rec}, "sp", sp_key),
             pdl::Ledger::sign_records({rec}, "vendor", vendor_key)});
        v.record_software_update(notify, 50);
        auto latest = store.get_latest("fw.a");
        REQUIRE(latest.has_value());
        CHECK(Digest::from_span(latest->first.value) == v2);

        // Cross-module consistency: ledger and store agree on the digest.
        CHECK(ledger.query_benchmark("fw.a") == v2);

        Bytes device = to_bytes("dev01");
        v.register_device(device, "fw.a");
        DisputeDecision d = v.handle_dispute(dispute_for(device, v2, measure::hash_bytes("v1")),
                                             60);
        CHECK(d.kind == DisputeDecision::Kind::UpdateBenchmark);
    }
}

TEST_CASE("archive ingestion") {
    Fixture f;
    std::vector<wire::LogEntry> batch;
    std::mt19937_64 rng(43);
    for (int i = 0; i < 125; ++i) {
        wire::LogEntry e = testsupport::random_log_entry(rng);
        e.t_s = 1000 + i;
        batch.push_back(e);
    }
    auto [count, root] = f.v.ingest_archive(batch, f.device, 2000);
    CHECK(count == 125);
    CHECK(f.store.history("log:" + to_hex(f.device)).size() == 125);
    CHECK(root.entry_count == f.store.size());

    CHECK(code_of([&] { f.v.ingest_archive({}, f.device, 2000); }) == Errc::malformed_batch);
    std::swap(batch[0], batch[1]);
    batch[0].t_s = 5000;  // now out of order
    CHECK(code_of([&] { f.v.ingest_archive(batch, f.device, 2000); }) == Errc::malformed_batch);
}

TEST_CASE("quorum requires unanimity") {
    Digest x = measure::hash_bytes("X");
    DisputeDecision act{DisputeDecision::Kind::Action, {}, wire::ActionCode::RevokeDevice, {}, 1};
    DisputeDecision upd{DisputeDecision::Kind::UpdateBenchmark, x, wire::ActionCode::Null, {}, 1};

    QuorumConfig one{{"v0"}};
    QuorumConfig three{{"v0", "v1", "v2"}};

    SUBCASE("single verifier is a trivial quorum") {
        auto outcome = quorum_decide(one, {act});
        CHECK(std::holds_alternative<DisputeDecision>(outcome));
    }
    SUBCASE("three agreeing verifiers") {
        auto outcome = quorum_decide(three, {act, act, act});
        REQUIRE(std::holds_alternative<DisputeDecision>(outcome));
        CHECK(std::get<DisputeDecision>(outcome).action == wire::ActionCode::RevokeDevice);
    }
    SUBCASE("any disagreement is NoQuorum") {
        CHECK(std::holds_alternative<NoQuorum>(quorum_decide(three, {act, act, upd})));
        DisputeDecision other_action = act;
        other_action.action = wire::ActionCode::IsolateDevice;
        CHECK(std::holds_alternative<NoQuorum>(quorum_decide(three, {act, other_action, act})));
        DisputeDecision other_digest = upd;
        other_digest.benchmark = measure::hash_bytes("Y");
        CHECK(std::holds_alternative<NoQuorum>(quorum_decide(three, {upd, other_digest, upd})));
    }
    SUBCASE("missing votes are incomplete, not NoQuorum") {
        CHECK(code_of([&] { quorum_decide(three, {act, act}); }) == Errc::incomplete_vote);
    }
}

TEST_CASE("update notification codec round-trips") {
    SigningKey sp = SigningKey::generate();
    Digest v2 = measure::hash_bytes("v2");
    UpdateNotification n{"fw.demo", v2, make_receipt("sp", v2, sp)};
    UpdateNotification back = decode_update_notification(encode_update_notification(n));
    CHECK(back.software_id == n.software_id);
    CHECK(back.new_hash == n.new_hash);
    CHECK(back.confirmation == n.confirmation);
}

TEST_CASE("decision codecs match the pinned payload layout") {
    Digest x = measure::hash_bytes("X");
    DisputeDecision act{DisputeDecision::Kind::Action, {}, wire::ActionCode::IsolateDevice,
                        measure::hash_bytes("ref"), 7};
    DisputeDecision upd{DisputeDecision::Kind::UpdateBenchmark, x, wire::ActionCode::Null,
                        measure::hash_bytes("ref2"), 9};

    // Response payload: 1 byte kind + 32-byte digest or 1-byte action code.
    Bytes act_payload = encode_decision_payload(act);
    CHECK(act_payload.size() == 2);
    CHECK(act_payload[0] == 0x02);
    CHECK(act_payload[1] == 0x03);
    Bytes upd_payload = encode_decision_payload(upd);
    CHECK(upd_payload.size() == 33);
    CHECK(upd_payload[0] == 0x01);
    CHECK(std::equal(x.bytes.begin(), x.bytes.end(), upd_payload.begin() + 1));

    for (const auto& d : {act, upd}) {
        CHECK(decode_decision_payload(encode_decision_payload(d)).same_outcome(d));
        DisputeDecision back = decode_decision_record(encode_decision_record(d));
        CHECK(back.same_outcome(d));
        CHECK(back.dispute_ref == d.dispute_ref);
        CHECK(back.decided_at_us == d.decided_at_us);
    }
}

TEST_CASE("frame service handles disputes over TCP loopback") {
    Fixture f;
    VerifierService service(f.v, [] { return 777ULL; });
    service.start(0);
    REQUIRE(service.port() != 0);

    Digest x = measure::hash_bytes("X");
    wire::DisputePacket packet = dispute_for(f.device, x, f.benchmark);
    wire::Frame request{wire::MsgType::Dispute, wire::encode_dispute(packet)};
    wire::Frame response = exchange_frame("127.0.0.1", service.port(), request);
    CHECK(response.msg_type == wire::MsgType::DisputeResponse);
    DisputeDecision d = decode_decision_payload(response.payload);
    CHECK(d.kind == DisputeDecision::Kind::Action);

    // Unknown devices come back as a kind-0x00 error payload, not a hangup.
    wire::DisputePacket ghost = dispute_for(to_bytes("ghost"), x, f.benchmark);
    wire::Frame bad{wire::MsgType::Dispute, wire::encode_dispute(ghost)};
    wire::Frame err = exchange_frame("127.0.0.1", service.port(), bad);
    CHECK(err.msg_type == wire::MsgType::DisputeResponse);
    REQUIRE(err.payload.size() == 2);
    CHECK(err.payload[0] == 0x00);
    CHECK(err.payload[1] == static_cast<std::uint8_t>(Errc::unknown_device));

    // Matching dispute resolves to update-benchmark over the same path.
    wire::DisputePacket legit = dispute_for(f.device, f.benchmark, x);
    wire::Frame ok = exchange_frame("127.0.0.1", service.port(),
                                    {wire::MsgType::Dispute, wire::encode_dispute(legit)});
    CHECK(decode_decision_payload(ok.payload).kind == DisputeDecision::Kind::UpdateBenchmark);

    service.stop();
}

TEST_SUITE_END();
