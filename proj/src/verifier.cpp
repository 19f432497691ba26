#include "dimsim/verifier.hpp"

#include <algorithm>

#include "dimsim/error.hpp"
#include "dimsim/measure.hpp"

namespace dimsim::verifier {

std::string DisputeDecision::describe() const {
    if (kind == Kind::UpdateBenchmark) return "update-benchmark:" + benchmark.short_hex();
    char buf[8];
    std::snprintf(buf, sizeof(buf), "0x%02x", static_cast<unsigned>(action));
    return std::string("action:") + buf + " " + std::string(wire::action_name(action));
}

namespace {

DisputeDecision read_decision(ByteReader& r) {
    DisputeDecision d;
    std::uint8_t kind = r.u8();
    if (kind == 0x01) {
        d.kind = DisputeDecision::Kind::UpdateBenchmark;
        d.benchmark = Digest::from_span(r.raw(Digest::kSize));
    } else if (kind == 0x02) {
        d.kind = DisputeDecision::Kind::Action;
        d.action = wire::to_action_code(r.u8());
    } else {
        throw Error(Errc::invalid_field, "decision kind must be 0x01 or 0x02");
    }
    return d;
}

}  // namespace

Bytes encode_decision_payload(const DisputeDecision& decision) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(decision.kind));
    if (decision.kind == DisputeDecision::Kind::UpdateBenchmark) {
        w.raw(decision.benchmark.bytes);
    } else {
        w.u8(static_cast<std::uint8_t>(decision.action));
    }
    return w.take();
}

DisputeDecision decode_decision_payload(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    DisputeDecision d = read_decision(r);
    r.expect_done();
    return d;
}

Bytes encode_decision_record(const DisputeDecision& decision) {
    ByteWriter w;
    w.raw(encode_decision_payload(decision));
    w.raw(decision.dispute_ref.bytes);
    w.u64be(decision.decided_at_us);
    return w.take();
}

DisputeDecision decode_decision_record(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    DisputeDecision d = read_decision(r);
    d.dispute_ref = Digest::from_span(r.raw(Digest::kSize));
    d.decided_at_us = r.u64be();
    r.expect_done();
    return d;
}

Bytes encode_update_notification(const UpdateNotification& n) {
    if (n.software_id.empty() || n.software_id.size() > 255) {
        throw Error(Errc::invalid_field, "software_id must be 1-255 chars");
    }
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(n.software_id.size()));
    w.raw(to_bytes(n.software_id));
    w.raw(n.new_hash.bytes);
    w.raw(wire::encode_receipt(n.confirmation));
    return w.take();
}

UpdateNotification decode_update_notification(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    UpdateNotification n;
    std::size_t id_len = r.u8();
    if (id_len == 0) throw Error(Errc::invalid_field, "empty software_id");
    auto id = r.raw(id_len);
    n.software_id.assign(id.begin(), id.end());
    n.new_hash = Digest::from_span(r.raw(Digest::kSize));
    auto rest = r.raw(r.remaining());
    n.confirmation = wire::decode_receipt(rest);
    return n;
}

QuorumOutcome quorum_decide(const QuorumConfig& config,
                            const std::vector<DisputeDecision>& decisions) {
    if (config.verifier_ids.empty()) {
        throw Error(Errc::config_invalid, "quorum needs at least one verifier");
    }
    if (decisions.size() < config.verifier_ids.size()) {
        throw Error(Errc::incomplete_vote,
                    std::to_string(decisions.size()) + " of " +
                        std::to_string(config.verifier_ids.size()) + " verifier decisions");
    }
    // Unanimity: every verifier must agree on kind and payload.
    for (std::size_t i = 1; i < decisions.size(); ++i) {
        if (!decisions[i].same_outcome(decisions[0])) {
            return NoQuorum{"verifier " + std::to_string(i) + " decided " +
                            decisions[i].describe() + " vs " + decisions[0].describe()};
        }
    }
    return decisions[0];
}

Verifier::Verifier(immustore::Store& store, const pdl::Ledger* ledger,
                   wire::ActionCode default_action)
    : store_(store), ledger_(ledger), default_action_(default_action) {}

void Verifier::register_provider(const std::string& provider_id, const VerifyKey& key) {
    providers_[provider_id] = key;
}

void Verifier::register_device(const Bytes& device_id, const std::string& software_id) {
    devices_[device_id] = software_id;
}

bool Verifier::knows_device(const Bytes& device_id) const {
    return devices_.count(device_id) > 0;
}

std::pair<std::uint64_t, immustore::RootDigest> Verifier::record_initial_benchmark(
    const std::string& software_id, const Digest& digest, std::uint64_t now_us) {
    immustore::Record record{software_id, Bytes(digest.bytes.begin(), digest.bytes.end()), now_us};
    return store_.append(record);
}

DisputeDecision Verifier::handle_dispute(const wire::DisputePacket& packet, std::uint64_t now_us) {
    auto device = devices_.find(packet.device_id);
    if (device == devices_.end()) {
        throw Error(Errc::unknown_device, "device " + to_hex(packet.device_id));
    }
    const std::string& software_id = device->second;
    auto latest = store_.get_latest(software_id);
    if (!latest) throw Error(Errc::not_found, "no benchmark recorded for " + software_id);
    Digest known_good = Digest::from_span(latest->first.value);

    DisputeDecision decision;
    decision.dispute_ref = measure::hash_bytes(wire::encode_dispute(packet));
    decision.decided_at_us = now_us;
    if (measure::compare(packet.current_hash, known_good)) {
        // A legitimate update raced ahead of the applet: tell it to adopt the
        // store's latest value.
        decision.kind = DisputeDecision::Kind::UpdateBenchmark;
        decision.benchmark = known_good;
    } else {
        decision.kind = DisputeDecision::Kind::Action;
        decision.action = default_action_;
    }
    // Decide-then-record-then-respond: the audit trail never lags the applet.
    immustore::Record record{"decision:" + to_hex(packet.device_id),
                             encode_decision_record(decision), now_us};
    store_.append(record);
    return decision;
}

std::pair<std::uint64_t, immustore::RootDigest> Verifier::record_software_update(
    const UpdateNotification& notification, std::uint64_t now_us) {
    auto provider = providers_.find(notification.confirmation.provider_id);
    if (provider == providers_.end()) {
        throw Error(Errc::bad_receipt,
                    "unknown solution provider " + notification.confirmation.provider_id);
    }
    if (notification.confirmation.digest != notification.new_hash ||
        !verify_receipt(notification.confirmation, provider->second)) {
        throw Error(Errc::bad_receipt, "receipt does not cover the new hash");
    }
    if (ledger_ && !ledger_->has_update_contract(notification.software_id, notification.new_hash)) {
        throw Error(Errc::no_matching_contract,
                    "no executed update contract for " + notification.software_id);
    }
    immustore::Record record{notification.software_id,
                             Bytes(notification.new_hash.bytes.begin(),
                                   notification.new_hash.bytes.end()),
                             now_us};
    return store_.append(record);
}

std::pair<std::size_t, immustore::RootDigest> Verifier::ingest_archive(
    const std::vector<wire::LogEntry>& batch, const Bytes& device_id, std::uint64_t now_us) {
    if (batch.empty()) throw Error(Errc::malformed_batch, "empty archive batch");
    for (std::size_t i = 1; i < batch.size(); ++i) {
        if (batch[i].t_s < batch[i - 1].t_s) {
            throw Error(Errc::malformed_batch, "archive entries out of timestamp order");
        }
    }
    std::string key = "log:" + to_hex(device_id);
    immustore::RootDigest root;
    for (const auto& entry : batch) {
        immustore::Record record{key, wire::encode_log_entry(entry), now_us};
        root = store_.append(record).second;
    }
    return {batch.size(), root};
}

}  // namespace dimsim::verifier
