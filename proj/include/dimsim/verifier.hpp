#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dimsim/immustore.hpp"
#include "dimsim/keys.hpp"
#include "dimsim/pdl.hpp"
#include "dimsim/wire.hpp"

namespace dimsim::verifier {

// Verdict on one dispute. Quorum equality compares kind and payload only.
struct DisputeDecision {
    enum class Kind : std::uint8_t { UpdateBenchmark = 0x01, Action = 0x02 };

    Kind kind = Kind::Action;
    Digest benchmark;                                 // UpdateBenchmark payload
    wire::ActionCode action = wire::ActionCode::Null; // Action payload
    Digest dispute_ref;                               // hash of the encoded packet
    std::uint64_t decided_at_us = 0;

    bool same_outcome(const DisputeDecision& other) const {
        if (kind != other.kind) return false;
        return kind == Kind::UpdateBenchmark ? benchmark == other.benchmark
                                             : action == other.action;
    }

    std::string describe() const;
};

// DISPUTE_RESPONSE payload: [1B kind][32B digest | 1B action]. Kind 0x00 =
// error + 1 error byte is a transport-level extension; these codecs handle
// the two decision kinds only.
Bytes encode_decision_payload(const DisputeDecision& decision);
DisputeDecision decode_decision_payload(std::span<const std::uint8_t> bytes);

// Store record under "decision:<device_id hex>": the response payload
// followed by [32B dispute_ref][8B BE decided_at µs].
Bytes encode_decision_record(const DisputeDecision& decision);
DisputeDecision decode_decision_record(std::span<const std::uint8_t> bytes);

// Vendor notification that an agreed software update happened.
struct UpdateNotification {
    std::string software_id;
    Digest new_hash;
    Receipt confirmation;  // solution provider receipt over new_hash
};

Bytes encode_update_notification(const UpdateNotification& n);
UpdateNotification decode_update_notification(std::span<const std::uint8_t> bytes);

struct QuorumConfig {
    std::vector<std::string> verifier_ids;  // >= 1; unanimity rule
};

struct NoQuorum {
    std::string reason;
};

using QuorumOutcome = std::variant<DisputeDecision, NoQuorum>;

// Unanimity across one decision per configured verifier; throws
// Errc::incomplete_vote when votes are missing.
QuorumOutcome quorum_decide(const QuorumConfig& config,
                            const std::vector<DisputeDecision>& decisions);

// The remote verifier: adjudicates disputes against the tamper-evident store,
// ingests log archives, and records agreed software updates. All writes go
// through the single-writer store it owns a reference to.
class Verifier {
public:
    Verifier(immustore::Store& store, const pdl::Ledger* ledger,
             wire::ActionCode default_action = wire::ActionCode::RevokeDevice);

    void register_provider(const std::string& provider_id, const VerifyKey& key);
    void register_device(const Bytes& device_id, const std::string& software_id);
    bool knows_device(const Bytes& device_id) const;

    // Store key for a software benchmark is the software_id itself.
    std::pair<std::uint64_t, immustore::RootDigest> record_initial_benchmark(
        const std::string& software_id, const Digest& digest, std::uint64_t now_us);

    // Decide, append the decision under "decision:<device_id hex>", then return.
    DisputeDecision handle_dispute(const wire::DisputePacket& packet, std::uint64_t now_us);

    // Receipt must verify against a registered provider and a matching update
    // contract must exist in the ledger; then the new hash becomes latest.
    std::pair<std::uint64_t, immustore::RootDigest> record_software_update(
        const UpdateNotification& notification, std::uint64_t now_us);

    // Appends each entry under "log:<device_id hex>".
    std::pair<std::size_t, immustore::RootDigest> ingest_archive(
        const std::vector<wire::LogEntry>& batch, const Bytes& device_id, std::uint64_t now_us);

    immustore::Store& store() { return store_; }
    wire::ActionCode default_action() const { return default_action_; }

private:
    immustore::Store& store_;
    const pdl::Ledger* ledger_;  // may be null when updates are not in play
    wire::ActionCode default_action_;
    std::map<Bytes, std::string> devices_;
    std::map<std::string, VerifyKey> providers_;
};

}  // namespace dimsim::verifier
