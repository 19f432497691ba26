#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dimsim/keys.hpp"
#include "dimsim/measure.hpp"
#include "dimsim/wire.hpp"

namespace dimsim::applet {

enum class Mode : std::uint8_t {
    Unprovisioned = 0x00,
    AwaitingConfirmation = 0x01,
    Active = 0x02,
    Blocked = 0x03,
};

std::string_view mode_name(Mode mode);

// Bounded in-element audit log. At capacity the next append flushes the whole
// ring as an archive batch destined for the remote verifier.
class LogRing {
public:
    static constexpr std::size_t kCapacity = 125;

    // Returns the archived batch when the append triggered a flush.
    std::optional<std::vector<wire::LogEntry>> append(const wire::LogEntry& entry);

    const std::vector<wire::LogEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    // Snapshot restore; rejects more entries than the ring can hold.
    void restore(std::vector<wire::LogEntry> entries);

private:
    std::vector<wire::LogEntry> entries_;
};

struct PolicyConfig {
    std::uint32_t alarm_block_threshold = 3;  // >= 1
    bool autonomous_block = true;
    std::uint64_t scan_period_us = 1'000'000;
};

struct AppletConfig {
    Bytes device_id;   // 5..7 bytes
    Bytes applet_id;   // 5..7 bytes
    PolicyConfig policy;
    // When set, confirmation receipts must verify against this key.
    std::optional<VerifyKey> provider_key;
};

// Verifier decision as delivered back to the applet.
struct VerifierDecision {
    enum class Kind : std::uint8_t { UpdateBenchmark = 0x01, Action = 0x02 };

    Kind kind = Kind::Action;
    Digest new_benchmark;                               // UpdateBenchmark
    wire::ActionCode action = wire::ActionCode::Null;   // Action

    static VerifierDecision update(const Digest& d) {
        return {Kind::UpdateBenchmark, d, wire::ActionCode::Null};
    }
    static VerifierDecision act(wire::ActionCode code) { return {Kind::Action, Digest{}, code}; }

    bool operator==(const VerifierDecision&) const = default;
};

struct ScanOutcome {
    wire::LogEntry entry;
    std::optional<wire::DisputePacket> dispute;
    // Set when this scan crossed the alarm threshold and blocked the device.
    std::optional<wire::ActionCode> autonomous_action;
    // Set when the log append flushed the ring.
    std::optional<std::vector<wire::LogEntry>> archive;
};

// Persistable view of an applet between CLI invocations. Mid-handshake state
// (AwaitingConfirmation) is intentionally not restorable.
struct AppletSnapshot {
    Mode mode = Mode::Unprovisioned;
    std::optional<Digest> benchmark;
    std::uint32_t consecutive_alarms = 0;
    std::vector<wire::LogEntry> log_entries;
    std::optional<Digest> last_scan_hash;
};

// Simulated attestation applet: a single-threaded state machine over
// Unprovisioned → AwaitingConfirmation → Active ⇄ Blocked. Time is always
// injected; the applet never reads a wall clock.
class Applet {
public:
    explicit Applet(AppletConfig config);

    Mode mode() const { return mode_; }
    const std::optional<Digest>& benchmark() const { return benchmark_; }
    const std::optional<measure::MeasurementReport>& pending_measurement() const { return pending_; }
    std::uint32_t consecutive_alarms() const { return alarms_; }
    const LogRing& log() const { return ring_; }
    const Bytes& device_id() const { return config_.device_id; }
    const Bytes& applet_id() const { return config_.applet_id; }
    const PolicyConfig& policy() const { return config_.policy; }

    // Unprovisioned → AwaitingConfirmation; emits the PROVISION_MEASUREMENT frame.
    wire::Frame submit_initial_measurement(const measure::MeasurementReport& report);

    // AwaitingConfirmation → Active; the receipt must reference the pending
    // composite (and verify, when a provider key is configured).
    void confirm_benchmark(const Receipt& receipt);

    // One periodic measurement epoch. Active only.
    ScanOutcome scan_epoch(const measure::MeasurementReport& report, std::uint64_t now_us);

    // DISPUTE_RESPONSE / CONTROL_ACTION handling. Active or Blocked only.
    void handle_verifier_response(const VerifierDecision& decision);

    // ISO 7816 command surface; total, errors become status words.
    wire::ApduResponse handle_apdu(const wire::ApduCommand& cmd);

    AppletSnapshot snapshot() const;
    static Applet from_snapshot(AppletConfig config, const AppletSnapshot& snap);

private:
    ScanOutcome mismatch_outcome(const measure::MeasurementReport& report, std::uint64_t now_us);

    AppletConfig config_;
    Mode mode_ = Mode::Unprovisioned;
    std::optional<Digest> benchmark_;
    std::optional<measure::MeasurementReport> pending_;
    std::uint32_t alarms_ = 0;
    LogRing ring_;
    // Composite seen by the most recent scan; the benchmark right after
    // provisioning (epoch 0 has no prior epoch).
    std::optional<Digest> last_scan_hash_;
};

}  // namespace dimsim::applet
