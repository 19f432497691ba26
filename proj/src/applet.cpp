#include "dimsim/applet.hpp"

#include <algorithm>

#include "dimsim/error.hpp"

namespace dimsim::applet {

std::string_view mode_name(Mode mode) {
    switch (mode) {
        case Mode::Unprovisioned: return "Unprovisioned";
        case Mode::AwaitingConfirmation: return "AwaitingConfirmation";
        case Mode::Active: return "Active";
        case Mode::Blocked: return "Blocked";
    }
    return "?";
}

std::optional<std::vector<wire::LogEntry>> LogRing::append(const wire::LogEntry& entry) {
    if (!entries_.empty() && entry.t_s < entries_.back().t_s) {
        throw Error(Errc::non_monotone_timestamp, "log timestamps must not decrease");
    }
    std::optional<std::vector<wire::LogEntry>> archive;
    if (entries_.size() == kCapacity) {
        // At capacity: ship the whole window to the verifier, then start over.
        archive = std::move(entries_);
        entries_ = {};
    }
    entries_.push_back(entry);
    return archive;
}

void LogRing::restore(std::vector<wire::LogEntry> entries) {
    if (entries.size() > kCapacity) {
        throw Error(Errc::invalid_field, "log ring snapshot exceeds capacity");
    }
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].t_s < entries[i - 1].t_s) {
            throw Error(Errc::non_monotone_timestamp, "log ring snapshot out of order");
        }
    }
    entries_ = std::move(entries);
}

Applet::Applet(AppletConfig config) : config_(std::move(config)) {
    auto id_ok = [](const Bytes& id) { return id.size() >= 5 && id.size() <= 7; };
    if (!id_ok(config_.device_id) || !id_ok(config_.applet_id)) {
        throw Error(Errc::invalid_field, "device_id and applet_id must be 5-7 bytes");
    }
    if (config_.policy.alarm_block_threshold < 1) {
        throw Error(Errc::config_invalid, "alarm_block_threshold must be >= 1");
    }
}

wire::Frame Applet::submit_initial_measurement(const measure::MeasurementReport& report) {
    // Re-submission before confirmation replaces the pending slot.
    if (mode_ != Mode::Unprovisioned && mode_ != Mode::AwaitingConfirmation) {
        throw Error(Errc::wrong_state, "initial measurement only before provisioning completes");
    }
    pending_ = report;
    mode_ = Mode::AwaitingConfirmation;
    return wire::Frame{wire::MsgType::ProvisionMeasurement,
                       wire::encode_measurement_report(report)};
}

void Applet::confirm_benchmark(const Receipt& receipt) {
    if (mode_ != Mode::AwaitingConfirmation) {
        throw Error(Errc::wrong_state, "no provisioning in progress");
    }
    if (receipt.digest != pending_->composite) {
        throw Error(Errc::receipt_mismatch, "receipt digest does not match pending measurement");
    }
    if (config_.provider_key && !verify_receipt(receipt, *config_.provider_key)) {
        throw Error(Errc::receipt_mismatch, "receipt signature does not verify");
    }
    benchmark_ = pending_->composite;
    last_scan_hash_ = benchmark_;
    pending_.reset();
    alarms_ = 0;
    mode_ = Mode::Active;
}

ScanOutcome Applet::scan_epoch(const measure::MeasurementReport& report, std::uint64_t now_us) {
    if (mode_ != Mode::Active) {
        throw Error(Errc::wrong_state, std::string("scan in mode ") + std::string(mode_name(mode_)));
    }
    ScanOutcome outcome;
    if (measure::compare(report.composite, *benchmark_)) {
        // Match: log with previous = current and a null action, wait for the
        // next epoch.
        alarms_ = 0;
        outcome.entry = {now_us, report.composite, report.composite, wire::ActionCode::Null};
        last_scan_hash_ = report.composite;
        outcome.archive = ring_.append(outcome.entry);
        return outcome;
    }
    return mismatch_outcome(report, now_us);
}

ScanOutcome Applet::mismatch_outcome(const measure::MeasurementReport& report,
                                     std::uint64_t now_us) {
    ScanOutcome outcome;
    ++alarms_;
    Digest previous = *last_scan_hash_;  // benchmark on the first-ever scan

    wire::ActionCode action = wire::ActionCode::InitiateInvestigation;
    if (config_.policy.autonomous_block && alarms_ >= config_.policy.alarm_block_threshold) {
        action = wire::ActionCode::RevokeDevice;
        mode_ = Mode::Blocked;
        outcome.autonomous_action = action;
    }

    outcome.entry = {now_us, report.composite, previous, action};
    last_scan_hash_ = report.composite;
    outcome.archive = ring_.append(outcome.entry);

    wire::DisputePacket packet;
    packet.device_id = config_.device_id;
    packet.applet_id = config_.applet_id;
    packet.timestamp_us = now_us;
    packet.current_hash = report.composite;
    packet.previous_hash = previous;
    packet.action_taken = action;
    outcome.dispute = std::move(packet);
    return outcome;
}

void Applet::handle_verifier_response(const VerifierDecision& decision) {
    if (mode_ != Mode::Active && mode_ != Mode::Blocked) {
        throw Error(Errc::wrong_state, "verifier decisions apply to provisioned applets only");
    }
    if (decision.kind == VerifierDecision::Kind::UpdateBenchmark) {
        benchmark_ = decision.new_benchmark;
        last_scan_hash_ = decision.new_benchmark;
        alarms_ = 0;
        mode_ = Mode::Active;
        return;
    }
    switch (decision.action) {
        case wire::ActionCode::IsolateDevice:
        case wire::ActionCode::ContainDevice:
        case wire::ActionCode::RevokeDevice:
            mode_ = Mode::Blocked;
            break;
        default:
            break;  // null and investigation-class actions do not change mode
    }
}

AppletSnapshot Applet::snapshot() const {
    if (mode_ == Mode::AwaitingConfirmation) {
        throw Error(Errc::wrong_state, "cannot snapshot mid-handshake");
    }
    return {mode_, benchmark_, alarms_, ring_.entries(), last_scan_hash_};
}

Applet Applet::from_snapshot(AppletConfig config, const AppletSnapshot& snap) {
    if (snap.mode == Mode::AwaitingConfirmation) {
        throw Error(Errc::wrong_state, "cannot restore mid-handshake");
    }
    if ((snap.mode == Mode::Active || snap.mode == Mode::Blocked) != snap.benchmark.has_value()) {
        throw Error(Errc::invalid_field, "benchmark present iff Active or Blocked");
    }
    Applet a(std::move(config));
    a.mode_ = snap.mode;
    a.benchmark_ = snap.benchmark;
    a.alarms_ = snap.consecutive_alarms;
    a.ring_.restore(snap.log_entries);
    a.last_scan_hash_ = snap.last_scan_hash ? snap.last_scan_hash : snap.benchmark;
    return a;
}

wire::ApduResponse Applet::handle_apdu(const wire::ApduCommand& cmd) {
    using wire::status_response;
    if (cmd.cla != wire::kAppletCla) return status_response(wire::kSwClaNotSupported);

    switch (cmd.ins) {
        case wire::kInsMatchHashes: {
            if (cmd.data.size() != Digest::kSize) return status_response(wire::kSwWrongData);
            // Benchmark comparisons answer only in Active mode; a blocked
            // applet never reports a match.
            if (mode_ != Mode::Active) return status_response(wire::kSwConditionsNotSatisfied);
            Digest probe = Digest::from_span(cmd.data);
            bool match = measure::compare(probe, *benchmark_);
            return status_response(wire::kSwOk,
                                   Bytes{static_cast<std::uint8_t>(match ? 0x01 : 0x00)});
        }
        case wire::kInsGetLogEntry: {
            std::size_t index = (static_cast<std::size_t>(cmd.p1) << 8) | cmd.p2;
            if (index >= ring_.size()) return status_response(wire::kSwNotFound);
            return status_response(wire::kSwOk, wire::encode_log_entry(ring_.entries()[index]));
        }
        case wire::kInsSetBenchmark: {
            if (mode_ != Mode::AwaitingConfirmation) {
                return status_response(wire::kSwConditionsNotSatisfied);
            }
            if (cmd.data.size() != Digest::kSize) return status_response(wire::kSwWrongData);
            Digest digest = Digest::from_span(cmd.data);
            if (digest != pending_->composite) return status_response(wire::kSwWrongData);
            benchmark_ = digest;
            last_scan_hash_ = digest;
            pending_.reset();
            alarms_ = 0;
            mode_ = Mode::Active;
            return status_response(wire::kSwOk);
        }
        case wire::kInsGetState:
            return status_response(wire::kSwOk, Bytes{static_cast<std::uint8_t>(mode_)});
        default:
            return status_response(wire::kSwInsNotSupported);
    }
}

}  // namespace dimsim::applet
