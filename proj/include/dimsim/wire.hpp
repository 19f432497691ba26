#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dimsim/bytes.hpp"
#include "dimsim/digest.hpp"
#include "dimsim/keys.hpp"
#include "dimsim/measure.hpp"

namespace dimsim::wire {

// ---------------------------------------------------------------------------
// Action commands (one byte, 0x00..0x07)
// ---------------------------------------------------------------------------

enum class ActionCode : std::uint8_t {
    Null = 0x00,
    InitiateInvestigation = 0x01,
    RestrictExecution = 0x02,
    IsolateDevice = 0x03,
    ContainDevice = 0x04,
    RevokeDevice = 0x05,
    StopAndQuarantineFile = 0x06,
    RequestDeeperInvestigation = 0x07,
};

constexpr std::uint8_t kActionCodeMax = 0x07;

// Label for a valid code; throws Errc::unknown_code for bytes > 0x07.
std::string_view action_name(ActionCode code);
ActionCode to_action_code(std::uint8_t byte);

// ---------------------------------------------------------------------------
// Dispute packet
// ---------------------------------------------------------------------------

// Anomaly report raised by an applet on a scan mismatch. Encoded layout:
//   [1B len][device_id] [1B len][applet_id] [1B len][timestamp]
//   [32B current_hash] [32B previous_hash] [32B action_taken]
// where action_taken byte 0 is the ActionCode and bytes 1..31 are reserved
// zero. The timestamp is big-endian µs since the Unix epoch, minimal length
// zero-padded to >= 7 bytes. Encoded size is 116..126 bytes.
struct DisputePacket {
    Bytes device_id;   // 5..7 bytes
    Bytes applet_id;   // 5..7 bytes
    std::uint64_t timestamp_us = 0;
    Digest current_hash;
    Digest previous_hash;
    ActionCode action_taken = ActionCode::Null;

    bool operator==(const DisputePacket&) const = default;
};

constexpr std::size_t kDisputeMinEncodedSize = 116;
constexpr std::size_t kDisputeMaxEncodedSize = 126;

Bytes encode_dispute(const DisputePacket& packet);
DisputePacket decode_dispute(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// ISO 7816-4 short APDUs
// ---------------------------------------------------------------------------

struct ApduCommand {
    std::uint8_t cla = 0;
    std::uint8_t ins = 0;
    std::uint8_t p1 = 0;
    std::uint8_t p2 = 0;
    Bytes data;                        // <= 255 bytes; Lc emitted iff nonempty
    std::optional<std::uint8_t> le;    // raw Le byte when present

    bool operator==(const ApduCommand&) const = default;
};

struct ApduResponse {
    Bytes data;
    std::uint8_t sw1 = 0;
    std::uint8_t sw2 = 0;

    bool operator==(const ApduResponse&) const = default;

    std::uint16_t sw() const { return static_cast<std::uint16_t>((sw1 << 8) | sw2); }
};

// Status words used by the applet surface.
constexpr std::uint16_t kSwOk = 0x9000;
constexpr std::uint16_t kSwWrongData = 0x6A80;
constexpr std::uint16_t kSwConditionsNotSatisfied = 0x6985;
constexpr std::uint16_t kSwNotFound = 0x6A82;
constexpr std::uint16_t kSwInsNotSupported = 0x6D00;
constexpr std::uint16_t kSwClaNotSupported = 0x6E00;

// Proprietary class and instruction registry of the attestation applet.
constexpr std::uint8_t kAppletCla = 0x80;
constexpr std::uint8_t kInsMatchHashes = 0x10;   // data = 32-byte digest
constexpr std::uint8_t kInsGetLogEntry = 0x20;   // P1P2 = big-endian index
constexpr std::uint8_t kInsSetBenchmark = 0x30;  // data = 32-byte digest
constexpr std::uint8_t kInsGetState = 0x40;

// CLA INS P1 P2 [Lc data] [Le]; cases 1-4, short form only. Lc = 0x00 is
// reserved for extended length and rejected.
Bytes encode_apdu(const ApduCommand& cmd);
ApduCommand decode_apdu(std::span<const std::uint8_t> bytes);

Bytes encode_apdu_response(const ApduResponse& rsp);
ApduResponse decode_apdu_response(std::span<const std::uint8_t> bytes);

ApduResponse status_response(std::uint16_t sw, Bytes data = {});

// ---------------------------------------------------------------------------
// Applet <-> verifier transport frames
// ---------------------------------------------------------------------------

enum class MsgType : std::uint8_t {
    Dispute = 0x01,
    DisputeResponse = 0x02,
    LogArchive = 0x03,
    UpdateNotify = 0x04,
    ProvisionMeasurement = 0x05,
    ProvisionConfirm = 0x06,
    ControlAction = 0x07,
};

std::string_view msg_type_name(MsgType type);

constexpr std::uint8_t kFrameVersion = 0x01;

// [1B version=0x01][1B msg_type][4B BE payload length][payload]
struct Frame {
    MsgType msg_type = MsgType::Dispute;
    Bytes payload;

    bool operator==(const Frame&) const = default;
};

Bytes encode_frame(const Frame& frame);
Frame decode_frame(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Frame payload codecs
// ---------------------------------------------------------------------------

// Applet log entry as carried in LOG_ARCHIVE payloads and GET_LOG_ENTRY
// responses: [1B len][timestamp][32B current][32B previous][1B action],
// timestamp framed exactly like the dispute packet's.
struct LogEntry {
    std::uint64_t t_s = 0;  // µs
    Digest current_hash;
    Digest previous_hash;
    ActionCode action_taken = ActionCode::Null;

    bool operator==(const LogEntry&) const = default;
};

Bytes encode_log_entry(const LogEntry& entry);
LogEntry decode_log_entry(std::span<const std::uint8_t> bytes);

// LOG_ARCHIVE payload: [1B count >= 1][count encoded entries].
Bytes encode_log_archive(const std::vector<LogEntry>& entries);
std::vector<LogEntry> decode_log_archive(std::span<const std::uint8_t> bytes);

// PROVISION_MEASUREMENT payload.
Bytes encode_measurement_report(const measure::MeasurementReport& report);
measure::MeasurementReport decode_measurement_report(std::span<const std::uint8_t> bytes);

// Receipt: [1B len][provider_id][32B digest][64B signature].
Bytes encode_receipt(const Receipt& receipt);
Receipt decode_receipt(std::span<const std::uint8_t> bytes);

// PROVISION_CONFIRM payload: [1B ok][receipt iff ok = 0x01].
Bytes encode_provision_confirm(const std::optional<Receipt>& receipt);
std::optional<Receipt> decode_provision_confirm(std::span<const std::uint8_t> bytes);

}  // namespace dimsim::wire
